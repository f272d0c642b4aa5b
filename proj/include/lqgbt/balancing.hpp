#pragma once

#include "lqgbt/types.hpp"

namespace lqgbt {

/// Balanced realization: S_b P S_b^T = S_b^{-T} Q S_b^{-1} = diag(sigma).
struct BalancedRealization {
    Matrix S_b;
    Matrix S_b_inv;
    Vector sigma;  // non-increasing, strictly positive
    Matrix A_n;
    Matrix B_n;
    Matrix C_n;
    std::vector<Matrix> N_n;
    Matrix K;  // noise covariance carried through unchanged

    StochasticSystem balanced_system() const { return StochasticSystem(A_n, N_n, B_n, C_n, K); }
};

/// Truncation of a balanced realization to order r with lift/restrict maps.
struct ReducedModel {
    Matrix A_r;
    Matrix B_r;
    Matrix C_r;
    std::vector<Matrix> N_r;
    Matrix K;
    Vector sigma_r;   // leading r singular values
    Matrix lift;      // V_r = first r columns of S_b_inv, n x r
    Matrix restrict_; // W_r = first r rows of S_b, r x n
    int r = 0;

    StochasticSystem system() const { return StochasticSystem(A_r, N_r, B_r, C_r, K); }
};

struct OrderSelection {
    int r = 0;
    bool gap_warning = false;  // set when no admissible r < n exists
    double tail_coefficient = 0.0;
};

constexpr double kGapTol = 1e-10;

/// Square-root balancing: Cholesky of P, spectral factorization of
/// L_P^T Q L_P. Requires P, Q symmetric positive definite.
BalancedRealization balance(const StochasticSystem& sys, const Matrix& P, const Matrix& Q);

/// Truncates to order r; r = n bypasses the singular-value gap check.
ReducedModel truncate(const BalancedRealization& bal, int r, double gap_tol = kGapTol);

/// Smallest r whose tail bound 2 sum_{k>r} sigma_k / sqrt(1+sigma_k^2) meets
/// rel_tol and whose cut satisfies the gap rule; widens r across gaps.
OrderSelection choose_order(const Vector& sigma, double rel_tol, double gap_tol = kGapTol);

/// 2 sum_{k>r} sigma_k / sqrt(1 + sigma_k^2).
double tail_coefficient(const Vector& sigma, int r);

}  // namespace lqgbt
