#pragma once

#include "lqgbt/balancing.hpp"
#include "lqgbt/operators.hpp"
#include "lqgbt/simulate.hpp"
#include "lqgbt/types.hpp"

namespace lqgbt {

/// Every coefficient appearing in the truncation error bounds.
struct ErrorBoundReport {
    int r = 0;
    double tail_coefficient = 0.0;   // 2 sum_{k>r} sigma_k / sqrt(1+sigma_k^2)
    std::vector<double> hat_sigma;   // sigma_k / sqrt(1+sigma_k^2), all k
    double plain_tail = 0.0;         // 2 sum_{k>r} sigma_k
    double beta = 0.0;               // max(||B^T Q^{1/2}||_2^2, ||C P^{1/2}||_2^2)
    double gamma_T = 0.0;
    double b_r = 0.0;                // ||B_r^T Sigma_r^{1/2}||_2^2
    double b = 0.0;                  // ||B^T Q^{1/2}||_2^2
    double T = std::numeric_limits<double>::infinity();
};

/// Certificates that truncation preserved closed-loop stability and
/// detectability, plus the two balanced type-II inequality margins.
struct PreservationCertificate {
    SpectralCertificate reduced_closed_loop;  // (A_r - B_r B_r^T Sigma_r, N_{i,r})
    bool reduced_detectable = false;
    HautusResult detectability;
    double typeII_margin_sigma = 0.0;    // lambda_max residual of the Sigma inequality
    double typeII_margin_upsilon = 0.0;  // lambda_max residual of the Upsilon inequality
    double scale_sigma = 1.0;
    double scale_upsilon = 1.0;

    bool all_pass(double tol = 1e-8) const {
        return reduced_closed_loop.stable && reduced_detectable && typeII_margin_sigma <= tol * scale_sigma &&
               typeII_margin_upsilon <= tol * scale_upsilon;
    }
};

struct EnergyEstimateReport {
    int index = 0;
    double lambda_P = 0.0;
    double lambda_Q = 0.0;
    // (a) sup_t E<x(t), p_i>^2 <= lambda_{P,i} J_T(0, u) for the test input
    double coefficient_sup = 0.0;
    double cost_J = 0.0;
    bool part_a_ok = false;
    // (b) closed-loop cost from x_0 = q_i equals lambda_{Q,i}
    double closed_loop_cost = 0.0;
    double closed_loop_rel_gap = 0.0;
    bool part_b_ok = false;
    double horizon_used = 0.0;
    // (c) weighted open-loop output energy <= lambda_{Q,i}
    double weighted_output_energy = 0.0;
    bool part_c_ok = false;
};

double apriori_bound_finite(const Vector& sigma, int r, double cost_J_T, double terminal_energy);
double apriori_bound_infinite(const Vector& sigma, int r, double l2_pair_norm);
double feedback_bound(const Vector& sigma, int r, double norm_u1);
double open_loop_bound(double gamma, double apriori);
double weighted_bound(const Vector& sigma, int r, double weighted_input_norm);

enum class GammaMethod { WorstCase, OperatorNorm };

struct GammaEstimate {
    double value = 0.0;
    double dt_used = 0.0;
    double horizon_used = 0.0;
    int iterations = 0;
};

/// Lipschitz constant of the reduced input-output map. WorstCase returns the
/// Gronwall envelope e^{b_r T}; OperatorNorm estimates the L^2_T-induced norm
/// by power iteration on the discretized moment input-output map.
GammaEstimate gamma_T(const ReducedModel& red, double T, GammaMethod method, const SimulationConfig& grid_cfg);

/// spectral-norm-squared helpers: b = ||B^T Q^{1/2}||_2^2 etc.
double weighted_gain(const Matrix& M, const Matrix& SPD);

ErrorBoundReport make_error_bound_report(const Vector& sigma, int r, const StochasticSystem& sys, const Matrix& P,
                                         const Matrix& Q, const ReducedModel& red, double gamma_value, double T);

/// Validates the Gramian energy estimates for eigendirection `index`
/// (descending eigenvalue order, deterministic sign convention).
EnergyEstimateReport energy_estimate_check(const StochasticSystem& sys, const Matrix& P, const Matrix& Q, int index,
                                           double T, const SimulationConfig& sim_cfg, const TimeSignal& test_input);

/// Certifies the reduced closed loop, reduced detectability, and the balanced
/// type-II inequalities. Failures are reported, not thrown.
PreservationCertificate preservation_certificates(const StochasticSystem& sys, const BalancedRealization& bal,
                                                  const ReducedModel& red, double hautus_tol = 1e-8);

/// Eigenpairs of a symmetric matrix in descending order with the
/// largest-magnitude component of each vector made positive.
std::pair<Vector, Matrix> ordered_eigendecomposition(const Matrix& S);

}  // namespace lqgbt
