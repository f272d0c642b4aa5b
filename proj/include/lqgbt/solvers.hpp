#pragma once

#include "lqgbt/operators.hpp"
#include "lqgbt/types.hpp"

#include <cstdint>
#include <string>

namespace lqgbt {

struct SolverConfig {
    double tol = 1e-10;        // relative residual / relative-change tolerance
    int max_outer = 200;       // outer fixed-point budget
    double lmi_margin = 1e-6;  // stop the LMI feasibility search at lambda_max <= -lmi_margin
    std::uint64_t seed = 0;
};

struct ObservabilityGramianResult {
    Matrix Q;
    double residual = 0.0;  // Frobenius residual of the Riccati equation at Q
    int iterations = 0;
    SpectralCertificate closed_loop;  // certificate for (A - B B^T Q, N_i)
};

enum class ReachabilityStrategy { SubgradientFeasibility, ConstructiveEpsilon, ExternalSdp };

std::string to_string(ReachabilityStrategy s);
ReachabilityStrategy reachability_strategy_from_string(const std::string& s);

struct ReachabilityGramianResult {
    Matrix P;       // positive definite Gramian
    Matrix X;       // P^{-1}, the LMI variable actually solved for
    double margin = 0.0;   // lambda_max of the Riccati-form inequality at P^{-1}
    double schur_value = 0.0;  // final lambda_max of the lifted LMI block matrix
    int iterations = 0;
    ReachabilityStrategy strategy = ReachabilityStrategy::SubgradientFeasibility;
    bool dual_probe_ok = false;  // stabilizability probe of (A^T, C^T, N_i^T)
};

/// The Gramian pair (P, Q) with the diagnostics the acceptance checks need.
struct GramianPair {
    Matrix P;
    Matrix Q;
    double q_residual = 0.0;
    double p_margin = 0.0;
    int iterations = 0;
    SpectralCertificate closed_loop_certificate;
};

/// Solves A^T X + X A + W = 0 by real Schur reduction with blocked
/// back-substitution and iterative refinement. W symmetric.
Matrix solve_lyapunov(const Matrix& A, const Matrix& W, double rel_tol = 1e-11);

/// Solves A^T X + X A + Pi_N(X) + W = 0 for mean-square stable (A, N_i), by
/// the fixed point X_{k+1} = lyap(A, Pi_N(X_k) + W) with a dense fallback.
Matrix solve_generalized_lyapunov(const StochasticSystem& sys, const Matrix& W, const SolverConfig& cfg = {});

/// Stabilizing solution of A^T X + X A + W - X B B^T X = 0 via the
/// Hamiltonian ordered-Schur method plus one Newton refinement step.
Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& W);

/// Observability Gramian of Eq-(3.1) type: outer fixed point
/// Q_{k+1} = riccati(A, B, C^T C + Pi_N(Q_k)) from Q_0 = I, with divergence
/// watchdog and a stabilizing-closed-loop certificate on exit.
ObservabilityGramianResult solve_observability_gramian(const StochasticSystem& sys, const SolverConfig& cfg = {});

/// Feasible point of the Riccati-type reachability inequality, solved for
/// X = P^{-1}. `exchange_dir` is only used by the ExternalSdp strategy.
ReachabilityGramianResult solve_reachability_gramian(const StochasticSystem& sys, const SolverConfig& cfg = {},
                                                     ReachabilityStrategy strategy = ReachabilityStrategy::SubgradientFeasibility,
                                                     const std::string& exchange_dir = {});

/// lambda_max of A^T X + X A + Pi_N(X) - C^T C + X B B^T X; feasibility means <= 0.
double reachability_margin(const StochasticSystem& sys, const Matrix& X);

/// Validates an externally produced X = P^{-1} (symmetry, positive
/// definiteness, feasibility margin) and packages it as a result.
ReachabilityGramianResult ingest_reachability_solution(const StochasticSystem& sys, const Matrix& X,
                                                       const SolverConfig& cfg = {});

/// Convenience wrapper solving both Gramians.
GramianPair compute_gramian_pair(const StochasticSystem& sys, const SolverConfig& cfg = {},
                                 ReachabilityStrategy strategy = ReachabilityStrategy::SubgradientFeasibility,
                                 const std::string& exchange_dir = {});

}  // namespace lqgbt
