#pragma once

#include "lqgbt/types.hpp"

#include <complex>
#include <optional>

namespace lqgbt {

/// Dense Kronecker representation of L_A + Pi_N (or the adjoint) acting on
/// vectorized n x n matrices.
struct OperatorMatricization {
    Matrix M;  // n^2 x n^2
    bool adjoint_flag = false;
};

/// Spectral abscissa certificate for the generalized Lyapunov operator.
struct SpectralCertificate {
    double abscissa = 0.0;
    std::complex<double> witness_eigenvalue;
    bool stable = false;
};

/// Outcome of a Hautus-type eigenvector scan. `holds` is true when the tested
/// property (observability or detectability) is satisfied; otherwise the
/// witness eigenpair is populated.
struct HautusResult {
    bool holds = true;
    std::complex<double> witness_eigenvalue;
    Matrix witness;  // symmetric PSD witness V with C V ~ 0, empty when holds
};

/// Result of the operational stabilizability probe: on success `gain` holds F
/// with (A + B F, N_i) certified mean-square stable.
struct StabilizabilityResult {
    bool stabilizable = false;
    std::optional<Matrix> gain;
    SpectralCertificate closed_loop;
};

/// (L_A + Pi_N)(X) = A^T X + X A + sum_ij N_i^T X N_j k_ij, or the adjoint
/// A X + X A^T + sum_ij N_i X N_j^T k_ij. Result is symmetrized.
Matrix apply_operator(const StochasticSystem& sys, const Matrix& X, bool adjoint);

/// Noise part alone: sum_ij N_i^T X N_j k_ij (or adjoint form).
Matrix apply_noise_operator(const StochasticSystem& sys, const Matrix& X, bool adjoint);

/// Dense n^2 x n^2 matricization; guarded at n <= 150.
OperatorMatricization matricize(const StochasticSystem& sys, bool adjoint);

/// Matricization restricted to symmetric matrices in an orthonormal svec
/// basis (dimension n(n+1)/2). Spectrally equivalent for every question asked
/// of the operator here and much cheaper than the full Kronecker form.
Matrix matricize_symmetric(const StochasticSystem& sys, bool adjoint);

/// svec/unsvec for the orthonormal symmetric basis used by matricize_symmetric.
Vector svec(const Matrix& X);
Matrix unsvec(const Vector& v, Eigen::Index n);

/// Mean-square stability test: spectral abscissa of L_A + Pi_N.
SpectralCertificate mean_square_stability(const StochasticSystem& sys);

/// Hautus test for detectability (Lemma-type eigenvector criterion on the
/// adjoint operator, scanning eigenvalues with real part >= -tol).
HautusResult hautus_detectability(const StochasticSystem& sys, double tol = 1e-8);

/// Hautus test for observability (scan over all eigenvalues).
HautusResult hautus_observability(const StochasticSystem& sys, double tol = 1e-8);

/// Semi-decidable stabilizability probe: runs the observability-Gramian
/// iteration with identity output on (A, B, N_i) and certifies the resulting
/// feedback. Non-convergence is a negative answer, not an exception.
StabilizabilityResult stabilizability_probe(const StochasticSystem& sys);

}  // namespace lqgbt
