#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace lqgbt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad user input (dimension mismatch, invalid argument). CLI exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problem exceeds the dense-matrix budget.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numerical kernel failed (eigensolver breakdown, singular Sylvester spectrum).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iteration exhausted its budget without meeting its tolerance. CLI exit code 4.
struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Truncation order conflicts with the singular-value gap rule. CLI exit code 3.
struct OrderSelectionError : std::runtime_error {
    int suggested_r;
    OrderSelectionError(const std::string& msg, int suggested) : std::runtime_error(msg), suggested_r(suggested) {}
};

/// Time stepping rejected the configured step size.
struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A quadrature or construction self-check failed its accuracy target.
struct AccuracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

/// Linear SDE with multiplicative noise:
///   dx = (A x + B u) dt + sum_i N_i x dW_i,   y = C x,
/// driven by a Wiener process with covariance E[W(t)W(t)^T] = K t.
struct StochasticSystem {
    Matrix A;                // n x n drift
    std::vector<Matrix> N;   // q noise couplings, each n x n
    Matrix B;                // n x m input map
    Matrix C;                // p x n output map
    Matrix K;                // q x q Wiener covariance

    StochasticSystem() = default;
    StochasticSystem(Matrix A_, std::vector<Matrix> N_, Matrix B_, Matrix C_, Matrix K_);

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Eigen::Index p() const { return C.rows(); }
    Eigen::Index q() const { return static_cast<Eigen::Index>(N.size()); }

    /// Throws InputError unless all dimensions are mutually consistent and K is
    /// symmetric PSD (symmetry to 1e-12 relative, eigenvalues >= -1e-12 * ||K||).
    void validate() const;

    /// Convenience constructor for 1-d systems with a single noise channel.
    static StochasticSystem scalar(double a, double n1, double b, double c, double k = 1.0);
};

}  // namespace lqgbt
