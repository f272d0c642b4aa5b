#include "lqgbt/types.hpp"

#include <sstream>

namespace lqgbt {

StochasticSystem::StochasticSystem(Matrix A_, std::vector<Matrix> N_, Matrix B_, Matrix C_, Matrix K_)
    : A(std::move(A_)), N(std::move(N_)), B(std::move(B_)), C(std::move(C_)), K(std::move(K_)) {
    validate();
}

void StochasticSystem::validate() const {
    const Eigen::Index nn = A.rows();
    if (A.cols() != nn) throw InputError("A must be square");
    for (std::size_t i = 0; i < N.size(); ++i) {
        if (N[i].rows() != nn || N[i].cols() != nn) {
            std::ostringstream os;
            os << "N[" << i << "] must be " << nn << "x" << nn << ", got " << N[i].rows() << "x" << N[i].cols();
            throw InputError(os.str());
        }
    }
    if (B.rows() != nn) throw InputError("B must have n rows");
    if (C.cols() != nn) throw InputError("C must have n columns");
    const Eigen::Index qq = static_cast<Eigen::Index>(N.size());
    if (K.rows() != qq || K.cols() != qq) throw InputError("K must be q x q with q = number of noise matrices");
    if (qq > 0) {
        const double knorm = K.norm();
        if ((K - K.transpose()).norm() > 1e-12 * std::max(knorm, 1.0))
            throw InputError("K must be symmetric (to 1e-12 relative)");
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(K), Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of K failed");
        if (es.eigenvalues().minCoeff() < -1e-12 * std::max(knorm, 1.0))
            throw InputError("K must be positive semidefinite");
    }
}

StochasticSystem StochasticSystem::scalar(double a, double n1, double b, double c, double k) {
    Matrix A(1, 1), Nm(1, 1), B(1, 1), C(1, 1), K(1, 1);
    A << a;
    Nm << n1;
    B << b;
    C << c;
    K << k;
    return StochasticSystem(A, {Nm}, B, C, K);
}

}  // namespace lqgbt
