#include "lqgbt/balancing.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace lqgbt {

namespace {

void check_spd(const Matrix& M, const char* name) {
    if (M.rows() != M.cols()) throw InputError(std::string(name) + " must be square");
    if ((M - M.transpose()).norm() > 1e-10 * std::max(M.norm(), 1.0))
        throw InputError(std::string(name) + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in SPD check");
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 1e-12 * std::max(lmax, 0.0)) {
        std::ostringstream os;
        os << name << " is singular beyond threshold (lambda_min " << lmin << ", lambda_max " << lmax
           << "); the observability assumption is violated";
        throw InputError(os.str());
    }
}

}  // namespace

double tail_coefficient(const Vector& sigma, int r) {
    double s = 0.0;
    for (Eigen::Index k = sigma.size() - 1; k >= r; --k) s += sigma[k] / std::sqrt(1.0 + sigma[k] * sigma[k]);
    return 2.0 * s;
}

BalancedRealization balance(const StochasticSystem& sys, const Matrix& P, const Matrix& Q) {
    sys.validate();
    if (P.rows() != sys.n() || Q.rows() != sys.n()) throw InputError("Gramian dimensions must match the system");
    check_spd(P, "P");
    check_spd(Q, "Q");

    Eigen::LLT<Matrix> llt(symmetrize(P));
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky factorization of P failed");
    const Matrix L = llt.matrixL();

    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(L.transpose() * Q * L));
    if (es.info() != Eigen::Success) throw NumericalError("spectral factorization of L^T Q L failed");

    const Eigen::Index n = sys.n();
    BalancedRealization bal;
    bal.sigma.resize(n);
    Matrix U(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {  // descending order
        const double ev = es.eigenvalues()[n - 1 - k];
        if (ev <= 1e-14 * es.eigenvalues().maxCoeff())
            throw InputError("singular value below 1e-14 * sigma_1: observability assumption violated");
        bal.sigma[k] = std::sqrt(ev);
        U.col(k) = es.eigenvectors().col(n - 1 - k);
    }

    const Vector shalf = bal.sigma.cwiseSqrt();
    // S_b = Sigma^{1/2} U^T L^{-1},  S_b^{-1} = L U Sigma^{-1/2}
    bal.S_b = shalf.asDiagonal() * U.transpose() *
              L.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    bal.S_b_inv = L * U * shalf.cwiseInverse().asDiagonal();

    bal.A_n = bal.S_b * sys.A * bal.S_b_inv;
    bal.B_n = bal.S_b * sys.B;
    bal.C_n = sys.C * bal.S_b_inv;
    bal.N_n.reserve(sys.N.size());
    for (const auto& Ni : sys.N) bal.N_n.push_back(bal.S_b * Ni * bal.S_b_inv);
    bal.K = sys.K;
    return bal;
}

ReducedModel truncate(const BalancedRealization& bal, int r, double gap_tol) {
    const int n = static_cast<int>(bal.sigma.size());
    if (r < 1 || r > n) throw InputError("truncation order must satisfy 1 <= r <= n");
    if (r < n) {
        const double gap = bal.sigma[r - 1] - bal.sigma[r];
        if (gap <= gap_tol * bal.sigma[0]) {
            int suggestion = r;
            while (suggestion < n && bal.sigma[suggestion - 1] - bal.sigma[suggestion] <= gap_tol * bal.sigma[0])
                ++suggestion;
            std::ostringstream os;
            os << "singular-value gap at r = " << r << " is " << gap << " <= " << gap_tol * bal.sigma[0]
               << "; nearest admissible order is r = " << suggestion;
            throw OrderSelectionError(os.str(), suggestion);
        }
    }

    ReducedModel red;
    red.r = r;
    red.A_r = bal.A_n.topLeftCorner(r, r);
    red.B_r = bal.B_n.topRows(r);
    red.C_r = bal.C_n.leftCols(r);
    red.N_r.reserve(bal.N_n.size());
    for (const auto& Ni : bal.N_n) red.N_r.push_back(Ni.topLeftCorner(r, r));
    red.K = bal.K;
    red.sigma_r = bal.sigma.head(r);
    red.lift = bal.S_b_inv.leftCols(r);
    red.restrict_ = bal.S_b.topRows(r);
    return red;
}

OrderSelection choose_order(const Vector& sigma, double rel_tol, double gap_tol) {
    const int n = static_cast<int>(sigma.size());
    if (n == 0) throw InputError("sigma must be nonempty");
    for (int k = 1; k < n; ++k)
        if (sigma[k] > sigma[k - 1] || sigma[k] <= 0.0) throw InputError("sigma must be positive and non-increasing");

    OrderSelection sel;
    sel.r = n;
    for (int r = 1; r <= n; ++r) {
        if (tail_coefficient(sigma, r) > rel_tol) continue;
        int rr = r;
        while (rr < n && sigma[rr - 1] - sigma[rr] <= gap_tol * sigma[0]) ++rr;
        sel.r = rr;
        break;
    }
    sel.gap_warning = (sel.r == n && n > 1);  // no admissible r < n
    sel.tail_coefficient = tail_coefficient(sigma, sel.r);
    return sel;
}

}  // namespace lqgbt
