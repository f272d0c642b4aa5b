#include "lqgbt/operators.hpp"

#include "lqgbt/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <sstream>
#include <unsupported/Eigen/KroneckerProduct>

namespace lqgbt {

namespace {

void check_operand(const StochasticSystem& sys, const Matrix& X) {
    if (X.rows() != sys.n() || X.cols() != sys.n()) throw InputError("operand dimension does not match system");
}

constexpr int kMatricizeBudget = 150;

void check_budget(const StochasticSystem& sys) {
    if (sys.n() > kMatricizeBudget) {
        std::ostringstream os;
        os << "matricization budget exceeded: n = " << sys.n() << " > " << kMatricizeBudget;
        throw CapacityError(os.str());
    }
}

}  // namespace

Matrix apply_noise_operator(const StochasticSystem& sys, const Matrix& X, bool adjoint) {
    check_operand(sys, X);
    Matrix R = Matrix::Zero(sys.n(), sys.n());
    for (Eigen::Index i = 0; i < sys.q(); ++i) {
        for (Eigen::Index j = 0; j < sys.q(); ++j) {
            const double kij = sys.K(i, j);
            if (kij == 0.0) continue;
            if (adjoint)
                R.noalias() += kij * (sys.N[i] * X * sys.N[j].transpose());
            else
                R.noalias() += kij * (sys.N[i].transpose() * X * sys.N[j]);
        }
    }
    return symmetrize(R);
}

Matrix apply_operator(const StochasticSystem& sys, const Matrix& X, bool adjoint) {
    check_operand(sys, X);
    Matrix R;
    if (adjoint)
        R = sys.A * X + X * sys.A.transpose();
    else
        R = sys.A.transpose() * X + X * sys.A;
    R += apply_noise_operator(sys, X, adjoint);
    return symmetrize(R);
}

OperatorMatricization matricize(const StochasticSystem& sys, bool adjoint) {
    check_budget(sys);
    const Eigen::Index n = sys.n();
    const Matrix I = Matrix::Identity(n, n);
    Matrix M;
    if (adjoint) {
        M = Eigen::kroneckerProduct(I, sys.A) + Eigen::kroneckerProduct(sys.A, I);
        for (Eigen::Index i = 0; i < sys.q(); ++i)
            for (Eigen::Index j = 0; j < sys.q(); ++j)
                if (sys.K(i, j) != 0.0) M += sys.K(i, j) * Eigen::kroneckerProduct(sys.N[j], sys.N[i]);
    } else {
        M = Eigen::kroneckerProduct(I, sys.A.transpose()) + Eigen::kroneckerProduct(sys.A.transpose(), I);
        for (Eigen::Index i = 0; i < sys.q(); ++i)
            for (Eigen::Index j = 0; j < sys.q(); ++j)
                if (sys.K(i, j) != 0.0)
                    M += sys.K(i, j) * Eigen::kroneckerProduct(sys.N[j].transpose(), sys.N[i].transpose());
    }
    return OperatorMatricization{std::move(M), adjoint};
}

Vector svec(const Matrix& X) {
    const Eigen::Index n = X.rows();
    Vector v(n * (n + 1) / 2);
    const double s = std::sqrt(2.0);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        v[idx++] = X(j, j);
        for (Eigen::Index i = 0; i < j; ++i) v[idx++] = s * 0.5 * (X(i, j) + X(j, i));
    }
    return v;
}

Matrix unsvec(const Vector& v, Eigen::Index n) {
    Matrix X(n, n);
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        X(j, j) = v[idx++];
        for (Eigen::Index i = 0; i < j; ++i) {
            X(i, j) = s * v[idx];
            X(j, i) = s * v[idx];
            ++idx;
        }
    }
    return X;
}

Matrix matricize_symmetric(const StochasticSystem& sys, bool adjoint) {
    check_budget(sys);
    const Eigen::Index n = sys.n();
    const Eigen::Index ns = n * (n + 1) / 2;
    Matrix M(ns, ns);
    const double s = 1.0 / std::sqrt(2.0);
    Matrix E = Matrix::Zero(n, n);
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        E(j, j) = 1.0;
        M.col(col++) = svec(apply_operator(sys, E, adjoint));
        E(j, j) = 0.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            E(i, j) = s;
            E(j, i) = s;
            M.col(col++) = svec(apply_operator(sys, E, adjoint));
            E(i, j) = 0.0;
            E(j, i) = 0.0;
        }
    }
    return M;
}

SpectralCertificate mean_square_stability(const StochasticSystem& sys) {
    sys.validate();
    const Matrix M = matricize_symmetric(sys, /*adjoint=*/false);
    Eigen::RealSchur<Matrix> schur(M, /*computeU=*/false);
    if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition of the matricized operator failed");
    const Matrix& T = schur.matrixT();
    SpectralCertificate cert;
    cert.abscissa = -std::numeric_limits<double>::infinity();
    const Eigen::Index ns = T.rows();
    for (Eigen::Index k = 0; k < ns;) {
        if (k + 1 < ns && T(k + 1, k) != 0.0) {
            const double re = 0.5 * (T(k, k) + T(k + 1, k + 1));
            const double det = T(k, k) * T(k + 1, k + 1) - T(k, k + 1) * T(k + 1, k);
            const double disc = re * re - det;
            const double im = disc < 0.0 ? std::sqrt(-disc) : 0.0;
            if (re > cert.abscissa) {
                cert.abscissa = re;
                cert.witness_eigenvalue = {re, im};
            }
            k += 2;
        } else {
            if (T(k, k) > cert.abscissa) {
                cert.abscissa = T(k, k);
                cert.witness_eigenvalue = {T(k, k), 0.0};
            }
            k += 1;
        }
    }
    cert.stable = cert.abscissa < 0.0;
    return cert;
}

namespace {

struct Candidate {
    std::complex<double> lambda;
    Matrix V;  // symmetric, sign-normalized
};

// Sign-normalize so trace(V) >= 0; for traceless V use the largest-magnitude entry.
Matrix sign_normalize(Matrix V) {
    double t = V.trace();
    if (std::abs(t) < 1e-300) {
        Eigen::Index r = 0, c = 0;
        V.cwiseAbs().maxCoeff(&r, &c);
        t = V(r, c);
    }
    if (t < 0.0) V = -V;
    return V;
}

bool is_psd_witness(const Matrix& V, double tol) {
    const double scale = V.cwiseAbs().maxCoeff();
    if (scale < 1e-300) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(V, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (lmax <= 0.0) return false;
    return lmin >= -tol * lmax;
}

bool annihilated_by_C(const Matrix& C, const Matrix& V, double tol) {
    const double cv = (C * V).norm();
    return cv <= tol * std::max(C.norm() * V.norm(), 1e-300);
}

// Eigenvector scan of the adjoint operator on the symmetric subspace.
// scan_all = true checks every eigenvalue (observability), otherwise only
// Re(lambda) >= -tol (detectability). Eigenvalue clusters are treated as one
// eigenspace: each basis vector plus sampled convex combinations are tested,
// since a PSD element of a degenerate eigenspace need not be a basis vector.
HautusResult hautus_scan(const StochasticSystem& sys, double tol, bool scan_all) {
    sys.validate();
    const Eigen::Index n = sys.n();
    const Matrix M = matricize_symmetric(sys, /*adjoint=*/true);
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the adjoint matricization failed");
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    const Eigen::Index ns = vals.size();

    const double scale = std::max(vals.cwiseAbs().maxCoeff(), 1.0);
    const double cluster_tol = 1e-7 * scale;

    std::vector<Eigen::Index> order(ns);
    for (Eigen::Index i = 0; i < ns; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (vals[a].real() != vals[b].real()) return vals[a].real() < vals[b].real();
        return vals[a].imag() < vals[b].imag();
    });

    std::mt19937 rng(0x5eedu);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    HautusResult res;
    Eigen::Index pos = 0;
    while (pos < ns) {
        Eigen::Index end = pos + 1;
        while (end < ns && std::abs(vals[order[end]] - vals[order[pos]]) <= cluster_tol) ++end;

        const std::complex<double> lambda = vals[order[pos]];
        const bool in_scan_set = scan_all || lambda.real() >= -tol;
        if (in_scan_set) {
            std::vector<Matrix> basis;
            for (Eigen::Index t = pos; t < end; ++t) {
                Eigen::VectorXcd v = vecs.col(order[t]);
                // rotate the complex phase so the real part carries the mass
                Eigen::Index imax = 0;
                v.cwiseAbs().maxCoeff(&imax);
                const std::complex<double> phase = v[imax] / std::abs(v[imax]);
                v /= phase;
                const Matrix Vre = unsvec(v.real(), n);
                const Matrix Vim = unsvec(v.imag(), n);
                if (Vre.cwiseAbs().maxCoeff() > 1e-12) basis.push_back(sign_normalize(Vre));
                if (Vim.cwiseAbs().maxCoeff() > 1e-12) basis.push_back(sign_normalize(Vim));
            }
            std::vector<Matrix> candidates = basis;
            if (basis.size() > 1) {
                for (int s = 0; s < 17; ++s) {
                    Matrix comb = Matrix::Zero(n, n);
                    for (const auto& Bv : basis) comb += unif(rng) * Bv;
                    candidates.push_back(sign_normalize(comb));
                }
            }
            for (const auto& V : candidates) {
                if (is_psd_witness(V, tol) && annihilated_by_C(sys.C, V, tol)) {
                    res.holds = false;
                    res.witness_eigenvalue = lambda;
                    res.witness = V / V.norm();
                    return res;
                }
            }
        }
        pos = end;
    }
    return res;
}

}  // namespace

HautusResult hautus_detectability(const StochasticSystem& sys, double tol) {
    return hautus_scan(sys, tol, /*scan_all=*/false);
}

HautusResult hautus_observability(const StochasticSystem& sys, double tol) {
    return hautus_scan(sys, tol, /*scan_all=*/true);
}

StabilizabilityResult stabilizability_probe(const StochasticSystem& sys) {
    sys.validate();
    StabilizabilityResult res;
    StochasticSystem probe = sys;
    probe.C = Matrix::Identity(sys.n(), sys.n());
    try {
        SolverConfig cfg;
        cfg.tol = 1e-9;
        const auto gram = solve_observability_gramian(probe, cfg);
        res.gain = -(sys.B.transpose() * gram.Q);
        StochasticSystem closed = sys;
        closed.A = sys.A + sys.B * (*res.gain);
        res.closed_loop = mean_square_stability(closed);
        res.stabilizable = res.closed_loop.stable;
        if (!res.stabilizable) res.gain.reset();
    } catch (const NonConvergenceError&) {
        res.stabilizable = false;
    } catch (const NumericalError&) {
        res.stabilizable = false;
    }
    return res;
}

}  // namespace lqgbt
