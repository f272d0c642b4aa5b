#include "lqgbt/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <limits>
#include <sstream>

namespace lqgbt {

namespace {

// Block boundaries of a real Schur form: 1x1 blocks and 2x2 blocks for
// complex conjugate pairs (nonzero subdiagonal entry).
std::vector<std::pair<Eigen::Index, Eigen::Index>> schur_blocks(const Matrix& T) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
    const Eigen::Index n = T.rows();
    Eigen::Index k = 0;
    while (k < n) {
        if (k + 1 < n && T(k + 1, k) != 0.0) {
            blocks.emplace_back(k, 2);
            k += 2;
        } else {
            blocks.emplace_back(k, 1);
            k += 1;
        }
    }
    return blocks;
}

std::complex<double> block_eigenvalue(const Matrix& T, Eigen::Index start, Eigen::Index w) {
    if (w == 1) return {T(start, start), 0.0};
    const double re = 0.5 * (T(start, start) + T(start + 1, start + 1));
    const double det = T(start, start) * T(start + 1, start + 1) - T(start, start + 1) * T(start + 1, start);
    const double disc = re * re - det;
    return {re, disc < 0.0 ? std::sqrt(-disc) : 0.0};
}

// Solves T^T Y + Y T = C in-place for real quasi-triangular T.
void solve_schur_sylvester(const Matrix& T, Matrix& C) {
    const auto blocks = schur_blocks(T);
    const Eigen::Index n = T.rows();
    Matrix Y = Matrix::Zero(n, n);
    for (std::size_t bj = 0; bj < blocks.size(); ++bj) {
        const auto [jc, wj] = blocks[bj];
        Matrix R = C.block(0, jc, n, wj);
        if (jc > 0) R.noalias() -= Y.leftCols(jc) * T.block(0, jc, jc, wj);
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            const auto [ic, wi] = blocks[bi];
            Matrix rhs = R.block(ic, 0, wi, wj);
            if (ic > 0) rhs.noalias() -= T.block(0, ic, ic, wi).transpose() * Y.block(0, jc, ic, wj);
            // small Sylvester T(I,I)^T Z + Z T(J,J) = rhs, size <= 2x2
            Matrix S = Matrix::Zero(wi * wj, wi * wj);
            const Matrix Tii = T.block(ic, ic, wi, wi);
            const Matrix Tjj = T.block(jc, jc, wj, wj);
            for (Eigen::Index c = 0; c < wj; ++c) S.block(c * wi, c * wi, wi, wi) += Tii.transpose();
            for (Eigen::Index c = 0; c < wj; ++c)
                for (Eigen::Index r = 0; r < wj; ++r) S.block(c * wi, r * wi, wi, wi).diagonal().array() += Tjj(r, c);
            Eigen::Map<Vector> rhs_vec(rhs.data(), wi * wj);
            Eigen::FullPivLU<Matrix> lu(S);
            const double tnorm = std::max(T.cwiseAbs().maxCoeff(), 1.0);
            if (!lu.isInvertible() || lu.rcond() < 1e-14 / tnorm) {
                std::ostringstream os;
                os << "near-singular Sylvester spectrum: eigenvalue pair " << block_eigenvalue(T, ic, wi) << " and "
                   << block_eigenvalue(T, jc, wj) << " sums to ~0";
                throw NumericalError(os.str());
            }
            Vector z = lu.solve(rhs_vec);
            Y.block(ic, jc, wi, wj) = Eigen::Map<Matrix>(z.data(), wi, wj);
        }
    }
    C = Y;
}

}  // namespace

Matrix solve_lyapunov(const Matrix& A, const Matrix& W, double rel_tol) {
    if (A.rows() != A.cols()) throw InputError("A must be square");
    if (W.rows() != A.rows() || W.cols() != A.rows()) throw InputError("W must match A");
    const double wnorm = W.norm();
    if (wnorm == 0.0) return Matrix::Zero(A.rows(), A.cols());

    Eigen::RealSchur<Matrix> schur(A);
    if (schur.info() != Eigen::Success) throw NumericalError("real Schur decomposition failed");
    const Matrix& U = schur.matrixU();
    const Matrix& T = schur.matrixT();

    Matrix X = Matrix::Zero(A.rows(), A.cols());
    Matrix R = -W;
    for (int pass = 0; pass < 3; ++pass) {
        Matrix Chat = U.transpose() * R * U;
        solve_schur_sylvester(T, Chat);
        X += U * Chat * U.transpose();
        X = symmetrize(X);
        R = -(A.transpose() * X + X * A + W);
        if (R.norm() <= rel_tol * wnorm) return X;
    }
    std::ostringstream os;
    os << "Lyapunov residual " << R.norm() << " above " << rel_tol * wnorm << " after refinement";
    throw NumericalError(os.str());
}

Matrix solve_generalized_lyapunov(const StochasticSystem& sys, const Matrix& W, const SolverConfig& cfg) {
    sys.validate();
    if (W.rows() != sys.n() || W.cols() != sys.n()) throw InputError("W must be n x n");
    const auto cert = mean_square_stability(sys);
    if (!cert.stable) {
        std::ostringstream os;
        os << "(A, N_i) is not mean-square stable (abscissa " << cert.abscissa << ")";
        throw InputError(os.str());
    }
    const double wnorm = std::max(W.norm(), 1e-300);
    const auto residual_of = [&](const Matrix& X) {
        return (sys.A.transpose() * X + X * sys.A + apply_noise_operator(sys, X, false) + W).norm();
    };

    Matrix X = Matrix::Zero(sys.n(), sys.n());
    double prev_res = std::numeric_limits<double>::infinity();
    int stalled = 0;
    const int budget = std::max(cfg.max_outer, 20);
    for (int k = 0; k < budget; ++k) {
        X = solve_lyapunov(sys.A, apply_noise_operator(sys, X, false) + W);
        const double res = residual_of(X);
        if (res <= cfg.tol * wnorm) return symmetrize(X);
        stalled = (res > 0.9 * prev_res) ? stalled + 1 : 0;
        prev_res = res;
        if (stalled >= 5) break;  // contraction too slow, use the dense solve
    }

    // Dense fallback on the symmetric subspace.
    const Matrix M = matricize_symmetric(sys, /*adjoint=*/false);
    Eigen::PartialPivLU<Matrix> lu(M);
    X = unsvec(lu.solve(Vector(-svec(W))), sys.n());
    const double res = residual_of(X);
    if (res > cfg.tol * wnorm) {
        std::ostringstream os;
        os << "generalized Lyapunov solve stalled: residual " << res << " vs tolerance " << cfg.tol * wnorm;
        throw NonConvergenceError(os.str());
    }
    return symmetrize(X);
}

namespace {

lapack_logical select_left_half_plane(const double* re, const double* /*im*/) { return *re < 0.0 ? 1 : 0; }

bool is_hurwitz(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in Hurwitz check");
    return es.eigenvalues().real().maxCoeff() < 0.0;
}

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& W, const Matrix& X) {
    return (A.transpose() * X + X * A + W - X * B * B.transpose() * X).norm();
}

}  // namespace

Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& W) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw InputError("A must be square");
    if (B.rows() != n) throw InputError("B must have n rows");
    if (W.rows() != n || W.cols() != n) throw InputError("W must be n x n");
    const double tol_scale = std::max(W.norm(), 1.0);

    if (B.norm() == 0.0 || W.norm() == 0.0) {
        if (is_hurwitz(A)) return B.norm() == 0.0 ? solve_lyapunov(A, W) : Matrix::Zero(n, n);
        if (B.norm() == 0.0) throw NumericalError("no stabilizing solution: B = 0 and A is not Hurwitz");
    }

    const Matrix G = B * B.transpose();
    Matrix H(2 * n, 2 * n);
    H << A, -G, -W, -A.transpose();

    Matrix vs(2 * n, 2 * n);
    Vector wr(2 * n), wi(2 * n);
    lapack_int sdim = 0;
    Matrix Hc = H;  // dgees overwrites
    const lapack_int info =
        LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select_left_half_plane, static_cast<lapack_int>(2 * n), Hc.data(),
                      static_cast<lapack_int>(2 * n), &sdim, wr.data(), wi.data(), vs.data(),
                      static_cast<lapack_int>(2 * n));
    if (info != 0 || sdim != static_cast<lapack_int>(n))
        throw NumericalError("stabilizing invariant subspace not found (Hamiltonian ordered Schur)");

    const Matrix Q11 = vs.block(0, 0, n, n);
    const Matrix Q21 = vs.block(n, 0, n, n);
    Eigen::FullPivLU<Matrix> lu(Q11.transpose());
    if (!lu.isInvertible()) throw NumericalError("stabilizing invariant subspace not found (singular basis)");
    Matrix X = symmetrize(lu.solve(Q21.transpose()));

    // One Newton (Kleinman) refinement step; keep it only if it helps.
    const Matrix Acl = A - G * X;
    if (is_hurwitz(Acl)) {
        try {
            const Matrix Xn = solve_lyapunov(Acl, Matrix(W + X * G * X));
            if (riccati_residual(A, B, W, Xn) < riccati_residual(A, B, W, X)) X = Xn;
        } catch (const NumericalError&) {
            // keep the Schur solution
        }
    }

    const double res = riccati_residual(A, B, W, X);
    if (res > 1e-10 * tol_scale) {
        std::ostringstream os;
        os << "Riccati residual " << res << " above tolerance " << 1e-10 * tol_scale;
        throw NumericalError(os.str());
    }
    if (!is_hurwitz(A - G * X)) throw NumericalError("Riccati solution is not stabilizing (closed loop not Hurwitz)");
    return X;
}

ObservabilityGramianResult solve_observability_gramian(const StochasticSystem& sys, const SolverConfig& cfg) {
    sys.validate();
    const Matrix CtC = sys.C.transpose() * sys.C;
    const double cscale = CtC.norm();

    ObservabilityGramianResult out;
    if (cscale == 0.0) {
        const auto cert = mean_square_stability(sys);
        if (cert.stable) {
            out.Q = Matrix::Zero(sys.n(), sys.n());
            out.closed_loop = cert;
            return out;
        }
    }

    const auto residual_of = [&](const Matrix& Q) {
        return (sys.A.transpose() * Q + Q * sys.A + apply_noise_operator(sys, Q, false) + CtC -
                Q * sys.B * sys.B.transpose() * Q)
            .norm();
    };

    Matrix Q = Matrix::Identity(sys.n(), sys.n());
    double res = residual_of(Q);
    int grew = 0;
    bool converged = false;
    for (int k = 1; k <= cfg.max_outer; ++k) {
        Matrix W = symmetrize(CtC + apply_noise_operator(sys, Q, false));
        Matrix Qn;
        try {
            Qn = solve_riccati(sys.A, sys.B, W);
        } catch (const NumericalError& e) {
            throw NonConvergenceError(std::string("inner Riccati solve failed: ") + e.what());
        }
        const double delta = (Qn - Q).norm();
        const double res_n = residual_of(Qn);
        grew = (res_n > res * (1.0 + 1e-12)) ? grew + 1 : 0;
        if (grew >= 5) {
            std::ostringstream os;
            os << "observability Gramian iteration diverging: residual " << res_n << " after " << k << " iterations";
            throw NonConvergenceError(os.str());
        }
        Q = Qn;
        res = res_n;
        out.iterations = k;
        if (delta <= cfg.tol * std::max(Q.norm(), 1e-300)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "observability Gramian iteration did not converge in " << cfg.max_outer
           << " iterations (last residual " << res << ")";
        throw NonConvergenceError(os.str());
    }

    out.Q = symmetrize(Q);
    out.residual = residual_of(out.Q);
    // machine-accuracy escape keeps the relative check meaningful when C^T C is tiny
    const double eq_scale = cscale + out.Q.norm() * (2.0 * sys.A.norm() + sys.B.norm() * sys.B.norm() * out.Q.norm());
    if (out.residual > 10.0 * cfg.tol * std::max(cscale, 1e-300) && out.residual > 1e-13 * eq_scale) {
        std::ostringstream os;
        os << "observability Gramian residual " << out.residual << " above acceptance threshold";
        throw NonConvergenceError(os.str());
    }

    StochasticSystem closed = sys;
    closed.A = sys.A - sys.B * sys.B.transpose() * out.Q;
    out.closed_loop = mean_square_stability(closed);
    if (!out.closed_loop.stable) {
        std::ostringstream os;
        os << "converged Q is not stabilizing (closed-loop abscissa " << out.closed_loop.abscissa << ")";
        throw NonConvergenceError(os.str());
    }
    return out;
}

namespace {

Matrix clip_psd(const Matrix& X, double floor_eig) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in PSD projection");
    Vector lam = es.eigenvalues().cwiseMax(floor_eig);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Matrix spd_inverse(const Matrix& X) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in SPD inverse");
    if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("matrix not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

struct LmiPoint {
    double value;  // lambda_max
    Vector v;      // top eigenvector
};

// lambda_max and top eigenvector of the lifted LMI block
//   [ A^T X + X A + Pi_N(X) - C^T C   X B ]
//   [ B^T X                           -I  ]
// (with_input = false drops the B row/column).
LmiPoint lmi_eval(const StochasticSystem& sys, const Matrix& X, const Matrix& CtC, bool with_input) {
    const Eigen::Index n = sys.n();
    const Eigen::Index m = with_input ? sys.m() : 0;
    Matrix F = Matrix::Zero(n + m, n + m);
    F.topLeftCorner(n, n) =
        symmetrize(sys.A.transpose() * X + X * sys.A) + apply_noise_operator(sys, X, false) - CtC;
    if (m > 0) {
        F.topRightCorner(n, m) = X * sys.B;
        F.bottomLeftCorner(m, n) = F.topRightCorner(n, m).transpose();
        F.bottomRightCorner(m, m) = -Matrix::Identity(m, m);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(F);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in LMI evaluation");
    Eigen::Index imax = 0;
    es.eigenvalues().maxCoeff(&imax);
    return {es.eigenvalues()[imax], es.eigenvectors().col(imax)};
}

Matrix lmi_subgradient(const StochasticSystem& sys, const Vector& v, bool with_input) {
    const Eigen::Index n = sys.n();
    const Vector v1 = v.head(n);
    const Matrix V1 = v1 * v1.transpose();
    Matrix G = sys.A * V1 + V1 * sys.A.transpose() + apply_noise_operator(sys, V1, true);
    if (with_input && sys.m() > 0) {
        const Vector v2 = v.tail(sys.m());
        G += sys.B * v2 * v1.transpose() + v1 * (sys.B * v2).transpose();
    }
    return symmetrize(G);
}

constexpr double kEigFloor = 1e-8;  // keeps X invertible so P = X^{-1} exists

// Projected subgradient descent on lambda_max of the affine LMI image over
// {X >= kEigFloor * I}. Polyak-type steps against an adaptive level.
Matrix lmi_subgradient_solve(const StochasticSystem& sys, const SolverConfig& cfg, bool with_input, int* iterations) {
    const Eigen::Index n = sys.n();
    const Matrix CtC = sys.C.transpose() * sys.C;

    Matrix X;
    double f = std::numeric_limits<double>::infinity();
    for (double c : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
        Matrix cand = c * Matrix::Identity(n, n);
        const double fc = lmi_eval(sys, cand, CtC, with_input).value;
        if (fc < f) {
            f = fc;
            X = cand;
        }
    }

    Matrix X_best = X;
    double f_best = f;
    const double scale0 = std::max({CtC.norm(), sys.A.norm(), 1.0});
    double level_gap = std::max(0.1 * scale0, 10.0 * cfg.lmi_margin);
    int since_improve = 0;
    const long max_steps = 600L * std::max(cfg.max_outer, 1);

    for (long k = 0; k < max_steps; ++k) {
        const LmiPoint pt = lmi_eval(sys, X, CtC, with_input);
        if (pt.value < f_best) {
            f_best = pt.value;
            X_best = X;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (f_best <= -cfg.lmi_margin) {
            if (iterations) *iterations = static_cast<int>(std::min<long>(k + 1, std::numeric_limits<int>::max()));
            return X_best;
        }
        if (since_improve >= 60) {
            level_gap *= 0.5;
            X = X_best;
            since_improve = 0;
            if (level_gap < cfg.lmi_margin * 0.5) level_gap = cfg.lmi_margin * 0.5;
            continue;
        }
        const Matrix G = lmi_subgradient(sys, pt.v, with_input);
        const double gnorm2 = std::max(G.squaredNorm(), 1e-300);
        const double step = (pt.value - (f_best - level_gap)) / gnorm2;
        X = clip_psd(X - step * G, kEigFloor);
    }
    std::ostringstream os;
    os << "LMI feasibility search did not reach lambda_max <= " << -cfg.lmi_margin << " in " << max_steps
       << " steps (best " << f_best << "); dual stabilizability of (A^T, C^T, N_i^T) may fail";
    throw NonConvergenceError(os.str());
}

}  // namespace

double reachability_margin(const StochasticSystem& sys, const Matrix& X) {
    const Matrix CtC = sys.C.transpose() * sys.C;
    const Matrix R = symmetrize(sys.A.transpose() * X + X * sys.A) + apply_noise_operator(sys, X, false) - CtC +
                     X * sys.B * sys.B.transpose() * X;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(R), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in margin evaluation");
    return es.eigenvalues().maxCoeff();
}

ReachabilityGramianResult ingest_reachability_solution(const StochasticSystem& sys, const Matrix& X,
                                                       const SolverConfig& /*cfg*/) {
    if (X.rows() != sys.n() || X.cols() != sys.n()) throw InputError("X must be n x n");
    if ((X - X.transpose()).norm() > 1e-10 * std::max(X.norm(), 1.0))
        throw InputError("external X = P^{-1} is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) throw InputError("external X = P^{-1} is not positive definite");
    ReachabilityGramianResult out;
    out.X = symmetrize(X);
    out.margin = reachability_margin(sys, out.X);
    if (out.margin > 1e-8) {
        std::ostringstream os;
        os << "external X = P^{-1} is infeasible: margin " << out.margin << " > 1e-8";
        throw InputError(os.str());
    }
    out.P = spd_inverse(out.X);
    out.strategy = ReachabilityStrategy::ExternalSdp;
    return out;
}

std::string to_string(ReachabilityStrategy s) {
    switch (s) {
        case ReachabilityStrategy::SubgradientFeasibility: return "subgradient_feasibility";
        case ReachabilityStrategy::ConstructiveEpsilon: return "constructive_epsilon";
        case ReachabilityStrategy::ExternalSdp: return "external_sdp";
    }
    return "unknown";
}

ReachabilityStrategy reachability_strategy_from_string(const std::string& s) {
    if (s == "subgradient_feasibility") return ReachabilityStrategy::SubgradientFeasibility;
    if (s == "constructive_epsilon") return ReachabilityStrategy::ConstructiveEpsilon;
    if (s == "external_sdp") return ReachabilityStrategy::ExternalSdp;
    throw InputError("unknown reachability strategy: " + s);
}

ReachabilityGramianResult solve_reachability_gramian(const StochasticSystem& sys, const SolverConfig& cfg,
                                                     ReachabilityStrategy strategy, const std::string& exchange_dir) {
    sys.validate();
    ReachabilityGramianResult out;
    out.strategy = strategy;

    if (strategy == ReachabilityStrategy::ExternalSdp)
        throw InputError("external_sdp exchange requires file I/O; use the gramians CLI command or "
                         "ingest_reachability_solution with " +
                         (exchange_dir.empty() ? std::string("an exchange directory") : exchange_dir));

    {
        StochasticSystem dual = sys;
        dual.A = sys.A.transpose();
        dual.B = sys.C.transpose();
        dual.C = sys.B.transpose();
        for (auto& Ni : dual.N) Ni = Matrix(Ni.transpose());
        out.dual_probe_ok = stabilizability_probe(dual).stabilizable;
    }

    const Matrix CtC = sys.C.transpose() * sys.C;
    if (strategy == ReachabilityStrategy::SubgradientFeasibility) {
        Matrix X = lmi_subgradient_solve(sys, cfg, /*with_input=*/true, &out.iterations);
        out.X = X;
        out.schur_value = lmi_eval(sys, X, CtC, true).value;
    } else {
        Matrix X = lmi_subgradient_solve(sys, cfg, /*with_input=*/false, &out.iterations);
        const Matrix Y = -(symmetrize(sys.A.transpose() * X + X * sys.A) + apply_noise_operator(sys, X, false) - CtC);
        Eigen::SelfAdjointEigenSolver<Matrix> esY(symmetrize(Y), Eigen::EigenvaluesOnly);
        const double ymin = esY.eigenvalues().minCoeff();
        if (ymin <= 0.0) throw NumericalError("constructive epsilon scaling failed: Y is not positive definite");
        const Matrix XGX = X * sys.B * sys.B.transpose() * X;
        Eigen::SelfAdjointEigenSolver<Matrix> esG(symmetrize(XGX), Eigen::EigenvaluesOnly);
        const double gmax = esG.eigenvalues().maxCoeff();
        const double eps = gmax <= 0.0 ? 1.0 : std::min(1.0, (1.0 - 1e-6) * ymin / gmax);
        out.X = eps * X;
        out.schur_value = lmi_eval(sys, out.X, CtC, true).value;
    }

    out.margin = reachability_margin(sys, out.X);
    if (out.margin > 1e-8) {
        std::ostringstream os;
        os << "reachability Gramian margin " << out.margin << " above 1e-8 after feasibility search";
        throw NonConvergenceError(os.str());
    }
    out.P = spd_inverse(out.X);
    return out;
}

GramianPair compute_gramian_pair(const StochasticSystem& sys, const SolverConfig& cfg, ReachabilityStrategy strategy,
                                 const std::string& exchange_dir) {
    const auto og = solve_observability_gramian(sys, cfg);
    const auto rg = solve_reachability_gramian(sys, cfg, strategy, exchange_dir);
    GramianPair pair;
    pair.P = rg.P;
    pair.Q = og.Q;
    pair.q_residual = og.residual;
    pair.p_margin = rg.margin;
    pair.iterations = og.iterations + rg.iterations;
    pair.closed_loop_certificate = og.closed_loop;
    return pair;
}

}  // namespace lqgbt
