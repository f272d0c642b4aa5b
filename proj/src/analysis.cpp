#include "lqgbt/analysis.hpp"

#include "lqgbt/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqgbt {

namespace {

void check_order(const Vector& sigma, int r) {
    if (r < 0 || r > sigma.size()) throw InputError("order r out of range");
}

}  // namespace

double apriori_bound_finite(const Vector& sigma, int r, double cost_J_T, double terminal_energy) {
    check_order(sigma, r);
    if (cost_J_T < 0.0 || terminal_energy < 0.0) throw InputError("energies must be nonnegative");
    return tail_coefficient(sigma, r) * std::sqrt(cost_J_T + terminal_energy);
}

double apriori_bound_infinite(const Vector& sigma, int r, double l2_pair_norm) {
    check_order(sigma, r);
    if (l2_pair_norm < 0.0) throw InputError("norms must be nonnegative");
    return tail_coefficient(sigma, r) * l2_pair_norm;
}

double feedback_bound(const Vector& sigma, int r, double norm_u1) {
    check_order(sigma, r);
    if (norm_u1 < 0.0) throw InputError("norms must be nonnegative");
    return tail_coefficient(sigma, r) * norm_u1;
}

double open_loop_bound(double gamma, double apriori) {
    if (gamma < 0.0 || apriori < 0.0) throw InputError("inputs must be nonnegative");
    return (1.0 + gamma) * apriori;
}

double weighted_bound(const Vector& sigma, int r, double weighted_input_norm) {
    check_order(sigma, r);
    if (weighted_input_norm < 0.0) throw InputError("norms must be nonnegative");
    double tail = 0.0;
    for (Eigen::Index k = sigma.size() - 1; k >= r; --k) tail += sigma[k];
    return 2.0 * tail * weighted_input_norm;
}

double weighted_gain(const Matrix& M, const Matrix& SPD) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(SPD));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in weighted gain");
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
        throw InputError("weight matrix must be positive semidefinite");
    const Matrix half = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
    const Matrix S = half * M.transpose() * M * half;  // (M * SPD^{1/2})^T (M * SPD^{1/2}) has the same spectrum
    Eigen::SelfAdjointEigenSolver<Matrix> es2(symmetrize(S), Eigen::EigenvaluesOnly);
    return std::max(0.0, es2.eigenvalues().maxCoeff());
}

std::pair<Vector, Matrix> ordered_eigendecomposition(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    const Eigen::Index n = S.rows();
    Vector lam(n);
    Matrix V(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        lam[k] = es.eigenvalues()[n - 1 - k];
        Vector v = es.eigenvectors().col(n - 1 - k);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        V.col(k) = v;
    }
    return {lam, V};
}

GammaEstimate gamma_T(const ReducedModel& red, double T, GammaMethod method, const SimulationConfig& grid_cfg) {
    GammaEstimate out;
    if (method == GammaMethod::WorstCase) {
        if (!std::isfinite(T) || T <= 0.0) throw InputError("worst-case gamma_T needs finite positive T");
        const double br = weighted_gain(red.B_r.transpose(), Matrix(red.sigma_r.asDiagonal()));
        out.value = std::exp(br * T);
        out.horizon_used = T;
        return out;
    }

    const StochasticSystem rsys = red.system();
    double horizon = T;
    if (!std::isfinite(T)) {
        const auto cert = mean_square_stability(rsys);
        if (!cert.stable)
            throw InputError("operator-norm gamma with T = inf needs a mean-square stable reduced model");
        horizon = std::log(1e8) / std::max(-cert.abscissa, 1e-8);
    }
    const double dt = grid_cfg.dt;
    const int M = std::max(2, static_cast<int>(std::llround(horizon / dt)));

    const Eigen::Index r = rsys.n();
    const Eigen::Index m = rsys.m();
    const Eigen::Index ns = r * (r + 1) / 2;
    const Matrix CtC = rsys.C.transpose() * rsys.C;

    // Lambda(t): adjoint state of the second moment, integrated backwards;
    // independent of the input, so computed once.
    Matrix Mop = matricize_symmetric(rsys, /*adjoint=*/false);
    Eigen::PartialPivLU<Matrix> luL(Matrix::Identity(ns, ns) - 0.5 * dt * Mop);
    std::vector<Vector> Lam(M + 1);  // indexed by time node, Lam[M] = 0
    Lam[M] = Vector::Zero(ns);
    const Vector src = svec(CtC);
    for (int k = M; k > 0; --k) Lam[k - 1] = luL.solve(Lam[k] + 0.5 * dt * (Mop * Lam[k]) + dt * src);

    Eigen::PartialPivLU<Matrix> luA(Matrix::Identity(r, r) - 0.5 * dt * rsys.A);
    Eigen::PartialPivLU<Matrix> luAT(Matrix::Identity(r, r) - 0.5 * dt * rsys.A.transpose());

    const auto trapz_dot = [&](const std::vector<Vector>& a, const std::vector<Vector>& b) {
        double s = 0.0;
        for (int k = 0; k <= M; ++k) {
            const double w = (k == 0 || k == M) ? 0.5 : 1.0;
            s += w * dt * a[k].dot(b[k]);
        }
        return s;
    };

    // K u = B^T Lambda m + 0.5 B^T lambda, assembled from one forward mean
    // sweep and one backward adjoint sweep.
    const auto apply_K = [&](const std::vector<Vector>& u) {
        std::vector<Vector> mve(M + 1, Vector::Zero(r));
        for (int k = 0; k < M; ++k) {
            const Vector u_mid = 0.5 * (u[k] + u[k + 1]);
            mve[k + 1] = luA.solve(mve[k] + 0.5 * dt * (rsys.A * mve[k]) + dt * (rsys.B * u_mid));
        }
        std::vector<Vector> lam(M + 1, Vector::Zero(r));
        for (int k = M; k > 0; --k) {
            const Vector u_mid = 0.5 * (u[k] + u[k - 1]);
            const Matrix Lmid = 0.5 * (unsvec(Lam[k], r) + unsvec(Lam[k - 1], r));
            const Vector m_mid = 0.5 * (mve[k] + mve[k - 1]);
            lam[k - 1] = luAT.solve(lam[k] + 0.5 * dt * (rsys.A.transpose() * lam[k]) + dt * (2.0 * Lmid * (rsys.B * u_mid)));
        }
        std::vector<Vector> v(M + 1);
        for (int k = 0; k <= M; ++k) v[k] = rsys.B.transpose() * (unsvec(Lam[k], r) * mve[k] + 0.5 * lam[k]);
        return v;
    };

    std::vector<Vector> u(M + 1, Vector::Zero(m));
    Philox g(0, /*stream=*/7, 0);
    for (auto& uk : u)
        for (Eigen::Index i = 0; i < m; ++i) uk[i] = g.normal();
    double nrm = std::sqrt(trapz_dot(u, u));
    for (auto& uk : u) uk /= nrm;

    double rq = 0.0, rq_prev = -1.0;
    int it = 0;
    for (; it < 200; ++it) {
        const auto v = apply_K(u);
        rq = trapz_dot(u, v);
        if (rq <= 0.0) break;
        nrm = std::sqrt(trapz_dot(v, v));
        if (nrm <= 0.0) break;
        std::vector<Vector> un(M + 1);
        for (int k = 0; k <= M; ++k) un[k] = v[k] / nrm;
        u = std::move(un);
        if (std::abs(rq - rq_prev) <= 1e-8 * std::max(rq, 1e-300)) break;
        rq_prev = rq;
    }
    out.value = std::sqrt(std::max(rq, 0.0));
    out.dt_used = dt;
    out.horizon_used = horizon;
    out.iterations = it + 1;
    return out;
}

ErrorBoundReport make_error_bound_report(const Vector& sigma, int r, const StochasticSystem& sys, const Matrix& P,
                                         const Matrix& Q, const ReducedModel& red, double gamma_value, double T) {
    check_order(sigma, r);
    ErrorBoundReport rep;
    rep.r = r;
    rep.tail_coefficient = tail_coefficient(sigma, r);
    rep.hat_sigma.resize(sigma.size());
    for (Eigen::Index k = 0; k < sigma.size(); ++k)
        rep.hat_sigma[k] = sigma[k] / std::sqrt(1.0 + sigma[k] * sigma[k]);
    rep.plain_tail = 0.0;
    for (Eigen::Index k = sigma.size() - 1; k >= r; --k) rep.plain_tail += sigma[k];
    rep.plain_tail *= 2.0;
    rep.b = weighted_gain(sys.B.transpose(), Q);
    rep.beta = std::max(rep.b, weighted_gain(sys.C, P));
    rep.b_r = weighted_gain(red.B_r.transpose(), Matrix(red.sigma_r.asDiagonal()));
    rep.gamma_T = gamma_value;
    rep.T = T;
    return rep;
}

EnergyEstimateReport energy_estimate_check(const StochasticSystem& sys, const Matrix& P, const Matrix& Q, int index,
                                           double T, const SimulationConfig& sim_cfg, const TimeSignal& test_input) {
    sys.validate();
    if (index < 0 || index >= sys.n()) throw InputError("eigenindex out of range");
    const auto [lamP, VP] = ordered_eigendecomposition(P);
    const auto [lamQ, VQ] = ordered_eigendecomposition(Q);

    EnergyEstimateReport rep;
    rep.index = index;
    rep.lambda_P = lamP[index];
    rep.lambda_Q = lamQ[index];
    const Vector p_i = VP.col(index);
    const Vector q_i = VQ.col(index);

    // (a) open loop from x0 = 0 under the test input
    {
        SimulationConfig cfg = sim_cfg;
        cfg.T = T;
        cfg.x0 = InitialState::zero(sys.n());
        std::vector<QuadraticObservable> obs{{"coefficient", p_i * p_i.transpose(), 0.0}};
        const auto traj = propagate_moments(sys, ControlSpec::open_loop(test_input), cfg, obs);
        rep.coefficient_sup = traj.observables[0].maxCoeff();
        rep.cost_J = traj.cost_integral;
        rep.part_a_ok = rep.coefficient_sup <= rep.lambda_P * rep.cost_J * (1.0 + 1e-8) + 1e-14;
    }

    // (b) closed loop from x0 = q_i with u_F = -B^T Q x; J_infty equals lambda_{Q,i}
    {
        const Matrix F = -(sys.B.transpose() * Q);
        const double tr0 = 1.0;  // ||q_i|| = 1
        Vector m = q_i;
        Matrix X = q_i * q_i.transpose();
        double t = 0.0, J = 0.0, dt = sim_cfg.dt;
        const double t_cap = 1e5;
        while (t < t_cap) {
            SimulationConfig seg;
            seg.dt = dt;
            seg.T = std::max(200.0 * dt, 1.0);
            seg.x0 = InitialState::zero(sys.n());  // unused by the _from variant
            const double tr_start = X.trace();
            const auto traj = propagate_moments_from(sys, ControlSpec::feedback(F), seg, m, X, {}, /*stride=*/1 << 30);
            J += traj.cost_integral;
            m = traj.final_mean;
            X = traj.final_second_moment;
            t += seg.T;
            const double tr_now = X.trace();
            if (tr_now <= 1e-10 * tr0) break;
            // double the step once the segment shows clean geometric decay
            if (tr_now < 0.25 * tr_start) {
                const double rate = std::log(tr_start / std::max(tr_now, 1e-300)) / seg.T;
                dt = std::min(2.0 * dt, 0.01 / std::max(rate, 1e-3));
            }
        }
        rep.horizon_used = t;
        rep.closed_loop_cost = J;
        rep.closed_loop_rel_gap = std::abs(J - rep.lambda_Q) / std::max(rep.lambda_Q, 1e-300);
        rep.part_b_ok = J <= rep.lambda_Q * (1.0 + 1e-6) + 1e-14;
    }

    // (c) weighted open-loop output energy from x0 = q_i, u = 0
    {
        const double b = weighted_gain(sys.B.transpose(), Q);
        SimulationConfig cfg = sim_cfg;
        cfg.T = T;
        cfg.x0 = InitialState::vector(q_i);
        std::vector<QuadraticObservable> obs{{"weighted_output", sys.C.transpose() * sys.C, b}};
        const auto traj = propagate_moments(sys, ControlSpec::zero(), cfg, obs);
        rep.weighted_output_energy = traj.observable_integrals[0];
        rep.part_c_ok = rep.weighted_output_energy <= rep.lambda_Q * (1.0 + 1e-6) + 1e-14;
    }
    return rep;
}

PreservationCertificate preservation_certificates(const StochasticSystem& sys, const BalancedRealization& bal,
                                                  const ReducedModel& red, double hautus_tol) {
    sys.validate();
    PreservationCertificate cert;

    StochasticSystem reduced_closed = red.system();
    reduced_closed.A = red.A_r - red.B_r * red.B_r.transpose() * Matrix(red.sigma_r.asDiagonal());
    cert.reduced_closed_loop = mean_square_stability(reduced_closed);

    cert.detectability = hautus_detectability(red.system(), hautus_tol);
    cert.reduced_detectable = cert.detectability.holds;

    // Balanced full-order closed loop and the two type-II inequalities.
    const Matrix Sigma = bal.sigma.asDiagonal();
    StochasticSystem closed_n = bal.balanced_system();
    closed_n.A = bal.A_n - bal.B_n * bal.B_n.transpose() * Sigma;

    const Matrix CtC_n = bal.C_n.transpose() * bal.C_n;
    const Matrix SBBS = Sigma * bal.B_n * bal.B_n.transpose() * Sigma;
    const Matrix R1 = apply_operator(closed_n, Sigma, /*adjoint=*/false) + CtC_n + SBBS;
    cert.scale_sigma = CtC_n.norm() + SBBS.norm() + (closed_n.A.transpose() * Sigma + Sigma * closed_n.A).norm();

    const Matrix L = Sigma + Matrix(bal.sigma.cwiseInverse().asDiagonal());  // Upsilon^{-1}
    const Matrix LBBL = L * bal.B_n * bal.B_n.transpose() * L;
    const Matrix R2 = apply_operator(closed_n, L, /*adjoint=*/false) + LBBL;
    cert.scale_upsilon = LBBL.norm() + (closed_n.A.transpose() * L + L * closed_n.A).norm();

    Eigen::SelfAdjointEigenSolver<Matrix> e1(symmetrize(R1), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> e2(symmetrize(R2), Eigen::EigenvaluesOnly);
    cert.typeII_margin_sigma = e1.eigenvalues().maxCoeff();
    cert.typeII_margin_upsilon = e2.eigenvalues().maxCoeff();
    return cert;
}

}  // namespace lqgbt
