#include "lqgbt/simulate.hpp"

#include "lqgbt/operators.hpp"
#include "lqgbt/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace lqgbt {

ControlSpec ControlSpec::open_loop(TimeSignal u) {
    ControlSpec c;
    c.kind = Kind::OpenLoop;
    c.signal = std::move(u);
    return c;
}

ControlSpec ControlSpec::feedback(Matrix F, TimeSignal u1) {
    ControlSpec c;
    c.kind = Kind::Feedback;
    c.gain = std::move(F);
    c.signal = std::move(u1);
    return c;
}

Matrix ControlSpec::closed_loop_drift(const StochasticSystem& sys) const {
    if (kind == Kind::Feedback) return sys.A + sys.B * gain;
    return sys.A;
}

Vector ControlSpec::offset(const StochasticSystem& sys, double t) const {
    if (kind == Kind::Zero || !signal) return Vector::Zero(sys.m());
    return signal(t);
}

void ControlSpec::validate(const StochasticSystem& sys) const {
    if (kind == Kind::Feedback) {
        if (gain.rows() != sys.m() || gain.cols() != sys.n())
            throw InputError("feedback gain must be m x n for the target system");
    }
    if (signal) {
        const Vector probe = signal(0.0);
        if (probe.size() != sys.m()) throw InputError("control signal dimension must equal m");
    }
}

void SimulationConfig::validate() const {
    if (dt <= 0.0) throw InputError("dt must be positive");
    if (T < dt) throw InputError("T must be at least dt");
    if (n_paths < 0) throw InputError("n_paths must be nonnegative");
}

namespace {

// Factor of K for correlated increments; eigendecomposition with zero
// clipping covers rank-deficient covariances.
Matrix noise_factor(const Matrix& K) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(K));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of K failed");
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(K.norm(), 1.0))
        throw InputError("K must be positive semidefinite");
    const Vector clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

Vector initial_state_vector(const InitialState& is, Eigen::Index n, std::uint64_t seed, std::uint64_t path) {
    if (is.kind == InitialState::Kind::Deterministic) {
        if (is.x0.size() != n) throw InputError("initial state dimension mismatch");
        return is.x0;
    }
    Philox g(seed, /*stream=*/1, path);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g.normal();
    const double nrm = v.norm();
    return nrm > 0.0 ? Vector(v / nrm) : Vector(Vector::Unit(n, 0));
}

int mc_thread_count() {
    if (const char* env = std::getenv("LQGBT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

SdePathBatch integrate_sde(const StochasticSystem& sys, const ControlSpec& control, const SimulationConfig& cfg,
                           int n_recorded) {
    sys.validate();
    control.validate(sys);
    cfg.validate();
    if (cfg.n_paths < 1) throw InputError("integrate_sde requires n_paths >= 1");

    const Eigen::Index n = sys.n();
    const int M = cfg.steps();
    const double dt = cfg.dt;
    const Matrix Acl = control.closed_loop_drift(sys);

    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - dt * Acl);
    {
        const double det_scale = std::abs(lu.determinant());
        if (!(det_scale > 1e-300)) throw StepSizeError("I - dt * A is numerically singular; reduce dt");
    }
    const Matrix Lk = noise_factor(sys.K);
    const double sdt = std::sqrt(dt);

    // precompute sampled offsets B * u(t_k)
    std::vector<Vector> bu(M);
    for (int k = 0; k < M; ++k) bu[k] = sys.B * control.offset(sys, k * dt);

    SdePathBatch out;
    out.n_paths = cfg.n_paths;
    out.times.resize(M + 1);
    for (int k = 0; k <= M; ++k) out.times[k] = k * dt;

    const int nrec = std::min(n_recorded, cfg.n_paths);
    out.recorded_outputs.assign(nrec, Matrix::Zero(sys.p(), M + 1));

    const int n_threads = std::min<int>(mc_thread_count(), cfg.n_paths);
    struct Partial {
        Vector sum_y2;
        Vector sum_y4;
        Vector sum_xT;
        Matrix sum_xxT;
    };
    std::vector<Partial> partials(n_threads);

    auto worker = [&](int tid, int p_begin, int p_end) {
        Partial acc;
        acc.sum_y2 = Vector::Zero(M + 1);
        acc.sum_y4 = Vector::Zero(M + 1);
        acc.sum_xT = Vector::Zero(n);
        acc.sum_xxT = Matrix::Zero(n, n);
        Vector x(n), rhs(n), dW(sys.q()), xi(sys.q());
        for (int p = p_begin; p < p_end; ++p) {
            Philox g(cfg.seed, /*stream=*/0, static_cast<std::uint64_t>(p));
            x = initial_state_vector(cfg.x0, n, cfg.seed, static_cast<std::uint64_t>(p));
            for (int k = 0; k <= M; ++k) {
                const Vector y = sys.C * x;
                const double y2 = y.squaredNorm();
                acc.sum_y2[k] += y2;
                acc.sum_y4[k] += y2 * y2;
                if (p < nrec) out.recorded_outputs[p].col(k) = y;
                if (k == M) break;
                for (Eigen::Index i = 0; i < sys.q(); ++i) xi[i] = g.normal();
                dW = Lk * xi * sdt;
                rhs = x + dt * bu[k];
                for (Eigen::Index i = 0; i < sys.q(); ++i) rhs.noalias() += sys.N[i] * x * dW[i];
                x = lu.solve(rhs);
            }
            acc.sum_xT += x;
            acc.sum_xxT += x * x.transpose();
        }
        partials[tid] = std::move(acc);
    };

    if (n_threads == 1) {
        worker(0, 0, cfg.n_paths);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (cfg.n_paths + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int b = std::min(cfg.n_paths, t * chunk);
            const int e = std::min(cfg.n_paths, b + chunk);
            pool.emplace_back(worker, t, b, e);
        }
        for (auto& th : pool) th.join();
    }

    // deterministic reduction in thread/block order
    Vector sum_y2 = Vector::Zero(M + 1), sum_y4 = Vector::Zero(M + 1);
    Vector sum_xT = Vector::Zero(n);
    Matrix sum_xxT = Matrix::Zero(n, n);
    for (const auto& acc : partials) {
        sum_y2 += acc.sum_y2;
        sum_y4 += acc.sum_y4;
        sum_xT += acc.sum_xT;
        sum_xxT += acc.sum_xxT;
    }

    const double np = static_cast<double>(cfg.n_paths);
    out.mc_output_energy = sum_y2 / np;
    out.mc_output_energy_se.resize(M + 1);
    for (int k = 0; k <= M; ++k) {
        const double mean = out.mc_output_energy[k];
        const double var = std::max(0.0, sum_y4[k] / np - mean * mean);
        out.mc_output_energy_se[k] = cfg.n_paths > 1 ? std::sqrt(var / (np - 1.0)) : 0.0;
    }
    out.mean_final_state = sum_xT / np;
    out.second_moment_final_state = sum_xxT / np;
    return out;
}

namespace {

struct MomentStepper {
    const StochasticSystem& sys;
    Matrix Acl;
    Eigen::Index n, ns;
    Matrix Msym;                       // svec matricization of X -> Acl X + X Acl^T + Pi_N^*(X)
    Eigen::PartialPivLU<Matrix> luX;   // I - dt/2 * Msym
    Eigen::PartialPivLU<Matrix> luM;   // I - dt/2 * Acl
    double dt;

    MomentStepper(const StochasticSystem& s, const ControlSpec& control, double dt_) : sys(s), dt(dt_) {
        Acl = control.closed_loop_drift(sys);
        n = sys.n();
        ns = n * (n + 1) / 2;
        StochasticSystem closed = sys;
        closed.A = Acl;
        Msym = matricize_symmetric(closed, /*adjoint=*/true);
        luX.compute(Matrix::Identity(ns, ns) - 0.5 * dt * Msym);
        luM.compute(Matrix::Identity(n, n) - 0.5 * dt * Acl);
    }

    // (I - dt/2 L) z_next = (I + dt/2 L) z + dt * forcing(t_mid)
    void step(Vector& m, Vector& xs, const Vector& u_mid) const {
        const Vector bu = sys.B * u_mid;
        Vector mn = luM.solve(m + 0.5 * dt * (Acl * m) + dt * bu);
        const Vector m_mid = 0.5 * (m + mn);
        const Matrix S = bu * m_mid.transpose() + m_mid * bu.transpose();
        xs = luX.solve(xs + 0.5 * dt * (Msym * xs) + dt * svec(S));
        m = std::move(mn);
    }
};

double control_energy_at(const StochasticSystem& sys, const ControlSpec& control, double t, const Vector& m,
                         const Matrix& X) {
    switch (control.kind) {
        case ControlSpec::Kind::Zero:
            return 0.0;
        case ControlSpec::Kind::OpenLoop: {
            const Vector u = control.offset(sys, t);
            return u.squaredNorm();
        }
        case ControlSpec::Kind::Feedback: {
            const Vector u1 = control.offset(sys, t);
            const Matrix& F = control.gain;
            return (F * X * F.transpose()).trace() + 2.0 * u1.dot(F * m) + u1.squaredNorm();
        }
    }
    return 0.0;
}

MomentTrajectory propagate_moments_impl(const StochasticSystem& sys, const ControlSpec& control,
                                        const SimulationConfig& cfg, Vector m, Matrix X0,
                                        const std::vector<QuadraticObservable>& observables, int snapshot_stride) {
    sys.validate();
    control.validate(sys);
    cfg.validate();
    const Eigen::Index n = sys.n();
    const int M = cfg.steps();
    const double dt = cfg.dt;

    for (const auto& ob : observables)
        if (ob.G.rows() != n || ob.G.cols() != n) throw InputError("observable matrix must be n x n");

    MomentStepper stepper(sys, control, dt);
    const Matrix CtC = sys.C.transpose() * sys.C;

    MomentTrajectory traj;
    traj.times.resize(M + 1);
    traj.output_energy.resize(M + 1);
    traj.control_energy.resize(M + 1);
    traj.observables.assign(observables.size(), Vector::Zero(M + 1));
    traj.observable_integrals.assign(observables.size(), 0.0);
    for (const auto& ob : observables) traj.observable_names.push_back(ob.name);

    if (snapshot_stride <= 0) snapshot_stride = std::max(1, M / 100);
    const int psd_stride = cfg.psd_check_stride > 0 ? cfg.psd_check_stride : std::max(1, M / 200);

    Vector xs = svec(X0);
    double cost_prev = 0.0;
    std::vector<double> obs_prev(observables.size(), 0.0);
    for (int k = 0; k <= M; ++k) {
        const double t = k * dt;
        traj.times[k] = t;
        const Matrix X = unsvec(xs, n);
        traj.output_energy[k] = (CtC * X).trace();
        traj.control_energy[k] = control_energy_at(sys, control, t, m, X);
        for (std::size_t l = 0; l < observables.size(); ++l) {
            const double w = std::exp(-observables[l].weight_rate * t);
            const double val = w * (observables[l].G * X).trace();
            traj.observables[l][k] = val;
            if (k > 0) traj.observable_integrals[l] += 0.5 * dt * (obs_prev[l] + val);
            obs_prev[l] = val;
        }
        const double cost_now = traj.output_energy[k] + traj.control_energy[k];
        if (k > 0) traj.cost_integral += 0.5 * dt * (cost_prev + cost_now);
        cost_prev = cost_now;

        if (k % snapshot_stride == 0 || k == M) {
            traj.snapshot_times.push_back(t);
            traj.mean.push_back(m);
            traj.second_moment.push_back(X);
        }
        if (k % psd_stride == 0 || k == M) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(X, Eigen::EigenvaluesOnly);
            const double lmin = es.eigenvalues().minCoeff();
            const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
            if (lmin < -1e-8 * std::max(lmax, 1e-300)) {
                std::ostringstream os;
                os << "second moment lost positive semidefiniteness at t = " << t << " (lambda_min " << lmin
                   << "); reduce dt";
                throw StepSizeError(os.str());
            }
        }
        if (k == M) break;
        const Vector u_mid = control.offset(sys, t + 0.5 * dt);
        stepper.step(m, xs, u_mid);
    }
    traj.final_mean = m;
    traj.final_second_moment = unsvec(xs, n);
    return traj;
}

}  // namespace

MomentTrajectory propagate_moments(const StochasticSystem& sys, const ControlSpec& control,
                                   const SimulationConfig& cfg, const std::vector<QuadraticObservable>& observables,
                                   int snapshot_stride) {
    if (cfg.x0.kind != InitialState::Kind::Deterministic)
        throw InputError("moment propagation needs a deterministic initial state");
    Vector m = cfg.x0.x0.size() ? cfg.x0.x0 : Vector::Zero(sys.n());
    if (m.size() != sys.n()) throw InputError("initial state dimension mismatch");
    const Matrix X0 = m * m.transpose();
    return propagate_moments_impl(sys, control, cfg, m, X0, observables, snapshot_stride);
}

MomentTrajectory propagate_moments_from(const StochasticSystem& sys, const ControlSpec& control,
                                        const SimulationConfig& cfg, const Vector& m0, const Matrix& X0,
                                        const std::vector<QuadraticObservable>& observables, int snapshot_stride) {
    if (m0.size() != sys.n() || X0.rows() != sys.n() || X0.cols() != sys.n())
        throw InputError("moment initial condition dimension mismatch");
    return propagate_moments_impl(sys, control, cfg, m0, symmetrize(X0), observables, snapshot_stride);
}

StochasticSystem build_error_system(const StochasticSystem& sys, const ReducedModel& red, ErrorSystemMode mode,
                                    const Matrix* Q) {
    sys.validate();
    const Eigen::Index n = sys.n();
    const int r = red.r;
    if (red.B_r.cols() != sys.m() || red.C_r.rows() != sys.p() || static_cast<Eigen::Index>(red.N_r.size()) != sys.q())
        throw InputError("reduced model is not conformable with the full system");

    Matrix A_full = sys.A;
    Matrix A_red = red.A_r;
    if (mode == ErrorSystemMode::ClosedLoop) {
        if (Q == nullptr) throw InputError("closed-loop error system needs the observability Gramian Q");
        A_full -= sys.B * sys.B.transpose() * (*Q);
        A_red -= red.B_r * red.B_r.transpose() * Matrix(red.sigma_r.asDiagonal());
    }

    Matrix A = Matrix::Zero(n + r, n + r);
    A.topLeftCorner(n, n) = A_full;
    A.bottomRightCorner(r, r) = A_red;

    Matrix B(n + r, sys.m());
    B.topRows(n) = sys.B;
    B.bottomRows(r) = red.B_r;

    Matrix C(sys.p(), n + r);
    C.leftCols(n) = sys.C;
    C.rightCols(r) = -red.C_r;

    std::vector<Matrix> N;
    N.reserve(sys.N.size());
    for (std::size_t i = 0; i < sys.N.size(); ++i) {
        Matrix Ni = Matrix::Zero(n + r, n + r);
        Ni.topLeftCorner(n, n) = sys.N[i];
        Ni.bottomRightCorner(r, r) = red.N_r[i];
        N.push_back(std::move(Ni));
    }
    return StochasticSystem(std::move(A), std::move(N), std::move(B), std::move(C), sys.K);
}

double cost_functional(const Vector& times, const Vector& output_energy, const Vector& control_energy) {
    if (times.size() != output_energy.size()) throw InputError("time grid and output series must align");
    const bool has_u = control_energy.size() > 0;
    if (has_u && control_energy.size() != times.size()) throw InputError("control series must align with the grid");
    double J = 0.0;
    for (Eigen::Index k = 1; k < times.size(); ++k) {
        const double f0 = output_energy[k - 1] + (has_u ? control_energy[k - 1] : 0.0);
        const double f1 = output_energy[k] + (has_u ? control_energy[k] : 0.0);
        J += 0.5 * (times[k] - times[k - 1]) * (f0 + f1);
    }
    return J;
}

StochasticSystem reduced_feedback_on_full(const StochasticSystem& sys, const ReducedModel& red) {
    sys.validate();
    if (red.restrict_.cols() != sys.n()) throw InputError("reduced model does not match the full system");
    StochasticSystem closed = sys;
    closed.A = sys.A - sys.B * red.B_r.transpose() * Matrix(red.sigma_r.asDiagonal()) * red.restrict_;
    return closed;
}

}  // namespace lqgbt
