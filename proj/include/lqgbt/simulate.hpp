#pragma once

#include "lqgbt/balancing.hpp"
#include "lqgbt/types.hpp"

#include <functional>
#include <optional>

namespace lqgbt {

/// Deterministic time signal, sampled where the integrators need it.
using TimeSignal = std::function<Vector(double)>;

/// Control applied to a system: open-loop u(t), linear feedback F x + u1(t),
/// or no input at all.
struct ControlSpec {
    enum class Kind { Zero, OpenLoop, Feedback };
    Kind kind = Kind::Zero;
    TimeSignal signal;  // u(t) for OpenLoop, offset u1(t) for Feedback (may be empty)
    Matrix gain;        // F, m x n, Feedback only

    static ControlSpec zero() { return {}; }
    static ControlSpec open_loop(TimeSignal u);
    static ControlSpec feedback(Matrix F, TimeSignal u1 = {});

    /// Closed-loop drift A + B F (or A unchanged).
    Matrix closed_loop_drift(const StochasticSystem& sys) const;
    /// Deterministic offset entering through B at time t.
    Vector offset(const StochasticSystem& sys, double t) const;
    void validate(const StochasticSystem& sys) const;
};

struct InitialState {
    enum class Kind { Deterministic, RandomUnit };
    Kind kind = Kind::Deterministic;
    Vector x0;  // Deterministic only

    static InitialState zero(Eigen::Index n) { return {Kind::Deterministic, Vector::Zero(n)}; }
    static InitialState vector(Vector v) { return {Kind::Deterministic, std::move(v)}; }
    /// Standard normal vector scaled to unit norm, drawn from the seeded stream.
    static InitialState random_unit() { return {Kind::RandomUnit, {}}; }
};

struct SimulationConfig {
    double T = 1.0;
    double dt = 1e-3;
    int n_paths = 0;
    std::uint64_t seed = 0;
    InitialState x0;
    int psd_check_stride = 0;  // 0: ~200 checks per run; 1: every step

    void validate() const;
    int steps() const { return static_cast<int>(std::llround(T / dt)); }
};

/// Extra quadratic observable tr(G X(t)) reported with weight e^{-rate t}.
struct QuadraticObservable {
    std::string name;
    Matrix G;
    double weight_rate = 0.0;
};

/// Second-moment trajectory from the Lyapunov-type moment ODE. Scalar series
/// are kept at every grid node; matrix snapshots at `snapshot_stride`.
struct MomentTrajectory {
    Vector times;          // all grid nodes t_0 .. t_M
    Vector output_energy;  // E||y||^2(t)
    Vector control_energy; // E||u||^2(t) (zero for Kind::Zero)
    std::vector<Vector> observables;      // weighted tr(G_l X(t)) series
    std::vector<double> observable_integrals;  // trapezoidal integrals of the above
    std::vector<std::string> observable_names;

    std::vector<double> snapshot_times;
    std::vector<Vector> mean;           // m(t) at snapshots
    std::vector<Matrix> second_moment;  // X(t) at snapshots

    double cost_integral = 0.0;  // int E(||u||^2 + ||y||^2) dt over the grid
    Vector final_mean;
    Matrix final_second_moment;
};

/// Sampled paths from the drift-implicit Euler-Maruyama scheme, reduced to
/// the aggregates the validation experiments need.
struct SdePathBatch {
    Vector times;
    std::vector<Matrix> recorded_outputs;  // first few paths, (p x M+1) each
    Vector mc_output_energy;               // sample mean of ||y||^2 per node
    Vector mc_output_energy_se;            // standard error of the above
    Vector mean_final_state;
    Matrix second_moment_final_state;
    int n_paths = 0;
};

/// Drift-implicit Euler-Maruyama sampling of the SDE under `control`.
/// Identical (seed, config) produce bit-identical results; paths are
/// simulated on (seed, path_index)-addressed Philox streams and reduced in
/// path-index order. `n_recorded` limits stored per-path outputs.
SdePathBatch integrate_sde(const StochasticSystem& sys, const ControlSpec& control, const SimulationConfig& cfg,
                           int n_recorded = 5);

/// Implicit-midpoint integration of the moment ODE
///   m' = A_cl m + B u1,  X' = A_cl X + X A_cl^T + Pi_N^*(X) + B u1 m^T + m u1^T B^T.
MomentTrajectory propagate_moments(const StochasticSystem& sys, const ControlSpec& control,
                                   const SimulationConfig& cfg, const std::vector<QuadraticObservable>& observables = {},
                                   int snapshot_stride = 0);

/// As above but starting from an explicit (mean, second moment) pair.
MomentTrajectory propagate_moments_from(const StochasticSystem& sys, const ControlSpec& control,
                                        const SimulationConfig& cfg, const Vector& m0, const Matrix& X0,
                                        const std::vector<QuadraticObservable>& observables = {},
                                        int snapshot_stride = 0);

enum class ErrorSystemMode { OpenLoop, ClosedLoop };

/// Stacked full/reduced error system with output y - y_r. ClosedLoop closes
/// both blocks with their stabilizing feedbacks (needs Q for the full block)
/// and leaves the offset input u1 entering through [B; B_r].
StochasticSystem build_error_system(const StochasticSystem& sys, const ReducedModel& red, ErrorSystemMode mode,
                                    const Matrix* Q = nullptr);

/// Trapezoidal cost J_T = int E(||u||^2 + ||y||^2) dt from sampled series.
double cost_functional(const Vector& times, const Vector& output_energy, const Vector& control_energy);

/// Closed loop (A - B B_r^T Sigma_r W_r, N_i) obtained by driving the full
/// system with the reduced feedback in the stabilizing sign convention.
StochasticSystem reduced_feedback_on_full(const StochasticSystem& sys, const ReducedModel& red);

}  // namespace lqgbt
