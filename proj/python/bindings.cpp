// Python bindings for the main operations: benchmark construction, stability
// and Hautus tests, Gramian solves, balancing, truncation, error bounds, and
// moment propagation.
#include "lqgbt/analysis.hpp"
#include "lqgbt/balancing.hpp"
#include "lqgbt/benchmark.hpp"
#include "lqgbt/operators.hpp"
#include "lqgbt/simulate.hpp"
#include "lqgbt/solvers.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lqgbt;

namespace {

ControlSpec make_control(const std::string& kind, const Matrix& gain, const std::function<Vector(double)>& signal) {
    if (kind == "zero") return ControlSpec::zero();
    if (kind == "open_loop") return ControlSpec::open_loop(signal);
    if (kind == "feedback") return ControlSpec::feedback(gain, signal);
    throw InputError("control kind must be zero | open_loop | feedback");
}

}  // namespace

PYBIND11_MODULE(lqgbt, m) {
    m.doc() = "LQG-type balanced truncation for linear stochastic systems with multiplicative noise";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<NonConvergenceError>(m, "NonConvergenceError", PyExc_RuntimeError);
    py::register_exception<OrderSelectionError>(m, "OrderSelectionError", PyExc_ValueError);
    py::register_exception<StepSizeError>(m, "StepSizeError", PyExc_RuntimeError);
    py::register_exception<AccuracyError>(m, "AccuracyError", PyExc_ArithmeticError);

    py::class_<StochasticSystem>(m, "StochasticSystem")
        .def(py::init<Matrix, std::vector<Matrix>, Matrix, Matrix, Matrix>(), py::arg("A"), py::arg("N"),
             py::arg("B"), py::arg("C"), py::arg("K"))
        .def_readwrite("A", &StochasticSystem::A)
        .def_readwrite("N", &StochasticSystem::N)
        .def_readwrite("B", &StochasticSystem::B)
        .def_readwrite("C", &StochasticSystem::C)
        .def_readwrite("K", &StochasticSystem::K)
        .def("validate", &StochasticSystem::validate)
        .def_property_readonly("n", &StochasticSystem::n)
        .def_property_readonly("m", &StochasticSystem::m)
        .def_property_readonly("p", &StochasticSystem::p)
        .def_property_readonly("q", &StochasticSystem::q);

    py::class_<SpectralCertificate>(m, "SpectralCertificate")
        .def_readonly("abscissa", &SpectralCertificate::abscissa)
        .def_readonly("stable", &SpectralCertificate::stable);

    py::class_<HautusResult>(m, "HautusResult")
        .def_readonly("holds", &HautusResult::holds)
        .def_readonly("witness", &HautusResult::witness)
        .def_property_readonly("witness_eigenvalue",
                               [](const HautusResult& r) { return r.witness_eigenvalue; });

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("tol", &SolverConfig::tol)
        .def_readwrite("max_outer", &SolverConfig::max_outer)
        .def_readwrite("lmi_margin", &SolverConfig::lmi_margin)
        .def_readwrite("seed", &SolverConfig::seed);

    py::class_<GramianPair>(m, "GramianPair")
        .def_readonly("P", &GramianPair::P)
        .def_readonly("Q", &GramianPair::Q)
        .def_readonly("q_residual", &GramianPair::q_residual)
        .def_readonly("p_margin", &GramianPair::p_margin)
        .def_readonly("iterations", &GramianPair::iterations)
        .def_readonly("closed_loop_certificate", &GramianPair::closed_loop_certificate);

    py::class_<BalancedRealization>(m, "BalancedRealization")
        .def_readonly("S_b", &BalancedRealization::S_b)
        .def_readonly("S_b_inv", &BalancedRealization::S_b_inv)
        .def_readonly("sigma", &BalancedRealization::sigma)
        .def_readonly("A_n", &BalancedRealization::A_n)
        .def_readonly("B_n", &BalancedRealization::B_n)
        .def_readonly("C_n", &BalancedRealization::C_n)
        .def_readonly("N_n", &BalancedRealization::N_n);

    py::class_<ReducedModel>(m, "ReducedModel")
        .def_readonly("A_r", &ReducedModel::A_r)
        .def_readonly("B_r", &ReducedModel::B_r)
        .def_readonly("C_r", &ReducedModel::C_r)
        .def_readonly("N_r", &ReducedModel::N_r)
        .def_readonly("sigma_r", &ReducedModel::sigma_r)
        .def_readonly("lift", &ReducedModel::lift)
        .def_readonly("restrict", &ReducedModel::restrict_)
        .def_readonly("r", &ReducedModel::r)
        .def("system", &ReducedModel::system);

    py::class_<HeatBenchmarkConfig>(m, "HeatBenchmarkConfig")
        .def(py::init<>())
        .def_readwrite("n", &HeatBenchmarkConfig::n)
        .def_readwrite("alpha", &HeatBenchmarkConfig::alpha)
        .def_readwrite("nu", &HeatBenchmarkConfig::nu)
        .def_readwrite("quad_points", &HeatBenchmarkConfig::quad_points);

    py::class_<MomentTrajectory>(m, "MomentTrajectory")
        .def_readonly("times", &MomentTrajectory::times)
        .def_readonly("output_energy", &MomentTrajectory::output_energy)
        .def_readonly("control_energy", &MomentTrajectory::control_energy)
        .def_readonly("cost_integral", &MomentTrajectory::cost_integral)
        .def_readonly("final_mean", &MomentTrajectory::final_mean)
        .def_readonly("final_second_moment", &MomentTrajectory::final_second_moment);

    py::class_<PreservationCertificate>(m, "PreservationCertificate")
        .def_readonly("reduced_closed_loop", &PreservationCertificate::reduced_closed_loop)
        .def_readonly("reduced_detectable", &PreservationCertificate::reduced_detectable)
        .def_readonly("typeII_margin_sigma", &PreservationCertificate::typeII_margin_sigma)
        .def_readonly("typeII_margin_upsilon", &PreservationCertificate::typeII_margin_upsilon)
        .def("all_pass", &PreservationCertificate::all_pass, py::arg("tol") = 1e-8);

    m.def("build_heat_system", &build_heat_system, py::arg("config"));
    m.def("reference_input", py::vectorize(reference_input));
    m.def("apply_operator", &apply_operator, py::arg("sys"), py::arg("X"), py::arg("adjoint") = false);
    m.def("mean_square_stability", &mean_square_stability);
    m.def("hautus_detectability", &hautus_detectability, py::arg("sys"), py::arg("tol") = 1e-8);
    m.def("hautus_observability", &hautus_observability, py::arg("sys"), py::arg("tol") = 1e-8);
    m.def("solve_lyapunov", &solve_lyapunov, py::arg("A"), py::arg("W"), py::arg("rel_tol") = 1e-11);
    m.def("solve_riccati", &solve_riccati, py::arg("A"), py::arg("B"), py::arg("W"));
    m.def(
        "solve_observability_gramian",
        [](const StochasticSystem& sys, const SolverConfig& cfg) {
            const auto r = solve_observability_gramian(sys, cfg);
            return py::make_tuple(r.Q, r.residual, r.iterations);
        },
        py::arg("sys"), py::arg("config") = SolverConfig{});
    m.def(
        "compute_gramian_pair",
        [](const StochasticSystem& sys, const SolverConfig& cfg, const std::string& strategy) {
            return compute_gramian_pair(sys, cfg, reachability_strategy_from_string(strategy));
        },
        py::arg("sys"), py::arg("config") = SolverConfig{}, py::arg("strategy") = "subgradient_feasibility");
    m.def("balance", &balance, py::arg("sys"), py::arg("P"), py::arg("Q"));
    m.def("truncate", &truncate, py::arg("balanced"), py::arg("r"), py::arg("gap_tol") = kGapTol);
    m.def(
        "choose_order",
        [](const Vector& sigma, double rel_tol) {
            const auto sel = choose_order(sigma, rel_tol);
            return py::make_tuple(sel.r, sel.gap_warning, sel.tail_coefficient);
        },
        py::arg("sigma"), py::arg("rel_tol"));
    m.def("tail_coefficient", &tail_coefficient, py::arg("sigma"), py::arg("r"));
    m.def("feedback_bound", &feedback_bound);
    m.def("weighted_bound", &weighted_bound);
    m.def(
        "propagate_moments",
        [](const StochasticSystem& sys, const std::string& control_kind, const Matrix& gain,
           const std::function<Vector(double)>& signal, double T, double dt, const Vector& x0) {
            SimulationConfig cfg;
            cfg.T = T;
            cfg.dt = dt;
            cfg.x0 = InitialState::vector(x0);
            return propagate_moments(sys, make_control(control_kind, gain, signal), cfg);
        },
        py::arg("sys"), py::arg("control_kind"), py::arg("gain"), py::arg("signal"), py::arg("T"), py::arg("dt"),
        py::arg("x0"));
    m.def(
        "integrate_sde",
        [](const StochasticSystem& sys, const std::string& control_kind, const Matrix& gain,
           const std::function<Vector(double)>& signal, double T, double dt, int n_paths, std::uint64_t seed,
           const Vector& x0) {
            SimulationConfig cfg;
            cfg.T = T;
            cfg.dt = dt;
            cfg.n_paths = n_paths;
            cfg.seed = seed;
            cfg.x0 = InitialState::vector(x0);
            const auto b = integrate_sde(sys, make_control(control_kind, gain, signal), cfg);
            return py::make_tuple(b.times, b.mc_output_energy, b.mc_output_energy_se);
        },
        py::arg("sys"), py::arg("control_kind"), py::arg("gain"), py::arg("signal"), py::arg("T"), py::arg("dt"),
        py::arg("n_paths"), py::arg("seed"), py::arg("x0"));
    m.def("build_error_system",
          [](const StochasticSystem& sys, const ReducedModel& red, const std::string& mode, const Matrix& Q) {
              if (mode == "open") return build_error_system(sys, red, ErrorSystemMode::OpenLoop);
              if (mode == "closed") return build_error_system(sys, red, ErrorSystemMode::ClosedLoop, &Q);
              throw InputError("mode must be open | closed");
          });
    m.def("reduced_feedback_on_full", &reduced_feedback_on_full);
    m.def("preservation_certificates", &preservation_certificates, py::arg("sys"), py::arg("balanced"),
          py::arg("reduced"), py::arg("hautus_tol") = 1e-8);
}
