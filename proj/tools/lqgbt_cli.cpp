// Command-line pipeline: bench -> gramians -> reduce -> bounds -> simulate.
// Exit codes: 0 ok, 2 input error, 3 order-selection/gap error,
// 4 solver non-convergence, 5 certificate failure.

#include "lqgbt/analysis.hpp"
#include "lqgbt/balancing.hpp"
#include "lqgbt/benchmark.hpp"
#include "lqgbt/io.hpp"
#include "lqgbt/operators.hpp"
#include "lqgbt/simulate.hpp"
#include "lqgbt/solvers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lqgbt;

namespace {

void dump_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    os << j.dump(2) << "\n";
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

json certificate_to_json(const SpectralCertificate& c) {
    return {{"abscissa", c.abscissa},
            {"stable", c.stable},
            {"witness_eigenvalue", {c.witness_eigenvalue.real(), c.witness_eigenvalue.imag()}}};
}

struct GramianFiles {
    Matrix P, Q;
};

GramianFiles load_gramians(const fs::path& dir) {
    return {io::read_matrix_market(dir / "P.mtx"), io::read_matrix_market(dir / "Q.mtx")};
}

int cmd_bench(int n, double alpha, double nu, int quad_points, const fs::path& out) {
    HeatBenchmarkConfig cfg;
    cfg.n = n;
    cfg.alpha = alpha;
    cfg.nu = nu;
    cfg.quad_points = quad_points;
    const auto sys = build_heat_system(cfg);
    io::BundleMetadata meta;
    meta.generator = "bench";
    meta.params = {{"alpha", alpha}, {"nu", nu}, {"n", double(n)}, {"quad_points", double(quad_points)}};
    io::save_system_bundle(out, sys, meta);

    const auto cert = mean_square_stability(sys);
    const auto det = hautus_detectability(sys);
    std::cout << "benchmark n=" << n << " alpha=" << alpha << " nu=" << nu << "\n"
              << "  mean-square abscissa: " << cert.abscissa << (cert.stable ? " (stable)" : " (unstable)") << "\n"
              << "  detectable: " << (det.holds ? "yes" : "NO") << "\n"
              << "  bundle written to " << out.string() << "\n";
    json summary = {{"n", n},
                    {"abscissa", cert.abscissa},
                    {"stable", cert.stable},
                    {"detectable", det.holds}};
    dump_json(out / "bench_summary.json", summary);
    return det.holds ? 0 : 5;
}

int cmd_gramians(const fs::path& system_dir, const std::string& strategy, double tol, int max_outer,
                 double lmi_margin, const fs::path& out, const std::string& exchange_dir) {
    const auto sys = io::load_system_bundle(system_dir);
    SolverConfig cfg;
    cfg.tol = tol;
    cfg.max_outer = max_outer;
    cfg.lmi_margin = lmi_margin;
    const auto strat = reachability_strategy_from_string(strategy);

    const auto og = solve_observability_gramian(sys, cfg);
    ReachabilityGramianResult rg;
    if (strat == ReachabilityStrategy::ExternalSdp) {
        const fs::path xdir = exchange_dir.empty() ? out / "lmi_exchange" : fs::path(exchange_dir);
        if (fs::exists(xdir / "X.mtx")) {
            rg = ingest_reachability_solution(sys, io::read_matrix_market(xdir / "X.mtx"), cfg);
        } else {
            io::write_reachability_lmi(xdir, sys);
            std::cerr << "external_sdp: LMI data written to " << xdir.string()
                      << "; solve it, place X.mtx there, and re-run\n";
            return 4;
        }
    } else {
        rg = solve_reachability_gramian(sys, cfg, strat);
    }

    fs::create_directories(out);
    io::write_matrix_market(out / "P.mtx", rg.P);
    io::write_matrix_market(out / "Q.mtx", og.Q);

    const bool certified = og.closed_loop.stable && rg.margin <= 1e-8;
    json diag = {{"q_residual", og.residual},
                 {"q_iterations", og.iterations},
                 {"p_margin", rg.margin},
                 {"p_iterations", rg.iterations},
                 {"p_strategy", to_string(rg.strategy)},
                 {"p_schur_value", rg.schur_value},
                 {"dual_stabilizability_probe", rg.dual_probe_ok},
                 {"closed_loop", certificate_to_json(og.closed_loop)},
                 {"certified", certified}};
    dump_json(out / "diagnostics.json", diag);
    std::cout << "gramians: q_residual=" << og.residual << " p_margin=" << rg.margin
              << " closed-loop abscissa=" << og.closed_loop.abscissa << "\n";
    return certified ? 0 : 5;
}

int cmd_reduce(const fs::path& system_dir, const fs::path& gramians_dir, std::optional<int> order,
               std::optional<double> tol, const fs::path& out) {
    const auto sys = io::load_system_bundle(system_dir);
    const auto gf = load_gramians(gramians_dir);
    const auto bal = balance(sys, gf.P, gf.Q);

    int r = 0;
    bool gap_warning = false;
    if (order) {
        r = *order;
    } else {
        const auto sel = choose_order(bal.sigma, tol.value_or(1e-6));
        r = sel.r;
        gap_warning = sel.gap_warning;
    }
    const auto red = truncate(bal, r);

    io::ReducedBundle rb;
    rb.reduced = red.system();
    rb.lift = red.lift;
    rb.restrict_ = red.restrict_;
    rb.sigma_full = bal.sigma;
    rb.r = r;
    io::save_reduced_bundle(out, rb);

    json info = {{"r", r},
                 {"n", sys.n()},
                 {"gap_warning", gap_warning},
                 {"sigma_1", bal.sigma[0]},
                 {"sigma_r", bal.sigma[r - 1]},
                 {"tail_coefficient", tail_coefficient(bal.sigma, r)}};
    dump_json(out / "reduce.json", info);
    std::cout << "reduce: r=" << r << " sigma_1=" << bal.sigma[0]
              << " tail_coefficient=" << tail_coefficient(bal.sigma, r) << (gap_warning ? " (gap warning)" : "")
              << "\n";
    return 0;
}

int cmd_bounds(const fs::path& system_dir, const fs::path& gramians_dir, const fs::path& reduced_dir, double horizon,
               const std::string& gamma_method, const fs::path& out_file) {
    const auto sys = io::load_system_bundle(system_dir);
    const auto gf = load_gramians(gramians_dir);
    const auto rb = io::load_reduced_bundle(reduced_dir);
    const auto bal = balance(sys, gf.P, gf.Q);
    const int r = static_cast<int>(rb.reduced.n());
    const auto red = truncate(bal, r);

    GammaEstimate gamma;
    SimulationConfig grid;
    grid.T = std::isfinite(horizon) ? horizon : 1.0;
    grid.dt = 1e-3;
    if (gamma_method == "worst_case") {
        gamma = gamma_T(red, std::isfinite(horizon) ? horizon : 1.0, GammaMethod::WorstCase, grid);
    } else if (gamma_method == "operator_norm") {
        gamma = gamma_T(red, horizon, GammaMethod::OperatorNorm, grid);
    } else {
        throw InputError("unknown gamma method: " + gamma_method);
    }

    const auto rep = make_error_bound_report(bal.sigma, r, sys, gf.P, gf.Q, red, gamma.value, horizon);
    const auto cert = preservation_certificates(sys, bal, red);

    json jrep = {{"r", rep.r},
                 {"tail_coefficient", rep.tail_coefficient},
                 {"plain_tail", rep.plain_tail},
                 {"hat_sigma", rep.hat_sigma},
                 {"beta", rep.beta},
                 {"gamma_T", finite_or(rep.gamma_T, -1.0)},
                 {"b", rep.b},
                 {"b_r", rep.b_r},
                 {"T", std::isfinite(rep.T) ? json(rep.T) : json("inf")}};
    json jcert = {{"reduced_closed_loop", certificate_to_json(cert.reduced_closed_loop)},
                  {"reduced_detectable", cert.reduced_detectable},
                  {"typeII_margin_sigma", cert.typeII_margin_sigma},
                  {"typeII_margin_upsilon", cert.typeII_margin_upsilon},
                  {"scale_sigma", cert.scale_sigma},
                  {"scale_upsilon", cert.scale_upsilon},
                  {"all_pass", cert.all_pass()}};
    dump_json(out_file, {{"error_bounds", jrep}, {"preservation", jcert}});
    std::cout << "bounds: tail_coefficient=" << rep.tail_coefficient << " beta=" << rep.beta
              << " gamma=" << gamma.value << " certificates " << (cert.all_pass() ? "pass" : "FAIL") << "\n";
    return cert.all_pass() ? 0 : 5;
}

TimeSignal make_control_signal(const std::string& control, Eigen::Index m, const fs::path& base_dir) {
    if (control == "zero") return {};
    if (control == "reference") {
        if (m != 1) throw InputError("the reference input is scalar; system has m != 1");
        return [](double t) {
            Vector u(1);
            u << reference_input(t);
            return u;
        };
    }
    // CSV file: columns t, u1..um; piecewise-linear interpolation
    const fs::path path = fs::path(control).is_absolute() ? fs::path(control) : base_dir / control;
    std::ifstream is(path);
    if (!is) throw InputError("cannot open control file " + path.string());
    std::string line;
    std::getline(is, line);
    std::vector<double> ts;
    std::vector<Vector> us;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != static_cast<std::size_t>(m + 1)) throw InputError("control file must have 1 + m columns");
        ts.push_back(row[0]);
        us.push_back(Eigen::Map<Vector>(row.data() + 1, m));
    }
    if (ts.size() < 1) throw InputError("control file has no samples");
    return [ts = std::move(ts), us = std::move(us)](double t) {
        if (t <= ts.front()) return us.front();
        if (t >= ts.back()) return us.back();
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - ts.begin());
        const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        return Vector((1.0 - w) * us[k - 1] + w * us[k]);
    };
}

int cmd_simulate(const fs::path& system_dir, const std::string& reduced_dir, const std::string& gramians_dir,
                 const std::string& mode, const std::string& control, double T, double dt, int paths,
                 std::uint64_t seed, const fs::path& out) {
    const auto sys = io::load_system_bundle(system_dir);
    std::optional<io::ReducedBundle> rb;
    if (!reduced_dir.empty()) rb = io::load_reduced_bundle(reduced_dir);
    std::optional<GramianFiles> gf;
    if (!gramians_dir.empty()) gf = load_gramians(gramians_dir);

    fs::create_directories(out);
    SimulationConfig cfg;
    cfg.T = T;
    cfg.dt = dt;
    cfg.n_paths = paths;
    cfg.seed = seed;

    // Assemble the simulated system, the control, and the observables.
    StochasticSystem target = sys;
    ControlSpec spec;
    std::vector<QuadraticObservable> observables;
    json bounds = json::object();

    ReducedModel red;
    if (rb) {
        red.r = static_cast<int>(rb->reduced.n());
        red.A_r = rb->reduced.A;
        red.B_r = rb->reduced.B;
        red.C_r = rb->reduced.C;
        red.N_r = rb->reduced.N;
        red.K = rb->reduced.K;
        red.sigma_r = rb->sigma_full.head(red.r);
        red.lift = rb->lift;
        red.restrict_ = rb->restrict_;
    }

    const bool error_mode = (mode == "open" || mode == "closed") && rb.has_value();
    if (mode == "closed" && !rb) throw InputError("--mode closed needs --reduced");
    if (mode == "closed" && !gf) throw InputError("--mode closed needs --gramians (for the feedback Q)");

    if (error_mode) {
        target = build_error_system(sys, red, mode == "closed" ? ErrorSystemMode::ClosedLoop : ErrorSystemMode::OpenLoop,
                                    gf ? &gf->Q : nullptr);
        // output-error observable; in closed mode also the (u - u_r, y - y_r) pair energy
        observables.push_back({"output_error_energy", target.C.transpose() * target.C, 0.0});
        if (mode == "closed" && gf) {
            Matrix Ferr(sys.m(), sys.n() + red.r);
            Ferr.leftCols(sys.n()) = -(sys.B.transpose() * gf->Q);
            Ferr.rightCols(red.r) = red.B_r.transpose() * Matrix(red.sigma_r.asDiagonal());
            observables.push_back(
                {"pair_error_energy", Ferr.transpose() * Ferr + target.C.transpose() * target.C, 0.0});
        }
        cfg.x0 = InitialState::zero(target.n());
        spec = control == "zero" ? ControlSpec::zero()
                                 : ControlSpec::open_loop(make_control_signal(control, target.m(), system_dir));
    } else if (mode == "reduced-feedback") {
        if (!rb) throw InputError("--mode reduced-feedback needs --reduced");
        target = reduced_feedback_on_full(sys, red);
        cfg.x0 = InitialState::random_unit();
        spec = ControlSpec::zero();
    } else if (mode == "open") {
        cfg.x0 = InitialState::zero(target.n());
        spec = control == "zero" ? ControlSpec::zero()
                                 : ControlSpec::open_loop(make_control_signal(control, target.m(), system_dir));
    } else {
        throw InputError("unknown mode: " + mode);
    }

    // moment ODE (random initial states are propagated from their second moment)
    MomentTrajectory traj;
    if (cfg.x0.kind == InitialState::Kind::RandomUnit) {
        const Matrix X0 = Matrix::Identity(target.n(), target.n()) / double(target.n());
        traj = propagate_moments_from(target, spec, cfg, Vector::Zero(target.n()), X0, observables);
    } else {
        traj = propagate_moments(target, spec, cfg, observables);
    }

    std::vector<std::string> cols{"t", "output_energy", "control_energy"};
    std::vector<Vector> series{traj.times, traj.output_energy, traj.control_energy};
    for (std::size_t l = 0; l < observables.size(); ++l) {
        cols.push_back(observables[l].name);
        series.push_back(traj.observables[l]);
    }
    io::write_csv(out / "moments.csv", cols, series);

    json summary = {{"mode", mode},
                    {"control", control},
                    {"T", T},
                    {"dt", dt},
                    {"paths", paths},
                    {"seed", seed},
                    {"cost_integral", traj.cost_integral},
                    {"final_output_energy", traj.output_energy[traj.output_energy.size() - 1]}};
    for (std::size_t l = 0; l < observables.size(); ++l)
        summary["integrals"][observables[l].name] = traj.observable_integrals[l];

    // Bound checks when the ingredients are on disk.
    if (error_mode && gf && rb) {
        const auto bal = balance(sys, gf->P, gf->Q);
        const int r = red.r;
        if (mode == "closed" && control == "reference") {
            double u1sq = 0.0;
            for (int k = 0; k < cfg.steps(); ++k) {
                const double a = reference_input(k * dt), b = reference_input((k + 1) * dt);
                u1sq += 0.5 * dt * (a * a + b * b);
            }
            const double lhs = std::sqrt(traj.observable_integrals[1]);
            const double rhs = tail_coefficient(bal.sigma, r) * std::sqrt(u1sq);
            bounds["feedback_bound"] = {{"lhs", lhs}, {"rhs", rhs}, {"satisfied", lhs <= rhs}};
        }
        if (mode == "open" && control != "zero") {
            const auto rep = make_error_bound_report(bal.sigma, r, sys, gf->P, gf->Q, red, 0.0, T);
            // weighted output error vs weighted input, both under e^{-beta t}
            std::vector<QuadraticObservable> wobs{{"weighted_error", target.C.transpose() * target.C, rep.beta}};
            const auto wtraj = propagate_moments(target, spec, cfg, wobs);
            const auto u = make_control_signal(control, target.m(), system_dir);
            double wu = 0.0;
            for (int k = 0; k < cfg.steps(); ++k) {
                const double t0 = k * dt, t1 = (k + 1) * dt;
                wu += 0.5 * dt *
                      (std::exp(-rep.beta * t0) * u(t0).squaredNorm() + std::exp(-rep.beta * t1) * u(t1).squaredNorm());
            }
            const double lhs = std::sqrt(wtraj.observable_integrals[0]);
            const double rhs = rep.plain_tail * std::sqrt(wu);
            bounds["weighted_bound"] = {{"lhs", lhs}, {"rhs", rhs}, {"beta", rep.beta}, {"satisfied", lhs <= rhs}};
        }
    }
    summary["bounds"] = bounds;

    if (paths > 0) {
        const auto batch = integrate_sde(target, spec, cfg, 5);
        std::vector<std::string> pcols{"t", "mc_mean_ynorm2", "mc_se_ynorm2"};
        std::vector<Vector> pseries{batch.times, batch.mc_output_energy, batch.mc_output_energy_se};
        for (std::size_t p = 0; p < batch.recorded_outputs.size(); ++p)
            for (Eigen::Index c = 0; c < target.p(); ++c) {
                pcols.push_back("y_path" + std::to_string(p) + "_" + std::to_string(c));
                pseries.push_back(batch.recorded_outputs[p].row(c).transpose());
            }
        io::write_csv(out / "paths.csv", pcols, pseries);

        int agree = 0, total = 0;
        const int M = cfg.steps();
        for (int c = 1; c <= 20; ++c) {
            const int k = (M * c) / 20;
            ++total;
            if (std::abs(batch.mc_output_energy[k] - traj.output_energy[k]) <=
                3.0 * batch.mc_output_energy_se[k] + 1e-12)
                ++agree;
        }
        summary["mc"] = {{"checkpoints_within_3se", agree}, {"checkpoints", total}};
    }
    dump_json(out / "summary.json", summary);

    bool ok = true;
    for (const auto& [name, b] : bounds.items()) ok = ok && b.at("satisfied").get<bool>();
    std::cout << "simulate: cost integral " << traj.cost_integral << (ok ? "" : " (BOUND VIOLATED)") << "\n";
    return ok ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LQG-type balanced truncation for linear stochastic systems with multiplicative noise"};
    app.require_subcommand(1);

    // bench
    auto* bench = app.add_subcommand("bench", "Build the stochastic heat benchmark and write a system bundle");
    int n = 36, quad_points = 64;
    double alpha = 0.2, nu = 2.0;
    std::string out_dir;
    bench->add_option("--n", n, "state dimension");
    bench->add_option("--alpha", alpha, "diffusion coefficient");
    bench->add_option("--nu", nu, "noise intensity");
    bench->add_option("--quad-points", quad_points, "quadrature points per axis");
    bench->add_option("--out", out_dir, "output bundle directory")->required();

    // gramians
    auto* gram = app.add_subcommand("gramians", "Solve the Gramian pair for a system bundle");
    std::string g_system, g_strategy = "subgradient_feasibility", g_exchange;
    std::string g_out;
    double g_tol = 1e-10, g_lmi_margin = 1e-6;
    int g_max_outer = 200;
    gram->add_option("--system", g_system, "system bundle directory")->required();
    gram->add_option("--strategy", g_strategy, "subgradient_feasibility | constructive_epsilon | external_sdp");
    gram->add_option("--tol", g_tol, "solver tolerance");
    gram->add_option("--max-outer", g_max_outer, "outer iteration budget");
    gram->add_option("--lmi-margin", g_lmi_margin, "LMI feasibility margin");
    gram->add_option("--exchange", g_exchange, "exchange directory for external_sdp");
    gram->add_option("--out", g_out, "output directory")->required();

    // reduce
    auto* reduce = app.add_subcommand("reduce", "Balance and truncate");
    std::string r_system, r_gramians, r_out;
    int r_order = 0;
    double r_tol = 0.0;
    reduce->add_option("--system", r_system)->required();
    reduce->add_option("--gramians", r_gramians)->required();
    auto* opt_order = reduce->add_option("--order", r_order, "truncation order r");
    auto* opt_rtol = reduce->add_option("--tol", r_tol, "tail tolerance driving the order choice");
    reduce->add_option("--out", r_out)->required();

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Evaluate error bounds and preservation certificates");
    std::string b_system, b_gramians, b_reduced, b_out = "bounds.json", b_gamma = "worst_case";
    double b_T = 10.0;
    bounds->add_option("--system", b_system)->required();
    bounds->add_option("--gramians", b_gramians)->required();
    bounds->add_option("--reduced", b_reduced)->required();
    bounds->add_option("--horizon", b_T, "time horizon T");
    bounds->add_option("--gamma-method", b_gamma, "worst_case | operator_norm");
    bounds->add_option("--out", b_out, "output JSON file");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Moment ODE and Monte Carlo experiments");
    std::string s_system, s_reduced, s_gramians, s_mode = "open", s_control = "reference", s_out;
    double s_T = 10.0, s_dt = 1e-3;
    int s_paths = 0;
    std::uint64_t s_seed = 0;
    sim->add_option("--system", s_system)->required();
    sim->add_option("--reduced", s_reduced, "reduced bundle (enables error-system modes)");
    sim->add_option("--gramians", s_gramians, "gramian directory (needed for closed-loop feedback)");
    sim->add_option("--mode", s_mode, "open | closed | reduced-feedback");
    sim->add_option("--control", s_control, "reference | zero | file.csv");
    sim->add_option("--T", s_T);
    sim->add_option("--dt", s_dt);
    sim->add_option("--paths", s_paths, "Monte Carlo paths (0: moments only)");
    sim->add_option("--seed", s_seed);
    sim->add_option("--out", s_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) return cmd_bench(n, alpha, nu, quad_points, out_dir);
        if (gram->parsed()) return cmd_gramians(g_system, g_strategy, g_tol, g_max_outer, g_lmi_margin, g_out, g_exchange);
        if (reduce->parsed()) {
            if (opt_order->count() == 0 && opt_rtol->count() == 0)
                throw InputError("reduce needs --order or --tol");
            return cmd_reduce(r_system, r_gramians,
                              opt_order->count() ? std::optional<int>(r_order) : std::nullopt,
                              opt_rtol->count() ? std::optional<double>(r_tol) : std::nullopt, r_out);
        }
        if (bounds->parsed()) return cmd_bounds(b_system, b_gramians, b_reduced, b_T, b_gamma, b_out);
        if (sim->parsed())
            return cmd_simulate(s_system, s_reduced, s_gramians, s_mode, s_control, s_T, s_dt, s_paths, s_seed, s_out);
    } catch (const OrderSelectionError& e) {
        std::cerr << "order-selection error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 2;
    } catch (const StepSizeError& e) {
        std::cerr << "step-size error: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const AccuracyError& e) {
        std::cerr << "accuracy self-check failed: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
