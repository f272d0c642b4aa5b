#include "lqgbt/analysis.hpp"

#include "lqgbt/benchmark.hpp"
#include "lqgbt/solvers.hpp"

#include <doctest.h>

#include <random>

using namespace lqgbt;

namespace {

std::mt19937& rng() {
    static std::mt19937 gen(23);
    return gen;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = d(rng());
    return M;
}

StochasticSystem small_stable_system(Eigen::Index n) {
    StochasticSystem sys(random_matrix(n, n) - 2.5 * Matrix::Identity(n, n), {random_matrix(n, n, 0.2)},
                         random_matrix(n, 1), random_matrix(1, n), Matrix::Identity(1, 1));
    while (!mean_square_stability(sys).stable) sys.A -= 0.25 * Matrix::Identity(n, n);
    return sys;
}

ReducedModel scalar_reduced(double a, double b, double c, double n1, double sigma) {
    ReducedModel red;
    red.A_r = Matrix::Constant(1, 1, a);
    red.B_r = Matrix::Constant(1, 1, b);
    red.C_r = Matrix::Constant(1, 1, c);
    red.N_r = {Matrix::Constant(1, 1, n1)};
    red.K = Matrix::Identity(1, 1);
    red.sigma_r = Vector::Constant(1, sigma);
    red.lift = Matrix::Identity(1, 1);
    red.restrict_ = Matrix::Identity(1, 1);
    red.r = 1;
    return red;
}

}  // namespace

TEST_CASE("a-priori bound formulas") {
    Vector sigma(3);
    sigma << 1.0, 1e-3, 1e-4;
    CHECK(apriori_bound_finite(sigma, 3, 1.0, 0.5) == 0.0);
    const double expected = 2.0 * (1e-3 / std::sqrt(1.0 + 1e-6) + 1e-4 / std::sqrt(1.0 + 1e-8));
    CHECK(apriori_bound_finite(sigma, 1, 1.0, 0.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(2.1999990e-3).epsilon(1e-6));
    CHECK(apriori_bound_infinite(sigma, 1, 2.0) == doctest::Approx(2.0 * expected).epsilon(1e-12));
    CHECK_THROWS_AS(apriori_bound_finite(sigma, 1, -1.0, 0.0), InputError);
}

TEST_CASE("feedback bound and its identity with the finite-horizon bound") {
    Vector sigma(4);
    sigma << 5.0, 1.0, 0.1, 0.01;
    CHECK(feedback_bound(sigma, 2, 0.0) == 0.0);
    CHECK(feedback_bound(sigma, 2, 3.0) == doctest::Approx(3.0 * tail_coefficient(sigma, 2)).epsilon(1e-14));
    // Cor-5.3-style identity: J_T + terminal = ||u1||^2 makes both bounds equal
    const double norm_u1 = 1.7;
    CHECK(feedback_bound(sigma, 2, norm_u1) ==
          doctest::Approx(apriori_bound_finite(sigma, 2, norm_u1 * norm_u1 * 0.25, norm_u1 * norm_u1 * 0.75))
              .epsilon(1e-12));
}

TEST_CASE("open-loop bound is linear in gamma") {
    CHECK(open_loop_bound(0.0, 0.37) == doctest::Approx(0.37));
    CHECK(open_loop_bound(2.0, 0.01) == doctest::Approx(0.03).epsilon(1e-14));
    CHECK(open_loop_bound(3.0, 0.01) > open_loop_bound(2.0, 0.01));
}

TEST_CASE("weighted bound uses the plain singular-value tail") {
    Vector sigma(3);
    sigma << 1.0, 0.1, 0.05;
    CHECK(weighted_bound(sigma, 3, 1.0) == 0.0);
    CHECK(weighted_bound(sigma, 1, 1.0) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("hat ordering preserves the ordering of singular values") {
    Vector sigma(6);
    sigma << 9.0, 4.0, 1.0, 0.5, 0.1, 0.001;
    ErrorBoundReport rep;
    rep.hat_sigma.resize(sigma.size());
    for (Eigen::Index k = 0; k < sigma.size(); ++k)
        rep.hat_sigma[k] = sigma[k] / std::sqrt(1.0 + sigma[k] * sigma[k]);
    for (Eigen::Index k = 1; k < sigma.size(); ++k) {
        CHECK(rep.hat_sigma[k - 1] > rep.hat_sigma[k]);
        CHECK(rep.hat_sigma[k] < 1.0);
    }
}

TEST_CASE("gamma worst case") {
    auto red = scalar_reduced(-1.0, 0.0, 1.0, 0.0, 1.0);
    SimulationConfig cfg;
    CHECK(gamma_T(red, 2.0, GammaMethod::WorstCase, cfg).value == doctest::Approx(1.0));  // b_r = 0

    red.B_r = Matrix::Constant(1, 1, std::sqrt(0.5));  // b_r = 0.5 * sigma = 0.5
    CHECK(gamma_T(red, 2.0, GammaMethod::WorstCase, cfg).value == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("gamma operator norm approaches the deterministic L2 gain") {
    // scalar deterministic system a = -1, b = c = 1 has H-infinity norm 1
    const auto red = scalar_reduced(-1.0, 1.0, 1.0, 0.0, 1.0);
    SimulationConfig cfg;
    cfg.dt = 5e-3;
    const auto est = gamma_T(red, 40.0, GammaMethod::OperatorNorm, cfg);
    CHECK(est.value == doctest::Approx(1.0).epsilon(0.02));
    CHECK(est.dt_used == doctest::Approx(5e-3));

    const auto wc = gamma_T(red, 40.0, GammaMethod::WorstCase, cfg);
    CHECK(est.value <= wc.value);
}

TEST_CASE("gamma operator norm with infinite horizon needs stability") {
    auto red = scalar_reduced(0.5, 1.0, 1.0, 0.0, 1.0);  // unstable
    SimulationConfig cfg;
    cfg.dt = 1e-2;
    CHECK_THROWS_AS(gamma_T(red, std::numeric_limits<double>::infinity(), GammaMethod::OperatorNorm, cfg), InputError);

    red.A_r = Matrix::Constant(1, 1, -1.0);
    const auto est = gamma_T(red, std::numeric_limits<double>::infinity(), GammaMethod::OperatorNorm, cfg);
    CHECK(est.value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("error bound report fields are recomputable") {
    const auto sys = small_stable_system(4);
    const auto pair = compute_gramian_pair(sys);
    const auto bal = balance(sys, pair.P, pair.Q);
    const auto red = truncate(bal, 2);
    const auto rep = make_error_bound_report(bal.sigma, 2, sys, pair.P, pair.Q, red, 0.0, 10.0);

    CHECK(rep.tail_coefficient == doctest::Approx(tail_coefficient(bal.sigma, 2)).epsilon(1e-12));
    CHECK(rep.tail_coefficient <= rep.plain_tail);
    CHECK(rep.beta == doctest::Approx(std::max(weighted_gain(sys.B.transpose(), pair.Q), weighted_gain(sys.C, pair.P)))
                          .epsilon(1e-12));
    CHECK(rep.b == doctest::Approx(weighted_gain(sys.B.transpose(), pair.Q)).epsilon(1e-12));
    CHECK(rep.b_r ==
          doctest::Approx(weighted_gain(red.B_r.transpose(), Matrix(red.sigma_r.asDiagonal()))).epsilon(1e-12));
}

TEST_CASE("energy estimates on the scalar closed forms") {
    // a = -1, b = 1, c = 1, no noise: Q = sqrt(2) - 1 satisfies q^2 + 2q - 1 = 0
    const auto sys = StochasticSystem::scalar(-1.0, 0.0, 1.0, 1.0);
    const double q = std::sqrt(2.0) - 1.0;
    Matrix P(1, 1), Q(1, 1);
    P << 2.0;  // feasible reachability Gramian (X = 1/2)
    Q << q;
    SimulationConfig cfg;
    cfg.dt = 1e-3;
    const auto rep = energy_estimate_check(sys, P, Q, 0, 8.0, cfg, [](double t) {
        Vector u(1);
        u << reference_input(t);
        return u;
    });
    CHECK(rep.lambda_Q == doctest::Approx(q).epsilon(1e-12));
    CHECK(rep.part_a_ok);
    CHECK(rep.part_b_ok);
    CHECK(rep.closed_loop_rel_gap <= 5e-3);
    CHECK(rep.part_c_ok);
    // weighted open-loop energy has the closed form (1 - e^{-(q+2)T}) / (q + 2)
    const double expected_c = (1.0 - std::exp(-(q + 2.0) * 8.0)) / (q + 2.0);
    CHECK(rep.weighted_output_energy == doctest::Approx(expected_c).epsilon(1e-4));
}

TEST_CASE("preservation certificates pass on a small reduced model") {
    const auto sys = small_stable_system(5);
    const auto pair = compute_gramian_pair(sys);
    const auto bal = balance(sys, pair.P, pair.Q);
    const auto red = truncate(bal, 2);
    const auto cert = preservation_certificates(sys, bal, red);
    CHECK(cert.reduced_closed_loop.stable);
    CHECK(cert.reduced_detectable);
    CHECK(cert.typeII_margin_sigma <= 1e-8 * cert.scale_sigma);
    CHECK(cert.typeII_margin_upsilon <= 1e-8 * cert.scale_upsilon);
    CHECK(cert.all_pass());
}

TEST_CASE("full-order certificate equals the solver certificate") {
    const auto sys = small_stable_system(4);
    const auto pair = compute_gramian_pair(sys);
    const auto bal = balance(sys, pair.P, pair.Q);
    const auto red = truncate(bal, 4);
    const auto cert = preservation_certificates(sys, bal, red);
    CHECK(cert.reduced_closed_loop.stable == pair.closed_loop_certificate.stable);
    CHECK(cert.reduced_closed_loop.abscissa ==
          doctest::Approx(pair.closed_loop_certificate.abscissa).epsilon(1e-6));
}

TEST_CASE("deterministic sub-case recovers the classical closed-loop fact") {
    StochasticSystem sys(random_matrix(4, 4), {Matrix::Zero(4, 4)}, random_matrix(4, 1), random_matrix(1, 4),
                         Matrix::Identity(1, 1));
    const auto pair = compute_gramian_pair(sys);
    const auto bal = balance(sys, pair.P, pair.Q);
    const auto red = truncate(bal, 2);
    const auto cert = preservation_certificates(sys, bal, red);
    CHECK(cert.reduced_closed_loop.stable);
    Eigen::EigenSolver<Matrix> es(
        Matrix(red.A_r - red.B_r * red.B_r.transpose() * Matrix(red.sigma_r.asDiagonal())), false);
    CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
}
