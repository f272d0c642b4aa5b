#include "lqgbt/benchmark.hpp"

#include "lqgbt/operators.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace lqgbt;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite-Simpson oracle, independent of the production quadrature.
template <typename F>
double simpson(double a, double b, int intervals, F&& f) {
    if (intervals % 2) ++intervals;
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int k = 1; k < intervals; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double basis(double z1, double z2, int i, int j) {
    double nrm2 = kPi * kPi;
    if (i > 0) nrm2 *= 0.5;
    if (j > 0) nrm2 *= 0.5;
    return std::cos(i * z1) * std::cos(j * z2) / std::sqrt(nrm2);
}

}  // namespace

TEST_CASE("first-mode entries have their analytic values") {
    HeatBenchmarkConfig cfg;
    cfg.n = 6;
    const auto sys = build_heat_system(cfg);
    CHECK(sys.B(0, 0) == doctest::Approx(kPi / 4.0).epsilon(1e-14));
    CHECK(sys.C(0, 0) == doctest::Approx(1.0 / kPi).epsilon(1e-14));
}

TEST_CASE("drift eigenvalues follow the ordered Laplacian spectrum") {
    HeatBenchmarkConfig cfg;
    cfg.n = 6;
    const auto sys = build_heat_system(cfg);
    Vector expected(6);
    expected << 0.0, -0.2, -0.2, -0.4, -0.8, -0.8;  // alpha * -(i^2 + j^2)
    CHECK((sys.A.diagonal() - expected).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((sys.A - Matrix(sys.A.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("mode ordering breaks ties lexicographically") {
    const auto modes = heat_mode_indices(6);
    CHECK(modes[0] == std::make_pair(0, 0));
    CHECK(modes[1] == std::make_pair(0, 1));
    CHECK(modes[2] == std::make_pair(1, 0));
    CHECK(modes[3] == std::make_pair(1, 1));
    CHECK(modes[4] == std::make_pair(0, 2));
    CHECK(modes[5] == std::make_pair(2, 0));
}

TEST_CASE("eigenvalue multiplicities match two-square representation counts") {
    const auto modes = heat_mode_indices(36);
    std::map<int, int> counts;
    for (const auto& [i, j] : modes) counts[i * i + j * j]++;
    CHECK(counts[0] == 1);
    CHECK(counts[1] == 2);
    CHECK(counts[2] == 1);
    CHECK(counts[25] == 3);  // (0,5), (3,4), (4,3) -- (5,0) may fall outside the first 36
}

TEST_CASE("basis is orthonormal under an independent quadrature") {
    HeatBenchmarkConfig cfg;
    cfg.n = 8;
    const auto modes = heat_mode_indices(cfg.n);
    for (int a = 0; a < cfg.n; ++a)
        for (int b = a; b < cfg.n; ++b) {
            const auto [i1, j1] = modes[a];
            const auto [i2, j2] = modes[b];
            // separable product integrates axis by axis
            const double g1 = simpson(0.0, kPi, 2000, [&](double z) { return std::cos(i1 * z) * std::cos(i2 * z); });
            const double g2 = simpson(0.0, kPi, 2000, [&](double z) { return std::cos(j1 * z) * std::cos(j2 * z); });
            double nrm = 1.0;
            {
                double n1 = kPi * kPi, n2 = kPi * kPi;
                if (i1 > 0) n1 *= 0.5;
                if (j1 > 0) n1 *= 0.5;
                if (i2 > 0) n2 *= 0.5;
                if (j2 > 0) n2 *= 0.5;
                nrm = std::sqrt(n1 * n2);
            }
            const double gram = g1 * g2 / nrm;
            CHECK(std::abs(gram - (a == b ? 1.0 : 0.0)) <= 1e-10);
        }
}

TEST_CASE("analytic input and output maps agree with quadrature") {
    HeatBenchmarkConfig cfg;
    cfg.n = 8;
    const auto sys = build_heat_system(cfg);
    const auto modes = heat_mode_indices(cfg.n);
    for (int k = 0; k < cfg.n; ++k) {
        const auto [i, j] = modes[k];
        const double inv_norm = basis(0.0, 0.0, i, j);  // cos(0)cos(0)/||f_ij|| = 1/||f_ij||
        const double b1 = simpson(kPi / 4.0, 3.0 * kPi / 4.0, 2000, [&](double z) { return std::cos(i * z); });
        const double b2 = simpson(kPi / 4.0, 3.0 * kPi / 4.0, 2000, [&](double z) { return std::cos(j * z); });
        CHECK(std::abs(sys.B(k, 0) - b1 * b2 * inv_norm) <= 1e-10);

        const double f1 = simpson(0.0, kPi, 2000, [&](double z) { return std::cos(i * z); });
        const double f2 = simpson(0.0, kPi, 2000, [&](double z) { return std::cos(j * z); });
        const double cq = 4.0 / (3.0 * kPi * kPi) * (f1 * f2 - b1 * b2) * inv_norm;
        CHECK(std::abs(sys.C(0, k) - cq) <= 1e-10);
    }
}

TEST_CASE("noise coupling is symmetric and matches an independent quadrature") {
    HeatBenchmarkConfig cfg;
    cfg.n = 6;
    const auto sys = build_heat_system(cfg);
    CHECK((sys.N[0] - sys.N[0].transpose()).cwiseAbs().maxCoeff() <= 1e-12 * sys.N[0].cwiseAbs().maxCoeff());

    const auto modes = heat_mode_indices(cfg.n);
    for (int k = 0; k < cfg.n; ++k)
        for (int i = k; i < cfg.n; ++i) {
            const auto [k1, k2] = modes[k];
            const auto [i1, i2] = modes[i];
            const double a1 = simpson(0.0, kPi / 2.0, 4000, [&](double z) {
                return std::exp(-std::abs(z - kPi / 2.0)) * std::cos(k1 * z) * std::cos(i1 * z);
            });
            const double a2 = simpson(kPi / 2.0, kPi, 4000, [&](double z) {
                return std::exp(-std::abs(z - kPi / 2.0)) * std::cos(k1 * z) * std::cos(i1 * z);
            });
            const double a3 = simpson(0.0, kPi, 4000, [&](double z) {
                return std::exp(-z) * std::cos(k2 * z) * std::cos(i2 * z);
            });
            double n1 = kPi * kPi, n2 = kPi * kPi;
            if (k1 > 0) n1 *= 0.5;
            if (k2 > 0) n1 *= 0.5;
            if (i1 > 0) n2 *= 0.5;
            if (i2 > 0) n2 *= 0.5;
            const double expected = cfg.nu * (a1 + a2) * a3 / std::sqrt(n1 * n2);
            CHECK(std::abs(sys.N[0](k, i) - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
        }
}

TEST_CASE("reference input values and square integrability") {
    CHECK(reference_input(0.0) == doctest::Approx(1.0));
    CHECK(reference_input(kPi / 5.0) == doctest::Approx(-1.0 / (1.0 + kPi / 5.0)).epsilon(1e-14));
    for (double T : {1.0, 5.0, 20.0}) {
        const double tail = simpson(T, T + 2000.0, 2000000, [](double t) {
            const double u = reference_input(t);
            return u * u;
        });
        CHECK(tail <= 1.0 / T);
    }
}

TEST_CASE("config invariants are enforced") {
    HeatBenchmarkConfig cfg;
    cfg.quad_points = 8;
    CHECK_THROWS_AS(build_heat_system(cfg), InputError);
    cfg = {};
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(build_heat_system(cfg), InputError);
}

TEST_CASE("benchmark is unstable yet detectable and stabilizable") {
    HeatBenchmarkConfig cfg;  // n = 36 default
    const auto sys = build_heat_system(cfg);
    const auto cert = mean_square_stability(sys);
    CHECK_FALSE(cert.stable);
    CHECK(cert.abscissa > 0.0);
    CHECK(hautus_detectability(sys).holds);
    CHECK(stabilizability_probe(sys).stabilizable);
}
