#include "lqgbt/io.hpp"

#include "lqgbt/benchmark.hpp"
#include "lqgbt/solvers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace lqgbt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("lqgbt_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("matrix market round trip is exact") {
    std::mt19937 gen(5);
    std::normal_distribution<double> d;
    Matrix M(4, 3);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) M(i, j) = d(gen) * std::pow(10.0, (i - 2) * 40);
    M(0, 0) = 0.0;
    M(1, 1) = -1.0 / 3.0;
    const auto dir = temp_dir("mtx");
    io::write_matrix_market(dir / "m.mtx", M);
    const Matrix R = io::read_matrix_market(dir / "m.mtx");
    REQUIRE(R.rows() == 4);
    REQUIRE(R.cols() == 3);
    CHECK((R - M).norm() == 0.0);
}

TEST_CASE("system bundle saves, loads, and re-saves byte for byte") {
    HeatBenchmarkConfig cfg;
    cfg.n = 5;
    const auto sys = build_heat_system(cfg);
    const auto d1 = temp_dir("bundle1");
    const auto d2 = temp_dir("bundle2");
    io::BundleMetadata meta{"bench", 7, {{"alpha", cfg.alpha}, {"nu", cfg.nu}}};
    io::save_system_bundle(d1, sys, meta);
    const auto loaded = io::load_system_bundle(d1);
    CHECK((loaded.A - sys.A).norm() == 0.0);
    CHECK((loaded.B - sys.B).norm() == 0.0);
    CHECK((loaded.C - sys.C).norm() == 0.0);
    CHECK((loaded.N[0] - sys.N[0]).norm() == 0.0);
    CHECK((loaded.K - sys.K).norm() == 0.0);

    io::save_system_bundle(d2, loaded, meta);
    for (const char* f : {"manifest.json", "A.mtx", "B.mtx", "C.mtx", "N1.mtx"})
        CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("manifest dimension mismatches are input errors") {
    HeatBenchmarkConfig cfg;
    cfg.n = 3;
    const auto sys = build_heat_system(cfg);
    const auto dir = temp_dir("badbundle");
    io::save_system_bundle(dir, sys, {});
    io::write_matrix_market(dir / "B.mtx", Matrix::Zero(2, 1));
    CHECK_THROWS_AS(io::load_system_bundle(dir), InputError);
}

TEST_CASE("reduced bundle round trip") {
    io::ReducedBundle rb;
    HeatBenchmarkConfig cfg;
    cfg.n = 4;
    rb.reduced = build_heat_system(cfg);
    rb.lift = Matrix::Identity(6, 4);
    rb.restrict_ = Matrix::Identity(4, 6);
    rb.sigma_full = Vector::LinSpaced(6, 6.0, 1.0);
    rb.r = 4;
    const auto dir = temp_dir("reduced");
    io::save_reduced_bundle(dir, rb);
    const auto back = io::load_reduced_bundle(dir);
    CHECK(back.r == 4);
    CHECK((back.lift - rb.lift).norm() == 0.0);
    CHECK((back.restrict_ - rb.restrict_).norm() == 0.0);
    CHECK((back.sigma_full - rb.sigma_full).norm() == 0.0);
    CHECK((back.reduced.A - rb.reduced.A).norm() == 0.0);
}

TEST_CASE("LMI exchange emits data that round-trips through ingestion") {
    const auto sys = StochasticSystem::scalar(-1.0, 0.0, 1.0, 1.0);
    const auto dir = temp_dir("lmi");
    io::write_reachability_lmi(dir, sys);
    CHECK(fs::exists(dir / "lmi.json"));
    CHECK(fs::exists(dir / "A.mtx"));
    CHECK(fs::exists(dir / "K.mtx"));

    // play the external solver: write a feasible X and ingest it
    Matrix X(1, 1);
    X << 0.5;
    io::write_matrix_market(dir / "X.mtx", X);
    const auto loaded_sys = io::load_system_bundle(dir);
    const auto res = ingest_reachability_solution(loaded_sys, io::read_matrix_market(dir / "X.mtx"));
    CHECK(res.margin <= 0.0);
    CHECK(res.P(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("csv writer emits aligned columns") {
    const auto dir = temp_dir("csv");
    Vector t(3), v(3);
    t << 0.0, 0.5, 1.0;
    v << 1.0, 2.0, 3.0;
    io::write_csv(dir / "series.csv", {"t", "value"}, {t, v});
    const std::string text = slurp(dir / "series.csv");
    CHECK(text.rfind("t,value\n0,1\n", 0) == 0);
    CHECK_THROWS_AS(io::write_csv(dir / "bad.csv", {"a"}, {t, v}), InputError);
}
