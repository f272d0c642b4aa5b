#include "lqgbt/operators.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

using namespace lqgbt;

namespace {

std::mt19937& rng() {
    static std::mt19937 gen(42);
    return gen;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = d(rng());
    return M;
}

Matrix random_symmetric(Eigen::Index n) { return symmetrize(random_matrix(n, n)); }

Matrix random_stable(Eigen::Index n) {
    Matrix A = random_matrix(n, n);
    Eigen::EigenSolver<Matrix> es(A, false);
    A -= (es.eigenvalues().real().maxCoeff() + 0.5) * Matrix::Identity(n, n);
    return A;
}

StochasticSystem random_system(Eigen::Index n, Eigen::Index q, double noise_scale = 0.2) {
    std::vector<Matrix> N;
    for (Eigen::Index i = 0; i < q; ++i) N.push_back(random_matrix(n, n, noise_scale));
    Matrix K = random_matrix(q, q);
    K = Matrix(K * K.transpose());
    return StochasticSystem(random_stable(n), std::move(N), random_matrix(n, 1), random_matrix(1, n), std::move(K));
}

}  // namespace

TEST_CASE("apply_operator scalar and linearity") {
    const auto sys = StochasticSystem::scalar(-1.0, 1.0, 1.0, 1.0);
    Matrix X(1, 1);
    X << 1.0;
    CHECK(apply_operator(sys, X, false)(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    X << 0.0;
    CHECK(apply_operator(sys, X, false)(0, 0) == 0.0);
}

TEST_CASE("apply_operator reduces to the Lyapunov operator for N = 0") {
    const Eigen::Index n = 4;
    StochasticSystem sys(random_stable(n), {Matrix::Zero(n, n)}, random_matrix(n, 1), random_matrix(1, n),
                         Matrix::Identity(1, 1));
    for (int t = 0; t < 5; ++t) {
        const Matrix X = random_symmetric(n);
        const Matrix expected = sys.A.transpose() * X + X * sys.A;
        CHECK((apply_operator(sys, X, false) - expected).norm() <= 1e-12 * expected.norm());
    }
}

TEST_CASE("apply_operator rejects mismatched operands") {
    const auto sys = StochasticSystem::scalar(-1.0, 0.5, 1.0, 1.0);
    CHECK_THROWS_AS(apply_operator(sys, Matrix::Identity(2, 2), false), InputError);
}

TEST_CASE("adjointness in the trace inner product") {
    const auto sys = random_system(5, 2);
    for (int t = 0; t < 10; ++t) {
        const Matrix X = random_symmetric(5);
        const Matrix Y = random_symmetric(5);
        const double lhs = (apply_operator(sys, X, false) * Y).trace();
        const double rhs = (X * apply_operator(sys, Y, true)).trace();
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
    }
}

TEST_CASE("noise operator is positive on the PSD cone") {
    const auto sys = random_system(5, 2, 0.6);
    for (int t = 0; t < 10; ++t) {
        const Matrix G = random_matrix(5, 5);
        const Matrix X = G * G.transpose();
        const Matrix P = apply_noise_operator(sys, X, false);
        Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * X.norm());
    }
}

TEST_CASE("matricize scalar and Kronecker identities") {
    const auto sys = StochasticSystem::scalar(-1.0, 1.0, 1.0, 1.0);
    const auto mat = matricize(sys, false);
    CHECK(mat.M.rows() == 1);
    CHECK(mat.M(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));

    StochasticSystem id2(Matrix::Identity(2, 2), {Matrix::Zero(2, 2)}, Matrix::Zero(2, 1), Matrix::Zero(1, 2),
                         Matrix::Identity(1, 1));
    const auto mat2 = matricize(id2, false);
    CHECK((mat2.M - 2.0 * Matrix::Identity(4, 4)).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("matricize consistency against apply_operator") {
    for (bool adjoint : {false, true}) {
        const auto sys = random_system(4, 2);
        const auto mat = matricize(sys, adjoint);
        for (int t = 0; t < 20; ++t) {
            const Matrix X = random_symmetric(4);
            Vector vx = Eigen::Map<const Vector>(X.data(), 16);
            const Matrix expected = apply_operator(sys, X, adjoint);
            const Vector got = mat.M * vx;
            CHECK((got - Eigen::Map<const Vector>(expected.data(), 16)).norm() <= 1e-12 * expected.norm());
        }
    }
}

TEST_CASE("adjoint matricization is the transpose") {
    const auto sys = random_system(3, 2);
    const auto fwd = matricize(sys, false);
    const auto adj = matricize(sys, true);
    CHECK((adj.M - fwd.M.transpose()).norm() <= 1e-12 * fwd.M.norm());
}

TEST_CASE("matricize enforces the dense budget") {
    const Eigen::Index n = 151;
    StochasticSystem sys(Matrix::Identity(n, n) * -1.0, {}, Matrix::Zero(n, 1), Matrix::Zero(1, n), Matrix(0, 0));
    CHECK_THROWS_AS(matricize(sys, false), CapacityError);
}

TEST_CASE("symmetric-restricted matricization matches the full abscissa") {
    for (int t = 0; t < 5; ++t) {
        const auto sys = random_system(5, 2, 0.4);
        const auto full = matricize(sys, false);
        Eigen::EigenSolver<Matrix> es(full.M, false);
        const double full_abscissa = es.eigenvalues().real().maxCoeff();
        const auto cert = mean_square_stability(sys);
        CHECK(cert.abscissa == doctest::Approx(full_abscissa).epsilon(1e-8));
    }
}

TEST_CASE("mean-square stability certificates on scalar systems") {
    auto cert = mean_square_stability(StochasticSystem::scalar(-1.0, 1.0, 1.0, 1.0));
    CHECK(cert.abscissa == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(cert.stable);

    cert = mean_square_stability(StochasticSystem::scalar(-0.4, 1.0, 1.0, 1.0));
    CHECK(cert.abscissa == doctest::Approx(0.2).epsilon(1e-12));
    CHECK_FALSE(cert.stable);
}

TEST_CASE("deterministic case: abscissa is twice the dominant real part") {
    const Eigen::Index n = 5;
    const Matrix A = random_stable(n);
    StochasticSystem sys(A, {Matrix::Zero(n, n)}, Matrix::Zero(n, 1), Matrix::Zero(1, n), Matrix::Identity(1, 1));
    Eigen::EigenSolver<Matrix> es(A, false);
    const double expected = 2.0 * es.eigenvalues().real().maxCoeff();
    CHECK(mean_square_stability(sys).abscissa == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("Hautus detectability on scalar systems") {
    auto r = hautus_detectability(StochasticSystem::scalar(-1.0, 0.0, 1.0, 0.0));
    CHECK(r.holds);

    r = hautus_detectability(StochasticSystem::scalar(1.0, 0.0, 1.0, 0.0));
    CHECK_FALSE(r.holds);
    CHECK(r.witness_eigenvalue.real() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.witness(0, 0) > 0.0);

    r = hautus_detectability(StochasticSystem::scalar(1.0, 0.0, 1.0, 1.0));
    CHECK(r.holds);
}

TEST_CASE("Hautus observability finds the hidden mode") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = -1.0;
    A(1, 1) = -2.0;
    Matrix C(1, 2);
    C << 1.0, 0.0;
    StochasticSystem sys(A, {Matrix::Zero(2, 2)}, Matrix::Zero(2, 1), C, Matrix::Identity(1, 1));
    auto r = hautus_observability(sys);
    CHECK_FALSE(r.holds);
    CHECK(r.witness_eigenvalue.real() == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(r.witness(1, 1) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(r.witness(0, 0)) <= 1e-8);

    C << 1.0, 1.0;
    StochasticSystem sys2(A, {Matrix::Zero(2, 2)}, Matrix::Zero(2, 1), C, Matrix::Identity(1, 1));
    CHECK(hautus_observability(sys2).holds);

    CHECK(hautus_observability(StochasticSystem::scalar(-1.0, 0.0, 1.0, 1.0)).holds);
}

TEST_CASE("observable implies detectable") {
    for (int t = 0; t < 8; ++t) {
        const auto sys = random_system(4, 1, 0.3);
        if (hautus_observability(sys).holds) CHECK(hautus_detectability(sys).holds);
    }
}

TEST_CASE("stabilizability probe") {
    SUBCASE("scalar with control authority") {
        const auto res = stabilizability_probe(StochasticSystem::scalar(1.0, 0.0, 1.0, 1.0));
        REQUIRE(res.stabilizable);
        REQUIRE(res.gain.has_value());
        // q solves 2q + 1 - q^2 = 0, so F = -(1 + sqrt(2)) and a + b F = -sqrt(2)
        CHECK((*res.gain)(0, 0) == doctest::Approx(-(1.0 + std::sqrt(2.0))).epsilon(1e-7));
        CHECK(res.closed_loop.abscissa < 0.0);
    }
    SUBCASE("already stable without control") {
        const auto res = stabilizability_probe(StochasticSystem::scalar(-1.0, 0.0, 0.0, 1.0));
        CHECK(res.stabilizable);
    }
    SUBCASE("unstable without control authority") {
        const auto res = stabilizability_probe(StochasticSystem::scalar(1.0, 0.0, 0.0, 1.0));
        CHECK_FALSE(res.stabilizable);
    }
}
