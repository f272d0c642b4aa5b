#include "lqgbt/balancing.hpp"

#include "lqgbt/operators.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <random>

using namespace lqgbt;

namespace {

std::mt19937& rng() {
    static std::mt19937 gen(11);
    return gen;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> d(0.0, 1.0);
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = d(rng());
    return M;
}

Matrix random_spd(Eigen::Index n) {
    const Matrix G = random_matrix(n, n);
    return Matrix(G * G.transpose() + 0.1 * Matrix::Identity(n, n));
}

StochasticSystem random_system(Eigen::Index n) {
    return StochasticSystem(random_matrix(n, n), {random_matrix(n, n) * 0.2}, random_matrix(n, 1),
                            random_matrix(1, n), Matrix::Identity(1, 1));
}

std::vector<std::complex<double>> sorted_eigs(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, false);
    std::vector<std::complex<double>> v(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
    std::sort(v.begin(), v.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return v;
}

}  // namespace

TEST_CASE("balance diagonal hand example") {
    const auto sys = random_system(2);
    Matrix P = Matrix::Zero(2, 2), Q = Matrix::Zero(2, 2);
    P.diagonal() << 4.0, 1.0;
    Q = P;
    const auto bal = balance(sys, P, Q);
    CHECK(bal.sigma[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(bal.sigma[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((bal.S_b - Matrix::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("identity Gramians balance to an orthogonal transformation") {
    const auto sys = random_system(3);
    const auto bal = balance(sys, Matrix::Identity(3, 3), Matrix::Identity(3, 3));
    CHECK((bal.sigma - Vector::Ones(3)).norm() <= 1e-12);
    CHECK((bal.S_b * bal.S_b.transpose() - Matrix::Identity(3, 3)).norm() <= 1e-10);
}

TEST_CASE("balancing invariants on random SPD pairs") {
    for (int t = 0; t < 6; ++t) {
        const Eigen::Index n = 6;
        const auto sys = random_system(n);
        const Matrix P = random_spd(n);
        const Matrix Q = random_spd(n);
        const auto bal = balance(sys, P, Q);
        const Matrix Sigma = bal.sigma.asDiagonal();
        CHECK((bal.S_b * bal.S_b_inv - Matrix::Identity(n, n)).norm() <= 1e-10 * std::sqrt(double(n)));
        CHECK((bal.S_b * P * bal.S_b.transpose() - Sigma).norm() <= 1e-8 * bal.sigma[0]);
        CHECK((bal.S_b_inv.transpose() * Q * bal.S_b_inv - Sigma).norm() <= 1e-8 * bal.sigma[0]);
        for (Eigen::Index k = 1; k < n; ++k) CHECK(bal.sigma[k] <= bal.sigma[k - 1] * (1.0 + 1e-14));
        CHECK(bal.sigma[n - 1] > 0.0);
    }
}

TEST_CASE("balancing is a similarity action") {
    const Eigen::Index n = 5;
    const auto sys = random_system(n);
    const auto bal = balance(sys, random_spd(n), random_spd(n));
    const auto ev_in = sorted_eigs(sys.A);
    const auto ev_bal = sorted_eigs(bal.A_n);
    for (Eigen::Index k = 0; k < n; ++k) CHECK(std::abs(ev_in[k] - ev_bal[k]) <= 1e-8 * (1.0 + std::abs(ev_in[k])));

    const auto c1 = mean_square_stability(sys);
    const auto c2 = mean_square_stability(bal.balanced_system());
    CHECK(c1.stable == c2.stable);
    CHECK(c1.abscissa == doctest::Approx(c2.abscissa).epsilon(1e-7));
}

TEST_CASE("singular values are invariants of the Gramian transformation law") {
    const Eigen::Index n = 5;
    const auto sys = random_system(n);
    const Matrix P = random_spd(n);
    const Matrix Q = random_spd(n);
    const Matrix S = random_matrix(n, n) + 3.0 * Matrix::Identity(n, n);
    const Matrix Sinv = S.inverse();
    const auto bal1 = balance(sys, P, Q);
    StochasticSystem sys2 = sys;
    sys2.A = S * sys.A * Sinv;
    const auto bal2 = balance(sys2, Matrix(S * P * S.transpose()), Matrix(Sinv.transpose() * Q * Sinv));
    CHECK((bal1.sigma - bal2.sigma).cwiseAbs().maxCoeff() <= 1e-8 * bal1.sigma[0]);
}

TEST_CASE("truncate reads blocks of the balanced realization") {
    const Eigen::Index n = 6;
    const auto sys = random_system(n);
    const auto bal = balance(sys, random_spd(n), random_spd(n));

    SUBCASE("identity truncation") {
        const auto red = truncate(bal, static_cast<int>(n));
        CHECK((red.A_r - bal.A_n).norm() == 0.0);
        CHECK((red.B_r - bal.B_n).norm() == 0.0);
        CHECK((red.C_r - bal.C_n).norm() == 0.0);
    }
    SUBCASE("petrov-galerkin consistency and projector identity") {
        const int r = 3;
        const auto red = truncate(bal, r);
        CHECK((red.A_r - red.restrict_ * sys.A * red.lift).norm() <= 1e-10 * std::max(1.0, red.A_r.norm()));
        CHECK((red.B_r - red.restrict_ * sys.B).norm() <= 1e-12 * std::max(1.0, sys.B.norm()));
        CHECK((red.C_r - sys.C * red.lift).norm() <= 1e-12 * std::max(1.0, sys.C.norm()));
        CHECK((red.N_r[0] - red.restrict_ * sys.N[0] * red.lift).norm() <= 1e-10 * std::max(1.0, sys.N[0].norm()));
        CHECK((red.restrict_ * red.lift - Matrix::Identity(r, r)).norm() <= 1e-10);
        CHECK((red.A_r - bal.A_n.topLeftCorner(r, r)).norm() == 0.0);
    }
}

TEST_CASE("truncate refuses to cut through a singular-value cluster") {
    const auto sys = random_system(3);
    BalancedRealization bal = balance(sys, Matrix::Identity(3, 3), Matrix::Identity(3, 3));
    bal.sigma << 5.0, 2.0, 2.0;
    CHECK_THROWS_AS(truncate(bal, 2), OrderSelectionError);
    try {
        truncate(bal, 2);
    } catch (const OrderSelectionError& e) {
        CHECK(e.suggested_r == 3);
    }
    CHECK_NOTHROW(truncate(bal, 1));
    CHECK_NOTHROW(truncate(bal, 3));
}

TEST_CASE("choose_order follows the tail rule and the gap rule") {
    Vector s3(3);
    s3 << 10.0, 1.0, 1e-6;
    auto sel = choose_order(s3, 1e-4);
    CHECK(sel.r == 2);
    CHECK_FALSE(sel.gap_warning);

    // generous tolerance admits r = 1 when the gap holds
    sel = choose_order(s3, 10.0);
    CHECK(sel.r == 1);

    Vector tied(3);
    tied << 5.0, 2.0, 2.0;
    sel = choose_order(tied, 2.0);  // tail passes at r = 2 but the cut has no gap
    CHECK(sel.r == 3);
    CHECK(sel.gap_warning);
}

TEST_CASE("tail coefficient is monotone and dominated by the plain tail") {
    Vector s(5);
    s << 8.0, 3.0, 0.5, 0.1, 0.01;
    double prev = tail_coefficient(s, 0);
    for (int r = 1; r <= 5; ++r) {
        const double cur = tail_coefficient(s, r);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
        double plain = 0.0;
        for (int k = r; k < 5; ++k) plain += 2.0 * s[k];
        CHECK(cur <= plain + 1e-15);
    }
    CHECK(tail_coefficient(s, 5) == 0.0);
}
