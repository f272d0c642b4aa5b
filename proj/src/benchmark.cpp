#include "lqgbt/benchmark.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lqgbt {

namespace {

constexpr double kPi = std::numbers::pi;

struct GaussLegendre {
    Vector nodes;    // on [-1, 1]
    Vector weights;
};

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights from the
// first eigenvector components.
GaussLegendre gauss_legendre(int p) {
    Matrix J = Matrix::Zero(p, p);
    for (int k = 1; k < p; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    if (es.info() != Eigen::Success) throw NumericalError("Gauss-Legendre node computation failed");
    GaussLegendre gl;
    gl.nodes = es.eigenvalues();
    gl.weights.resize(p);
    for (int k = 0; k < p; ++k) gl.weights[k] = 2.0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    return gl;
}

// integral of f over [a, b] with p-point Gauss-Legendre
template <typename F>
double integrate(const GaussLegendre& gl, double a, double b, F&& f) {
    const double h = 0.5 * (b - a);
    const double c = 0.5 * (a + b);
    double s = 0.0;
    for (Eigen::Index k = 0; k < gl.nodes.size(); ++k) s += gl.weights[k] * f(c + h * gl.nodes[k]);
    return h * s;
}

// int_{pi/4}^{3pi/4} cos(i z) dz
double cos_integral_centre(int i) {
    if (i == 0) return kPi / 2.0;
    return (std::sin(3.0 * i * kPi / 4.0) - std::sin(i * kPi / 4.0)) / i;
}

// int_0^pi cos(i z) dz
double cos_integral_full(int i) { return i == 0 ? kPi : 0.0; }

// ||f_ij||_H^2 = pi^2 * (1/2)^[i>0] * (1/2)^[j>0]
double basis_norm(int i, int j) {
    double v = kPi * kPi;
    if (i > 0) v *= 0.5;
    if (j > 0) v *= 0.5;
    return std::sqrt(v);
}

// 1-D factors of <g h_i, h_k>_H for the separable g(z) = e^{-|z1 - pi/2|} e^{-z2}.
// The z1 factor is split at the kink.
Matrix g_axis1_table(const GaussLegendre& gl, int maxfreq) {
    Matrix G(maxfreq + 1, maxfreq + 1);
    for (int a = 0; a <= maxfreq; ++a)
        for (int b = a; b <= maxfreq; ++b) {
            auto f = [&](double z) { return std::exp(-std::abs(z - kPi / 2.0)) * std::cos(a * z) * std::cos(b * z); };
            const double v = integrate(gl, 0.0, kPi / 2.0, f) + integrate(gl, kPi / 2.0, kPi, f);
            G(a, b) = v;
            G(b, a) = v;
        }
    return G;
}

Matrix g_axis2_table(const GaussLegendre& gl, int maxfreq) {
    Matrix G(maxfreq + 1, maxfreq + 1);
    for (int a = 0; a <= maxfreq; ++a)
        for (int b = a; b <= maxfreq; ++b) {
            auto f = [&](double z) { return std::exp(-z) * std::cos(a * z) * std::cos(b * z); };
            const double v = integrate(gl, 0.0, kPi, f);
            G(a, b) = v;
            G(b, a) = v;
        }
    return G;
}

Matrix assemble_noise(const std::vector<std::pair<int, int>>& modes, double nu, int quad_points) {
    int maxfreq = 0;
    for (const auto& [i, j] : modes) maxfreq = std::max({maxfreq, i, j});
    const GaussLegendre gl = gauss_legendre(quad_points);
    const Matrix G1 = g_axis1_table(gl, maxfreq);
    const Matrix G2 = g_axis2_table(gl, maxfreq);
    const int n = static_cast<int>(modes.size());
    Matrix N1(n, n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
            const auto [k1, k2] = modes[k];
            const auto [i1, i2] = modes[i];
            N1(k, i) = nu * G1(i1, k1) * G2(i2, k2) / (basis_norm(i1, i2) * basis_norm(k1, k2));
        }
    return N1;
}

}  // namespace

void HeatBenchmarkConfig::validate() const {
    if (n < 1) throw InputError("benchmark requires n >= 1");
    if (alpha <= 0.0) throw InputError("benchmark requires alpha > 0");
    if (nu < 0.0) throw InputError("benchmark requires nu >= 0");
    if (quad_points < 16) throw InputError("benchmark requires quad_points >= 16");
}

std::vector<std::pair<int, int>> heat_mode_indices(int n) {
    if (n < 1) throw InputError("n >= 1 required");
    const int limit = static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(n)))) + 2;
    std::vector<std::pair<int, int>> modes;
    for (int i = 0; i <= limit; ++i)
        for (int j = 0; j <= limit; ++j) modes.emplace_back(i, j);
    std::sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
        const long ra = static_cast<long>(a.first) * a.first + static_cast<long>(a.second) * a.second;
        const long rb = static_cast<long>(b.first) * b.first + static_cast<long>(b.second) * b.second;
        if (ra != rb) return ra < rb;
        return a < b;
    });
    modes.resize(n);
    return modes;
}

StochasticSystem build_heat_system(const HeatBenchmarkConfig& cfg) {
    cfg.validate();
    const auto modes = heat_mode_indices(cfg.n);
    const int n = cfg.n;

    Matrix A = Matrix::Zero(n, n);
    Matrix B(n, 1);
    Matrix C(1, n);
    for (int k = 0; k < n; ++k) {
        const auto [i, j] = modes[k];
        A(k, k) = -cfg.alpha * (static_cast<double>(i) * i + static_cast<double>(j) * j);
        const double nrm = basis_norm(i, j);
        B(k, 0) = cos_integral_centre(i) * cos_integral_centre(j) / nrm;
        const double full = cos_integral_full(i) * cos_integral_full(j) / nrm;
        C(0, k) = 4.0 / (3.0 * kPi * kPi) * (full - B(k, 0));
    }

    Matrix N1 = assemble_noise(modes, cfg.nu, cfg.quad_points);
    const Matrix N1_check = assemble_noise(modes, cfg.nu, 2 * cfg.quad_points);
    const double scale = std::max(N1_check.cwiseAbs().maxCoeff(), 1.0);
    if ((N1 - N1_check).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        std::ostringstream os;
        os << "noise-coupling quadrature self-check failed: max deviation "
           << (N1 - N1_check).cwiseAbs().maxCoeff() << " at " << cfg.quad_points << " vs " << 2 * cfg.quad_points
           << " points";
        throw AccuracyError(os.str());
    }

    Matrix K(1, 1);
    K << 1.0;
    return StochasticSystem(std::move(A), {std::move(N1)}, std::move(B), std::move(C), std::move(K));
}

double reference_input(double t) { return std::cos(5.0 * t) / (t + 1.0); }

}  // namespace lqgbt
