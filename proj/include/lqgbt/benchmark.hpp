#pragma once

#include "lqgbt/types.hpp"

namespace lqgbt {

/// Spectral Galerkin discretization of the 2D stochastic heat equation on
/// [0, pi]^2 with Neumann boundary conditions, controlled on the centre
/// square and observed through the mean temperature outside it.
struct HeatBenchmarkConfig {
    int n = 36;            // state dimension (number of Laplacian eigenmodes kept)
    double alpha = 0.2;    // diffusion coefficient
    double nu = 2.0;       // noise intensity
    int quad_points = 64;  // Gauss-Legendre points per axis for the noise coupling

    void validate() const;
};

/// Builds the benchmark system (single Wiener channel, K = [1]). Entries of B
/// and C are analytic cosine integrals; the noise coupling N_1 is assembled by
/// tensor-product Gauss-Legendre quadrature and self-checked against a grid
/// with twice the points.
StochasticSystem build_heat_system(const HeatBenchmarkConfig& cfg);

/// Square-integrable test input cos(5 t) / (t + 1).
double reference_input(double t);

/// Laplacian mode indices (i, j) kept for state dimension n, sorted by
/// ascending i^2 + j^2 with lexicographic tie-breaking.
std::vector<std::pair<int, int>> heat_mode_indices(int n);

}  // namespace lqgbt
