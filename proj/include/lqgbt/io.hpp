#pragma once

#include "lqgbt/types.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace lqgbt::io {

/// Dense Matrix Market array-format writer with canonical %.17g formatting,
/// so that load-then-save round-trips byte-for-byte.
void write_matrix_market(const std::filesystem::path& path, const Matrix& M);
Matrix read_matrix_market(const std::filesystem::path& path);

/// On-disk system bundle: manifest.json plus A.mtx, B.mtx, C.mtx, N1.mtx...
struct BundleMetadata {
    std::string generator;
    std::uint64_t seed = 0;
    std::map<std::string, double> params;
};

void save_system_bundle(const std::filesystem::path& dir, const StochasticSystem& sys, const BundleMetadata& meta = {});
StochasticSystem load_system_bundle(const std::filesystem::path& dir);

/// Reduced-model bundle: reduced matrices plus lift/restrict maps and sigma.csv
/// holding every singular value of the full-order pair.
struct ReducedBundle {
    StochasticSystem reduced;
    Matrix lift;
    Matrix restrict_;
    Vector sigma_full;
    int r = 0;
};

void save_reduced_bundle(const std::filesystem::path& dir, const ReducedBundle& rb);
ReducedBundle load_reduced_bundle(const std::filesystem::path& dir);

/// LMI exchange for the external_sdp strategy: system data as Matrix Market
/// files plus lmi.json naming block sizes, the objective, and where the
/// solved X = P^{-1} goes.
void write_reachability_lmi(const std::filesystem::path& dir, const StochasticSystem& sys);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<Vector>& series);

std::string format_double(double v);

}  // namespace lqgbt::io
