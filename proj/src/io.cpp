#include "lqgbt/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lqgbt::io {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_matrix_market(const std::filesystem::path& path, const Matrix& M) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    os << "%%MatrixMarket matrix array real general\n";
    os << M.rows() << " " << M.cols() << "\n";
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        for (Eigen::Index i = 0; i < M.rows(); ++i) os << format_double(M(i, j)) << "\n";
    if (!os) throw InputError("write failed for " + path.string());
}

Matrix read_matrix_market(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw InputError(path.string() + " is not a Matrix Market file");
    {
        std::istringstream hs(line);
        std::string mm, object, format, field, symmetry;
        hs >> mm >> object >> format >> field >> symmetry;
        if (object != "matrix" || format != "array" || field != "real" || symmetry != "general")
            throw InputError(path.string() + ": only 'matrix array real general' is supported");
    }
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    Eigen::Index rows = 0, cols = 0;
    {
        std::istringstream ds(line);
        if (!(ds >> rows >> cols) || rows < 0 || cols < 0) throw InputError(path.string() + ": bad dimension line");
    }
    Matrix M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            double v;
            if (!(is >> v)) throw InputError(path.string() + ": truncated data section");
            M(i, j) = v;
        }
    return M;
}

namespace {

json k_matrix_to_json(const Matrix& K) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < K.cols(); ++j) row.push_back(K(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix k_matrix_from_json(const json& j) {
    const auto rows = j.size();
    Matrix K(rows, rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != rows) throw InputError("manifest K must be square");
        for (std::size_t c = 0; c < rows; ++c) K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return K;
}

void dump_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    os << j.dump(2) << "\n";
}

json parse_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace

void save_system_bundle(const std::filesystem::path& dir, const StochasticSystem& sys, const BundleMetadata& meta) {
    sys.validate();
    std::filesystem::create_directories(dir);
    write_matrix_market(dir / "A.mtx", sys.A);
    write_matrix_market(dir / "B.mtx", sys.B);
    write_matrix_market(dir / "C.mtx", sys.C);
    json files = {{"A", "A.mtx"}, {"B", "B.mtx"}, {"C", "C.mtx"}};
    json nfiles = json::array();
    for (Eigen::Index i = 0; i < sys.q(); ++i) {
        const std::string name = "N" + std::to_string(i + 1) + ".mtx";
        write_matrix_market(dir / name, sys.N[i]);
        nfiles.push_back(name);
    }
    files["N"] = nfiles;
    json manifest = {
        {"n", sys.n()},   {"m", sys.m()},       {"p", sys.p()},
        {"q", sys.q()},   {"K", k_matrix_to_json(sys.K)}, {"files", files},
        {"metadata", {{"generator", meta.generator}, {"seed", meta.seed}, {"params", meta.params}}},
    };
    dump_json(dir / "manifest.json", manifest);
}

StochasticSystem load_system_bundle(const std::filesystem::path& dir) {
    const json manifest = parse_json(dir / "manifest.json");
    const auto& files = manifest.at("files");
    Matrix A = read_matrix_market(dir / files.at("A").get<std::string>());
    Matrix B = read_matrix_market(dir / files.at("B").get<std::string>());
    Matrix C = read_matrix_market(dir / files.at("C").get<std::string>());
    std::vector<Matrix> N;
    for (const auto& f : files.at("N")) N.push_back(read_matrix_market(dir / f.get<std::string>()));
    Matrix K = k_matrix_from_json(manifest.at("K"));
    StochasticSystem sys(std::move(A), std::move(N), std::move(B), std::move(C), std::move(K));
    const auto expect = [&](const char* key, Eigen::Index got) {
        if (manifest.at(key).get<Eigen::Index>() != got)
            throw InputError(std::string("manifest ") + key + " does not match matrix files");
    };
    expect("n", sys.n());
    expect("m", sys.m());
    expect("p", sys.p());
    expect("q", sys.q());
    return sys;
}

void save_reduced_bundle(const std::filesystem::path& dir, const ReducedBundle& rb) {
    std::filesystem::create_directories(dir);
    save_system_bundle(dir, rb.reduced, {"reduce", 0, {{"r", static_cast<double>(rb.r)}}});
    write_matrix_market(dir / "Vr.mtx", rb.lift);
    write_matrix_market(dir / "Wr.mtx", rb.restrict_);
    std::ofstream os(dir / "sigma.csv");
    os << "k,sigma\n";
    for (Eigen::Index k = 0; k < rb.sigma_full.size(); ++k)
        os << (k + 1) << "," << format_double(rb.sigma_full[k]) << "\n";
}

ReducedBundle load_reduced_bundle(const std::filesystem::path& dir) {
    ReducedBundle rb;
    rb.reduced = load_system_bundle(dir);
    rb.lift = read_matrix_market(dir / "Vr.mtx");
    rb.restrict_ = read_matrix_market(dir / "Wr.mtx");
    std::ifstream is(dir / "sigma.csv");
    if (!is) throw InputError("cannot open " + (dir / "sigma.csv").string());
    std::string line;
    std::getline(is, line);  // header
    std::vector<double> vals;
    while (std::getline(is, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        vals.push_back(std::stod(line.substr(comma + 1)));
    }
    rb.sigma_full = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    rb.r = static_cast<int>(rb.reduced.n());
    return rb;
}

void write_reachability_lmi(const std::filesystem::path& dir, const StochasticSystem& sys) {
    sys.validate();
    std::filesystem::create_directories(dir);
    save_system_bundle(dir, sys, {"lmi_exchange", 0, {}});
    write_matrix_market(dir / "K.mtx", sys.K);
    json manifest = {
        {"form", "[[A^T X + X A + sum_ij k_ij N_i^T X N_j - C^T C, X B], [B^T X, -I]] <= 0, X > 0"},
        {"variable", "X = P^{-1}, symmetric n x n"},
        {"objective", "maximize trace(X)"},
        {"block_sizes", {sys.n(), sys.m()}},
        {"n", sys.n()},
        {"m", sys.m()},
        {"q", sys.q()},
        {"files", {{"A", "A.mtx"}, {"B", "B.mtx"}, {"C", "C.mtx"}, {"K", "K.mtx"}}},
        {"solution_file", "X.mtx"},
    };
    dump_json(dir / "lmi.json", manifest);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<Vector>& series) {
    if (columns.size() != series.size()) throw InputError("CSV columns and series count differ");
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << "\n";
    const Eigen::Index rows = series.empty() ? 0 : series.front().size();
    for (const auto& s : series)
        if (s.size() != rows) throw InputError("CSV series must have equal length");
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < series.size(); ++c) os << (c ? "," : "") << format_double(series[c][r]);
        os << "\n";
    }
}

}  // namespace lqgbt::io
