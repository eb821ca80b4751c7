#pragma once

#include "physarum/problem.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace physarum {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw InputError("problem file not found: " + path.string());
    return in;
}

inline std::vector<std::string> data_tokens(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '%') continue;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
    }
    return tokens;
}

}  // namespace detail

/// Reads a Matrix Market file: `array` headers load as dense (column-major
/// entry order per the format), `coordinate` headers as CSC sparse with
/// 1-based indices.
inline ConstraintMatrix read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in = detail::open_input(path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("%%MatrixMarket", 0) != 0)
        throw InputError("not a Matrix Market file: " + path.string());
    std::istringstream hs(header);
    std::string tag, object, format, field, symmetry;
    hs >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || field != "real" || symmetry != "general")
        throw InputError("unsupported Matrix Market header: " + header);

    const std::vector<std::string> tokens = detail::data_tokens(in);
    auto bad = [&] { return InputError("malformed Matrix Market data in " + path.string()); };
    std::size_t pos = 0;
    auto next_index = [&]() -> Index {
        if (pos >= tokens.size()) throw bad();
        return static_cast<Index>(std::stoll(tokens[pos++]));
    };
    auto next_double = [&]() -> double {
        if (pos >= tokens.size()) throw bad();
        return std::stod(tokens[pos++]);
    };

    if (format == "array") {
        const Index rows = next_index(), cols = next_index();
        if (rows < 1 || cols < 1) throw bad();
        DenseMatrix a(rows, cols);
        for (Index j = 0; j < cols; ++j)  // array entries come column-major
            for (Index i = 0; i < rows; ++i) a(i, j) = next_double();
        return ConstraintMatrix(std::move(a));
    }
    if (format == "coordinate") {
        const Index rows = next_index(), cols = next_index(), nnz = next_index();
        if (rows < 1 || cols < 1 || nnz < 0) throw bad();
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(nnz));
        for (Index k = 0; k < nnz; ++k) {
            const Index i = next_index(), j = next_index();
            const double v = next_double();
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw InputError("Matrix Market index out of range in " + path.string());
            triplets.emplace_back(i - 1, j - 1, v);
        }
        SparseMatrix a(rows, cols);
        a.setFromTriplets(triplets.begin(), triplets.end());
        return ConstraintMatrix(std::move(a));
    }
    throw InputError("unsupported Matrix Market format: " + format);
}

inline void write_matrix_market(const std::filesystem::path& path, const ConstraintMatrix& a) {
    std::ofstream out(path);
    if (!out.is_open()) throw InputError("cannot write file: " + path.string());
    if (a.is_dense()) {
        out << "%%MatrixMarket matrix array real general\n";
        out << a.rows() << ' ' << a.cols() << '\n';
        for (Index j = 0; j < a.cols(); ++j)
            for (Index i = 0; i < a.rows(); ++i)
                out << detail::format_double(a.dense()(i, j)) << '\n';
    } else {
        out << "%%MatrixMarket matrix coordinate real general\n";
        out << a.rows() << ' ' << a.cols() << ' ' << a.sparse().nonZeros() << '\n';
        for (Index j = 0; j < a.sparse().outerSize(); ++j)
            for (SparseMatrix::InnerIterator it(a.sparse(), j); it; ++it)
                out << (it.row() + 1) << ' ' << (it.col() + 1) << ' '
                    << detail::format_double(it.value()) << '\n';
    }
    if (!out.good()) throw InputError("write failed: " + path.string());
}

/// Plain-text vector file, one number per line.
inline Vector read_vector(const std::filesystem::path& path) {
    std::ifstream in = detail::open_input(path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '%' || line[pos] == '#') continue;
        std::istringstream vs(line);
        double v;
        if (!(vs >> v)) throw InputError("bad number in vector file: " + path.string());
        values.push_back(v);
    }
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

inline void write_vector(const std::filesystem::path& path, const Vector& v) {
    std::ofstream out(path);
    if (!out.is_open()) throw InputError("cannot write file: " + path.string());
    for (Index i = 0; i < v.size(); ++i) out << detail::format_double(v[i]) << '\n';
    if (!out.good()) throw InputError("write failed: " + path.string());
}

/// Problem bundle manifest. Fields:
///   format_version  always 1
///   n, m            dimensions
///   matrix          Matrix Market file for A (relative to the manifest)
///   weights         vector file for w (optional; defaults to ones)
///   rhs             vector file for f
///   x_true          vector file for the ground truth (optional)
///   seed            generator seed (optional metadata)
///   kind            free-form instance label (optional metadata)
struct ProblemManifest {
    Index n = 0;
    Index m = 0;
    std::string matrix;
    std::string weights;
    std::string rhs;
    std::string x_true;
    std::optional<std::uint64_t> seed;
    std::string kind;
};

inline BasisPursuitProblem load_problem(const std::filesystem::path& manifest_path) {
    std::ifstream in = detail::open_input(manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad manifest JSON in " + manifest_path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("format_version", 0) != 1)
        throw InputError("unsupported manifest format_version in " + manifest_path.string());
    const auto base = manifest_path.parent_path();
    if (!j.contains("matrix") || !j.contains("rhs"))
        throw InputError("manifest missing matrix or rhs field: " + manifest_path.string());

    ConstraintMatrix a = read_matrix_market(base / j.at("matrix").get<std::string>());
    Vector f = read_vector(base / j.at("rhs").get<std::string>());
    Vector w = j.contains("weights") ? read_vector(base / j.at("weights").get<std::string>())
                                     : Vector(Vector::Ones(a.cols()));
    std::optional<Vector> x_true;
    if (j.contains("x_true")) x_true = read_vector(base / j.at("x_true").get<std::string>());

    if (j.contains("n") && j.at("n").get<Index>() != a.rows())
        throw InputError("manifest n disagrees with matrix rows: " + manifest_path.string());
    if (j.contains("m") && j.at("m").get<Index>() != a.cols())
        throw InputError("manifest m disagrees with matrix cols: " + manifest_path.string());

    return BasisPursuitProblem(std::move(a), std::move(w), std::move(f), std::move(x_true));
}

/// Writes A/w/f(/x_true) plus manifest.json into `dir`; returns the manifest
/// path.
inline std::filesystem::path save_problem(const std::filesystem::path& dir,
                                          const BasisPursuitProblem& problem,
                                          std::optional<std::uint64_t> seed = std::nullopt,
                                          const std::string& kind = {}) {
    std::filesystem::create_directories(dir);
    write_matrix_market(dir / "A.mtx", problem.matrix());
    write_vector(dir / "w.txt", problem.weights());
    write_vector(dir / "f.txt", problem.rhs());
    nlohmann::json j{{"format_version", 1},
                     {"n", problem.n()},
                     {"m", problem.m()},
                     {"matrix", "A.mtx"},
                     {"weights", "w.txt"},
                     {"rhs", "f.txt"}};
    if (problem.ground_truth()) {
        write_vector(dir / "x_true.txt", *problem.ground_truth());
        j["x_true"] = "x_true.txt";
    }
    if (seed) j["seed"] = *seed;
    if (!kind.empty()) j["kind"] = kind;
    const auto manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out.is_open()) throw InputError("cannot write file: " + manifest_path.string());
    out << j.dump(2) << '\n';
    if (!out.good()) throw InputError("write failed: " + manifest_path.string());
    return manifest_path;
}

}  // namespace physarum
