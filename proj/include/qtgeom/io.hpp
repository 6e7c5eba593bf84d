#pragma once

// JSON schemas for the input objects, deterministic CSV/JSON tables, and
// atomic file output.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "connection.hpp"
#include "contact.hpp"
#include "gibbs.hpp"
#include "linalg.hpp"
#include "processes.hpp"

namespace qtgeom::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Shortest text that round-trips is not what we want for tables: every value
/// is printed with exactly 17 significant digits so artifacts diff cleanly.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// --- reading -----------------------------------------------------------------

/// Parse JSON text; syntax errors become ParseError with the byte offset.
inline json parse_json(std::string_view text, const std::string& source = "input") {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": invalid JSON: " + e.what(), e.byte);
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline json load_json_file(const std::filesystem::path& path) { return parse_json(read_file(path), path.string()); }

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + " is missing \"" + key + "\"");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + " must be a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + " must be finite");
    return x;
}

inline int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + " must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(where + " is out of range");
    return static_cast<int>(v);
}

inline std::string string(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + " must be a string");
    return j.get<std::string>();
}

inline std::vector<std::string> strings(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace detail

inline RVector vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    RVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = detail::number(j[i], where + "[" + std::to_string(i) + "]");
    return v;
}

inline std::vector<double> doubles_from_json(const json& j, const std::string& where) {
    const RVector v = vector_from_json(j, where);
    return {v.data(), v.data() + v.size()};
}

/// Nested arrays of [re, im] pairs, row-major.
inline CMatrix complex_matrix_from_json(const json& j, const std::string& where = "matrix") {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a nonempty array of rows");
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    CMatrix m;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string rw = where + "[" + std::to_string(r) + "]";
        const json& row = j[r];
        if (!row.is_array() || row.empty()) throw ConfigError(rw + " must be a nonempty array of [re, im] pairs");
        if (r == 0) {
            cols = row.size();
            m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        } else if (row.size() != cols) {
            throw ConfigError(rw + " has " + std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string ew = rw + "[" + std::to_string(c) + "]";
            const json& e = row[c];
            if (!e.is_array() || e.size() != 2) throw ConfigError(ew + " must be a [re, im] pair");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                Complex(detail::number(e[0], ew + "[0]"), detail::number(e[1], ew + "[1]"));
        }
    }
    return m;
}

inline ordered_json to_json(const CMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

/// { "dim": m, "observables": [ {"name": str, "matrix": [[[re, im], ...], ...]} ] }
inline ObservableSet observables_from_json(const json& j) {
    const std::string where = "observable set";
    const int dim = detail::integer(detail::require(j, "dim", where), where + ".dim");
    if (dim < 1) throw ConfigError(where + ".dim must be positive");
    const json& list = detail::require(j, "observables", where);
    if (!list.is_array() || list.empty()) throw ConfigError(where + ".observables must be a nonempty array");
    std::vector<HermitianOperator> ops;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string w = where + ".observables[" + std::to_string(i) + "]";
        const json& o = list[i];
        names.push_back(o.contains("name") ? detail::string(o["name"], w + ".name") : "A" + std::to_string(i + 1));
        const CMatrix m = complex_matrix_from_json(detail::require(o, "matrix", w), w + ".matrix");
        if (m.rows() != dim || m.cols() != dim)
            throw ConfigError(w + ".matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                              ", expected " + std::to_string(dim) + "x" + std::to_string(dim));
        try {
            ops.emplace_back(m);
        } catch (const ValidationError& e) {
            throw ConfigError(w + ": " + e.what());
        }
    }
    return ObservableSet(std::move(ops), std::move(names));
}

inline ordered_json to_json(const ObservableSet& obs) {
    ordered_json list = ordered_json::array();
    for (int i = 0; i < obs.size(); ++i) list.push_back({{"name", obs.names()[i]}, {"matrix", to_json(obs[i].matrix())}});
    return {{"dim", obs.dim()}, {"observables", std::move(list)}};
}

/// { "duration": T, "samples": [[l...], ...] } or
/// { "duration": T, "steps": K, "lambda_exprs": ["...", ...] } with expressions in t.
inline ParamPath path_from_json(const json& j, int n, const std::string& where = "path") {
    const double duration = detail::number(detail::require(j, "duration", where), where + ".duration");
    if (j.contains("samples") == j.contains("lambda_exprs"))
        throw ConfigError(where + " needs exactly one of \"samples\" or \"lambda_exprs\"");
    if (j.contains("samples")) {
        const json& s = j["samples"];
        if (!s.is_array()) throw ConfigError(where + ".samples must be an array");
        std::vector<RVector> samples;
        for (std::size_t k = 0; k < s.size(); ++k) {
            RVector l = vector_from_json(s[k], where + ".samples[" + std::to_string(k) + "]");
            if (l.size() != n)
                throw ConfigError(where + ".samples[" + std::to_string(k) + "] has " + std::to_string(l.size()) +
                                  " coordinates, expected " + std::to_string(n));
            samples.push_back(std::move(l));
        }
        return ParamPath::from_samples(duration, std::move(samples));
    }
    const int steps = detail::integer(detail::require(j, "steps", where), where + ".steps");
    const auto texts = detail::strings(j["lambda_exprs"], where + ".lambda_exprs");
    if (static_cast<int>(texts.size()) != n)
        throw ConfigError(where + ".lambda_exprs has " + std::to_string(texts.size()) + " entries, expected " +
                          std::to_string(n));
    std::vector<expr::Expr> coords;
    for (const auto& t : texts) coords.push_back(expr::parse(t, n));
    return ParamPath::from_expressions(duration, steps, coords);
}

inline ordered_json to_json(const ParamPath& p) {
    ordered_json samples = ordered_json::array();
    for (const auto& s : p.samples()) samples.push_back(std::vector<double>(s.data(), s.data() + s.size()));
    return {{"duration", p.duration()}, {"samples", std::move(samples)}};
}

/// { "g_S": "expr", "g_a": ["expr", ...], "h": ["expr", ...] }
inline MMetricSpec metric_spec_from_json(const json& j, int n) {
    const std::string where = "metric spec";
    return MMetricSpec::parse(detail::string(detail::require(j, "g_S", where), where + ".g_S"),
                              detail::strings(detail::require(j, "g_a", where), where + ".g_a"),
                              detail::strings(detail::require(j, "h", where), where + ".h"), n);
}

/// { "f": ["expr", ...] }
inline MuExtension mu_from_json(const json& j, int n) {
    return MuExtension::parse(detail::strings(detail::require(j, "f", "mu extension"), "mu extension.f"), n);
}

/// { "g_S": "expr", "h": ["expr", ...], "fd_step": 1e-5 }
inline ConnectionSpec connection_from_json(const json& j, int n) {
    const std::string where = "connection spec";
    const auto h = detail::strings(detail::require(j, "h", where), where + ".h");
    if (static_cast<int>(h.size()) != n)
        throw ConfigError(where + ".h has " + std::to_string(h.size()) + " entries, expected " + std::to_string(n));
    const double step = j.contains("fd_step") ? detail::number(j["fd_step"], where + ".fd_step") : 1e-5;
    return ConnectionSpec::parse(detail::string(detail::require(j, "g_S", where), where + ".g_S"), h, step);
}

inline ordered_json to_json(const HolonomyResult& h) {
    return {{"dS", h.dS}, {"da", std::vector<double>(h.da.data(), h.da.data() + h.da.size())},
            {"method", to_string(h.method)}};
}

// --- tables ------------------------------------------------------------------

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("table row has the wrong number of cells");
        rows.push_back(std::move(row));
    }
};

inline std::string csv_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_double(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else return v;
        },
        c);
}

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
        out += '\n';
    }
    return out;
}

/// Array of row objects; non-finite doubles become null.
inline ordered_json to_json(const Table& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : t.rows) {
        ordered_json o = ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        if (std::isfinite(v)) o[t.columns[i]] = v;
                        else o[t.columns[i]] = nullptr;
                    } else {
                        o[t.columns[i]] = v;
                    }
                },
                row[i]);
        }
        rows.push_back(std::move(o));
    }
    return rows;
}

// --- output ------------------------------------------------------------------

/// Write through a temporary file in the same directory and rename over the
/// target, so readers never see a partial artifact.
inline void write_atomic(const std::filesystem::path& target, std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw ConfigError("output directory does not exist: " + dir.string());
    const fs::path tmp = dir / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw ConfigError("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        throw ConfigError("cannot rename " + tmp.string() + " to " + target.string() + ": " + ec.message());
    }
}

}  // namespace qtgeom::io
