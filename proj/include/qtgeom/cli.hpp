#pragma once

// Command-line front end. Every subcommand is a thin adapter over one module
// operation: read the run config, build a table (and a JSON document with the
// same rows plus summary fields), write it atomically.
//
// Exit codes: 0 ok, 2 configuration, 3 numerical domain, 4 non-convergence
// (the artifact is still written).

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "connection.hpp"
#include "contact.hpp"
#include "geometry.hpp"
#include "gibbs.hpp"
#include "io.hpp"
#include "processes.hpp"

namespace qtgeom::cli {

namespace fs = std::filesystem;
using io::json;
using io::ordered_json;

enum ExitCode : int { kOk = 0, kConfig = 2, kNumeric = 3, kNotConverged = 4 };

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {
        "gibbs",          "metric",     "length",    "entropy-production", "geodesic", "third-law",
        "boundary-entropy", "contact-check", "holonomy", "curvature-map", "flatness",
    };
    return names;
}

/// Config section key for a subcommand: "third-law" -> "third_law".
inline std::string section_key(std::string name) {
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

struct RunConfig {
    fs::path base_dir;
    json raw;
    std::optional<ObservableSet> observables;
    int n = 0;
    FDScheme fd;
    std::optional<MMetricSpec> metric_spec;
    std::optional<ConnectionSpec> connection;
    std::optional<MuExtension> mu;
    std::string format = "csv";
    std::optional<fs::path> out;
    unsigned threads = 0;

    const ObservableSet& obs() const {
        if (!observables) throw ConfigError("this subcommand needs \"observables\" in the config");
        return *observables;
    }

    const ConnectionSpec& conn() const {
        if (!connection) throw ConfigError("this subcommand needs \"connection\" in the config");
        return *connection;
    }

    /// The subcommand's section, or an empty object.
    json section(const std::string& subcommand) const {
        const std::string key = section_key(subcommand);
        return raw.contains(key) ? raw[key] : json::object();
    }

    /// Inline object, or a string naming a JSON file relative to the config.
    json resolve(const json& value) const {
        if (value.is_string()) return io::load_json_file(base_dir / value.get<std::string>());
        return value;
    }
};

inline RunConfig parse_run_config(const json& raw, const fs::path& base_dir) {
    static const std::initializer_list<const char*> kTop = {
        "observables", "n", "fd", "metric_spec", "connection", "mu", "format", "out", "threads",
        "gibbs", "metric", "length", "entropy_production", "geodesic", "third_law", "boundary_entropy",
        "contact_check", "holonomy", "curvature_map", "flatness"};
    check_keys(raw, kTop, "config");
    RunConfig c;
    c.base_dir = base_dir;
    c.raw = raw;
    if (raw.contains("observables")) {
        c.observables = io::observables_from_json(c.resolve(raw["observables"]));
        c.n = c.observables->size();
    }
    if (raw.contains("n")) {
        const int n = io::detail::integer(raw["n"], "config.n");
        if (n < 1) throw ConfigError("config.n must be positive");
        if (c.observables && n != c.n)
            throw ConfigError("config.n = " + std::to_string(n) + " disagrees with the observable set (" +
                              std::to_string(c.n) + ")");
        c.n = n;
    }
    if (raw.contains("connection")) {
        const json spec = c.resolve(raw["connection"]);
        if (c.n == 0 && spec.is_object() && spec.contains("h") && spec["h"].is_array())
            c.n = static_cast<int>(spec["h"].size());
        c.connection = io::connection_from_json(spec, c.n);
    }
    if (raw.contains("fd")) {
        const json& fd = raw["fd"];
        check_keys(fd, {"step", "order"}, "config.fd");
        if (fd.contains("step")) c.fd.step = io::detail::number(fd["step"], "config.fd.step");
        if (fd.contains("order")) c.fd.order = io::detail::integer(fd["order"], "config.fd.order");
    }
    c.fd.validate();
    if (raw.contains("metric_spec") || raw.contains("mu")) {
        if (c.n == 0) throw ConfigError("metric_spec and mu need the observable set (or n) to fix the alphabet");
    }
    if (raw.contains("metric_spec")) c.metric_spec = io::metric_spec_from_json(c.resolve(raw["metric_spec"]), c.n);
    if (raw.contains("mu")) c.mu = io::mu_from_json(c.resolve(raw["mu"]), c.n);
    if (raw.contains("format")) c.format = io::detail::string(raw["format"], "config.format");
    if (raw.contains("out")) c.out = base_dir / io::detail::string(raw["out"], "config.out");
    if (raw.contains("threads")) {
        const int t = io::detail::integer(raw["threads"], "config.threads");
        if (t < 0) throw ConfigError("config.threads must be >= 0");
        c.threads = static_cast<unsigned>(t);
    }
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    return parse_run_config(io::load_json_file(path), base);
}

/// Command output: a table for CSV, a document for JSON.
struct Artifact {
    io::Table table;
    ordered_json doc = ordered_json::object();
    std::optional<ordered_json> sidecar;  // written next to the CSV (geodesic convergence record)
    int exit_code = kOk;
};

struct Options {
    std::optional<std::vector<double>> lambda;  // gibbs --lambda override
    bool validate_only = false;
    std::optional<long long> seed;
};

// --- shared parsing helpers ----------------------------------------------------

inline std::vector<std::string> lambda_columns(int n, const char* prefix = "l") {
    std::vector<std::string> c;
    for (int i = 1; i <= n; ++i) c.push_back(prefix + std::to_string(i));
    return c;
}

inline void append_vector(std::vector<io::Cell>& row, const RVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) row.emplace_back(v(i));
}

inline std::vector<double> std_vector(const RVector& v) { return {v.data(), v.data() + v.size()}; }

inline RVector lambda_vector(const json& j, int n, const std::string& where) {
    RVector v = io::vector_from_json(j, where);
    if (v.size() != n)
        throw ConfigError(where + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n));
    return v;
}

/// { "points": [[...], ...] } or { "axes": [{"min": a, "max": b, "points": N}, ...] };
/// returned in lexicographic order.
inline std::vector<RVector> grid_from_json(const json& j, int n, const std::string& where) {
    check_keys(j, {"points", "axes"}, where);
    if (j.contains("points") == j.contains("axes"))
        throw ConfigError(where + " needs exactly one of \"points\" or \"axes\"");
    std::vector<RVector> pts;
    if (j.contains("points")) {
        const json& p = j["points"];
        if (!p.is_array()) throw ConfigError(where + ".points must be an array");
        for (std::size_t k = 0; k < p.size(); ++k)
            pts.push_back(lambda_vector(p[k], n, where + ".points[" + std::to_string(k) + "]"));
    } else {
        const json& axes = j["axes"];
        if (!axes.is_array() || static_cast<int>(axes.size()) != n)
            throw ConfigError(where + ".axes must list " + std::to_string(n) + " axes");
        std::vector<std::vector<double>> ticks;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const std::string w = where + ".axes[" + std::to_string(i) + "]";
            check_keys(axes[i], {"min", "max", "points"}, w);
            const double lo = io::detail::number(io::detail::require(axes[i], "min", w), w + ".min");
            const double hi = io::detail::number(io::detail::require(axes[i], "max", w), w + ".max");
            const int m = io::detail::integer(io::detail::require(axes[i], "points", w), w + ".points");
            if (m < 0 || m > 100000) throw ConfigError(w + ".points must be in [0, 100000]");
            std::vector<double> t;
            for (int k = 0; k < m; ++k) t.push_back(m == 1 ? lo : lo + (hi - lo) * k / (m - 1));
            ticks.push_back(std::move(t));
        }
        std::size_t total = 1;
        for (const auto& t : ticks) total *= t.size();
        if (total > 1000000) throw ConfigError(where + " has more than 10^6 points");
        for (std::size_t idx = 0; idx < total; ++idx) {
            RVector l(n);
            std::size_t rem = idx;
            for (int i = n - 1; i >= 0; --i) {
                l(i) = ticks[i][rem % ticks[i].size()];
                rem /= ticks[i].size();
            }
            pts.push_back(std::move(l));
        }
    }
    std::stable_sort(pts.begin(), pts.end(), [](const RVector& a, const RVector& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    });
    return pts;
}

inline std::vector<double> lambda_list(const json& j, const std::string& where) {
    return io::doubles_from_json(j, where);
}

inline double number_or(const json& sec, const char* key, double fallback, const std::string& where) {
    return sec.contains(key) ? io::detail::number(sec[key], where + "." + key) : fallback;
}

inline int integer_or(const json& sec, const char* key, int fallback, const std::string& where) {
    return sec.contains(key) ? io::detail::integer(sec[key], where + "." + key) : fallback;
}

inline ordered_json header(const std::string& command, const RunConfig& c, const Options& o) {
    ordered_json d = {{"command", command}, {"n", c.n}};
    if (o.seed) d["seed"] = *o.seed;
    return d;
}

// --- subcommands -----------------------------------------------------------------

inline Artifact cmd_gibbs(const RunConfig& c, const Options& o) {
    const std::string where = "config.gibbs";
    const json sec = c.section("gibbs");
    check_keys(sec, {"lambda", "lambdas"}, where);
    const ObservableSet& obs = c.obs();
    std::vector<RVector> lambdas;
    if (o.lambda) {
        lambdas.push_back(lambda_vector(json(*o.lambda), c.n, "--lambda"));
    } else if (sec.contains("lambdas")) {
        if (!sec["lambdas"].is_array()) throw ConfigError(where + ".lambdas must be an array");
        for (std::size_t k = 0; k < sec["lambdas"].size(); ++k)
            lambdas.push_back(lambda_vector(sec["lambdas"][k], c.n, where + ".lambdas[" + std::to_string(k) + "]"));
    } else if (sec.contains("lambda")) {
        lambdas.push_back(lambda_vector(sec["lambda"], c.n, where + ".lambda"));
    } else {
        throw ConfigError("gibbs needs a lambda (config.gibbs.lambda, .lambdas or --lambda)");
    }
    for (const auto& l : lambdas) check_lambda(obs, l);
    Artifact a;
    if (o.validate_only) return a;

    a.table.columns = lambda_columns(c.n);
    for (const char* col : {"Z", "log_Z", "S"}) a.table.columns.emplace_back(col);
    for (const auto& s : lambda_columns(c.n, "a")) a.table.columns.push_back(s);
    for (const auto& s : lambda_columns(obs.dim(), "p")) a.table.columns.push_back(s);
    for (const auto& l : lambdas) {
        const GibbsPoint g = gibbs_point(obs, l);
        std::vector<io::Cell> row;
        append_vector(row, l);
        row.emplace_back(g.Z);
        row.emplace_back(g.log_Z);
        row.emplace_back(g.S);
        append_vector(row, g.a);
        append_vector(row, g.rho.eigenvalues());
        a.table.add(std::move(row));
    }
    a.doc = header("gibbs", c, o);
    a.doc["observables"] = obs.names();
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_metric(const RunConfig& c, const Options& o) {
    const std::string where = "config.metric";
    const json sec = c.section("metric");
    check_keys(sec, {"grid"}, where);
    const ObservableSet& obs = c.obs();
    const auto grid = grid_from_json(io::detail::require(sec, "grid", where), c.n, where + ".grid");
    for (const auto& l : grid) check_lambda(obs, l);
    Artifact a;
    if (o.validate_only) return a;

    a.table.columns = lambda_columns(c.n);
    for (int i = 1; i <= c.n; ++i)
        for (int j = i; j <= c.n; ++j) a.table.columns.push_back("g" + std::to_string(i) + std::to_string(j));
    const auto gs = metric_grid(obs, grid, c.fd, c.threads);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<io::Cell> row;
        append_vector(row, grid[k]);
        for (int i = 0; i < c.n; ++i)
            for (int j = i; j < c.n; ++j) row.emplace_back(gs[k](i, j));
        a.table.add(std::move(row));
    }
    a.doc = header("metric", c, o);
    a.doc["fd"] = {{"step", c.fd.step}, {"order", c.fd.order}};
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline ParamPath section_path(const RunConfig& c, const json& sec, const std::string& where) {
    return io::path_from_json(c.resolve(io::detail::require(sec, "path", where)), c.n, where + ".path");
}

inline std::vector<double> cumulative(const std::vector<double>& segments) {
    std::vector<double> out{0.0};
    for (double s : segments) out.push_back(out.back() + s);
    return out;
}

inline Artifact cmd_length(const RunConfig& c, const Options& o) {
    const std::string where = "config.length";
    const json sec = c.section("length");
    check_keys(sec, {"path"}, where);
    const ObservableSet& obs = c.obs();
    const ParamPath path = section_path(c, sec, where);
    for (const auto& l : path.samples()) check_lambda(obs, l);
    Artifact a;
    if (o.validate_only) return a;

    const LengthReport r = thermo_length(obs, path, c.fd);
    const auto cum = cumulative(r.segment_lengths);
    a.table.columns = {"k", "t"};
    for (const auto& s : lambda_columns(c.n)) a.table.columns.push_back(s);
    a.table.columns.emplace_back("speed");
    a.table.columns.emplace_back("cumulative_length");
    for (int k = 0; k <= path.steps(); ++k) {
        std::vector<io::Cell> row{std::int64_t{k}, path.time(k)};
        append_vector(row, path[k]);
        row.emplace_back(r.speeds[k]);
        row.emplace_back(cum[k]);
        a.table.add(std::move(row));
    }
    a.doc = header("length", c, o);
    a.doc["length"] = r.length;
    a.doc["energy"] = r.energy;
    a.doc["duration"] = path.duration();
    a.doc["steps"] = path.steps();
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_entropy_production(const RunConfig& c, const Options& o) {
    const std::string where = "config.entropy_production";
    const json sec = c.section("entropy-production");
    check_keys(sec, {"path", "kappa"}, where);
    const ObservableSet& obs = c.obs();
    const ParamPath path = section_path(c, sec, where);
    const double kappa = number_or(sec, "kappa", 1.0, where);
    if (!(kappa > 0.0)) throw ConfigError(where + ".kappa must be positive");
    for (const auto& l : path.samples()) check_lambda(obs, l);
    Artifact a;
    if (o.validate_only) return a;

    const auto r = entropy_production(obs, path, kappa, c.fd);
    const double length = thermo_length(obs, path, c.fd).length;
    std::vector<double> seg;
    for (int k = 0; k < path.steps(); ++k) seg.push_back(0.5 * path.dt() * (r.rate[k] + r.rate[k + 1]));
    const auto cum = cumulative(seg);
    a.table.columns = {"k", "t"};
    for (const auto& s : lambda_columns(c.n)) a.table.columns.push_back(s);
    a.table.columns.emplace_back("rate");
    a.table.columns.emplace_back("cumulative");
    for (int k = 0; k <= path.steps(); ++k) {
        std::vector<io::Cell> row{std::int64_t{k}, path.time(k)};
        append_vector(row, path[k]);
        row.emplace_back(r.rate[k]);
        row.emplace_back(cum[k]);
        a.table.add(std::move(row));
    }
    a.doc = header("entropy-production", c, o);
    a.doc["kappa"] = kappa;
    a.doc["total"] = r.total;
    a.doc["duration"] = path.duration();
    a.doc["length"] = length;
    a.doc["lower_bound"] = kappa * length * length / path.duration();
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_geodesic(const RunConfig& c, const Options& o) {
    const std::string where = "config.geodesic";
    const json sec = c.section("geodesic");
    check_keys(sec, {"start", "end", "segments", "max_iters", "gradient_tolerance", "duration", "metric_fd_step"},
               where);
    const ObservableSet& obs = c.obs();
    GeodesicProblem p;
    p.start = lambda_vector(io::detail::require(sec, "start", where), c.n, where + ".start");
    p.end = lambda_vector(io::detail::require(sec, "end", where), c.n, where + ".end");
    p.segments = integer_or(sec, "segments", p.segments, where);
    p.max_iters = integer_or(sec, "max_iters", p.max_iters, where);
    p.gradient_tolerance = number_or(sec, "gradient_tolerance", p.gradient_tolerance, where);
    p.duration = number_or(sec, "duration", p.duration, where);
    p.metric_fd_step = number_or(sec, "metric_fd_step", p.metric_fd_step, where);
    p.validate(c.n);
    check_lambda(obs, p.start);
    check_lambda(obs, p.end);
    Artifact a;
    if (o.validate_only) return a;

    const GeodesicResult r = geodesic_between(obs, p, c.fd);
    const LengthReport straight = thermo_length(obs, ParamPath::straight(p.start, p.end, p.segments, p.duration), c.fd);
    a.table.columns = {"k", "t"};
    for (const auto& s : lambda_columns(c.n)) a.table.columns.push_back(s);
    a.table.columns.emplace_back("speed");
    for (int k = 0; k <= r.path.steps(); ++k) {
        std::vector<io::Cell> row{std::int64_t{k}, r.path.time(k)};
        append_vector(row, r.path[k]);
        row.emplace_back(r.length.speeds[k]);
        a.table.add(std::move(row));
    }
    const auto& cv = r.convergence;
    const ordered_json record = {{"iterations", cv.iterations},
                                 {"initial_energy", cv.initial_energy},
                                 {"final_energy", cv.final_energy},
                                 {"final_gradient_norm", cv.final_gradient_norm},
                                 {"gradient_tolerance", p.gradient_tolerance},
                                 {"converged", cv.converged},
                                 {"message", cv.message}};
    a.doc = header("geodesic", c, o);
    a.doc["length"] = r.length.length;
    a.doc["energy"] = r.length.energy;
    a.doc["straight_line_length"] = straight.length;
    a.doc["straight_line_energy"] = straight.energy;
    a.doc["convergence"] = record;
    a.doc["rows"] = io::to_json(a.table);
    a.sidecar = record;
    if (!cv.converged) a.exit_code = kNotConverged;
    return a;
}

inline Artifact cmd_third_law(const RunConfig& c, const Options& o) {
    const std::string where = "config.third_law";
    const json sec = c.section("third-law");
    check_keys(sec, {"direction", "lambdas", "steps_per_piece"}, where);
    const ObservableSet& obs = c.obs();
    const RVector dir = lambda_vector(io::detail::require(sec, "direction", where), c.n, where + ".direction");
    const auto lambdas = lambda_list(io::detail::require(sec, "lambdas", where), where + ".lambdas");
    const int steps = integer_or(sec, "steps_per_piece", 1024, where);
    detail::check_ray(obs, dir, lambdas);
    for (double l : lambdas) check_lambda(obs, l * dir);
    Artifact a;
    if (o.validate_only) return a;

    const auto scan = third_law_scan(obs, dir, lambdas, c.fd, steps);
    a.table.columns = {"Lambda", "length", "increment"};
    for (const auto& row : scan.rows) a.table.add({row.Lambda, row.length, row.increment});
    a.doc = header("third-law", c, o);
    a.doc["direction"] = std_vector(dir);
    a.doc["ground_degeneracy"] = ground_degeneracy(obs, dir);
    a.doc["monotone"] = scan.monotone;
    a.doc["increments_decreasing"] = scan.increments_decreasing;
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_boundary_entropy(const RunConfig& c, const Options& o) {
    const std::string where = "config.boundary_entropy";
    const json sec = c.section("boundary-entropy");
    check_keys(sec, {"direction", "lambdas"}, where);
    const ObservableSet& obs = c.obs();
    const RVector dir = lambda_vector(io::detail::require(sec, "direction", where), c.n, where + ".direction");
    const auto lambdas = lambda_list(io::detail::require(sec, "lambdas", where), where + ".lambdas");
    detail::check_ray(obs, dir, lambdas);
    for (double l : lambdas) check_lambda(obs, l * dir);
    Artifact a;
    if (o.validate_only) return a;

    const auto scan = boundary_entropy_limit(obs, dir, lambdas);
    a.table.columns = {"Lambda", "S", "gap"};
    for (const auto& row : scan.rows) a.table.add({row.Lambda, row.S, row.gap});
    a.doc = header("boundary-entropy", c, o);
    a.doc["direction"] = std_vector(dir);
    a.doc["ground_degeneracy"] = scan.ground_degeneracy;
    a.doc["limit"] = scan.limit;
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_contact_check(const RunConfig& c, const Options& o) {
    const std::string where = "config.contact_check";
    const json sec = c.section("contact-check");
    check_keys(sec, {"grid", "tolerance"}, where);
    const ObservableSet& obs = c.obs();
    const auto grid = grid_from_json(io::detail::require(sec, "grid", where), c.n, where + ".grid");
    const double tol = number_or(sec, "tolerance", 1e-7, where);
    for (const auto& l : grid) check_lambda(obs, l);
    Artifact a;
    if (o.validate_only) return a;

    a.table.columns = lambda_columns(c.n);
    a.table.columns.emplace_back("residual");
    double worst = 0.0;
    for (const auto& l : grid) {
        const double r = legendrian_residual(obs, {l}, c.fd);
        worst = std::max(worst, r);
        std::vector<io::Cell> row;
        append_vector(row, l);
        row.emplace_back(r);
        a.table.add(std::move(row));
    }
    a.doc = header("contact-check", c, o);
    a.doc["max_residual"] = worst;
    a.doc["tolerance"] = tol;
    a.doc["legendrian"] = worst <= tol;
    a.doc["volume_coefficient"] = contact_volume_coefficient(c.n);
    if (!grid.empty()) {
        const ThermoPoint p = equilibrium_point(obs, grid.front());
        const auto reeb = reeb_check(p, c.fd);
        a.doc["eta_rank"] = eta_rank(p);
        a.doc["reeb"] = {{"eta", reeb.eta_of_reeb}, {"max_contraction", reeb.max_contraction}};
    }
    if (c.mu) {
        c.mu->validate(obs);
        a.doc["mu_validated"] = true;
    }
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Rectangle rectangle_from_json(const json& j, int n, const std::string& where) {
    check_keys(j, {"k", "l", "k_min", "k_max", "l_min", "l_max", "base"}, where);
    Rectangle r;
    r.k = io::detail::integer(io::detail::require(j, "k", where), where + ".k") - 1;
    r.l = io::detail::integer(io::detail::require(j, "l", where), where + ".l") - 1;
    r.k_min = io::detail::number(io::detail::require(j, "k_min", where), where + ".k_min");
    r.k_max = io::detail::number(io::detail::require(j, "k_max", where), where + ".k_max");
    r.l_min = io::detail::number(io::detail::require(j, "l_min", where), where + ".l_min");
    r.l_max = io::detail::number(io::detail::require(j, "l_max", where), where + ".l_max");
    r.base = j.contains("base") ? lambda_vector(j["base"], n, where + ".base") : RVector::Zero(n);
    r.validate(n);
    return r;
}

inline Artifact cmd_holonomy(const RunConfig& c, const Options& o) {
    const std::string where = "config.holonomy";
    const json sec = c.section("holonomy");
    check_keys(sec, {"rectangle", "loop", "steps_per_side", "grid", "base_point"}, where);
    const ConnectionSpec& spec = c.conn();
    if (sec.contains("rectangle") == sec.contains("loop"))
        throw ConfigError(where + " needs exactly one of \"rectangle\" or \"loop\"");
    std::optional<Rectangle> rect;
    std::optional<Loop> loop;
    int nk = 128, nl = 128;
    if (sec.contains("rectangle")) {
        rect = rectangle_from_json(sec["rectangle"], c.n, where + ".rectangle");
        const int per_side = integer_or(sec, "steps_per_side", 64, where);
        loop = rect->boundary(per_side);
        if (sec.contains("grid")) {
            const json& g = sec["grid"];
            if (!g.is_array() || g.size() != 2) throw ConfigError(where + ".grid must be [N_k, N_l]");
            nk = io::detail::integer(g[0], where + ".grid[0]");
            nl = io::detail::integer(g[1], where + ".grid[1]");
            if (nk < 1 || nl < 1) throw ConfigError(where + ".grid entries must be positive");
        }
    } else {
        loop = Loop(io::path_from_json(c.resolve(sec["loop"]), c.n, where + ".loop"));
    }
    ThermoPoint p0{0.0, RVector::Zero(c.n), loop->path()[0]};
    if (sec.contains("base_point")) {
        const json& b = sec["base_point"];
        check_keys(b, {"S", "a"}, where + ".base_point");
        if (b.contains("S")) p0.S = io::detail::number(b["S"], where + ".base_point.S");
        if (b.contains("a")) p0.a = lambda_vector(b["a"], c.n, where + ".base_point.a");
    }
    Artifact a;
    if (o.validate_only) return a;

    std::vector<HolonomyResult> results{holonomy_via_lift(spec, *loop, p0)};
    if (rect) results.push_back(holonomy_via_curvature(spec, *rect, nk, nl));
    a.table.columns = {"method", "dS"};
    for (const auto& s : lambda_columns(c.n, "da")) a.table.columns.push_back(s);
    ordered_json list = ordered_json::array();
    for (const auto& h : results) {
        std::vector<io::Cell> row{to_string(h.method), h.dS};
        append_vector(row, h.da);
        a.table.add(std::move(row));
        list.push_back(io::to_json(h));
    }
    a.doc = header("holonomy", c, o);
    a.doc["results"] = list;
    if (rect) a.doc["difference"] = std::abs(results[0].dS - results[1].dS);
    return a;
}

inline Artifact cmd_curvature_map(const RunConfig& c, const Options& o) {
    const std::string where = "config.curvature_map";
    const json sec = c.section("curvature-map");
    check_keys(sec, {"grid", "pairs"}, where);
    const ConnectionSpec& spec = c.conn();
    if (c.n < 2) throw ConfigError("curvature-map needs n >= 2");
    const auto grid = grid_from_json(io::detail::require(sec, "grid", where), c.n, where + ".grid");
    std::vector<std::pair<int, int>> pairs;
    if (sec.contains("pairs")) {
        const json& p = sec["pairs"];
        if (!p.is_array()) throw ConfigError(where + ".pairs must be an array of [k, l]");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const std::string w = where + ".pairs[" + std::to_string(i) + "]";
            if (!p[i].is_array() || p[i].size() != 2) throw ConfigError(w + " must be [k, l]");
            const int k = io::detail::integer(p[i][0], w) - 1, l = io::detail::integer(p[i][1], w) - 1;
            if (k < 0 || l < 0 || k >= c.n || l >= c.n || k == l)
                throw ConfigError(w + " must name two distinct coordinates in 1.." + std::to_string(c.n));
            pairs.emplace_back(k, l);
        }
    } else {
        for (int k = 0; k < c.n; ++k)
            for (int l = k + 1; l < c.n; ++l) pairs.emplace_back(k, l);
    }
    Artifact a;
    if (o.validate_only) return a;

    a.table.columns = lambda_columns(c.n);
    std::vector<std::vector<double>> values;
    for (const auto& [k, l] : pairs) {
        a.table.columns.push_back("R" + std::to_string(k + 1) + std::to_string(l + 1));
        values.push_back(curvature_grid(spec, grid, k, l, c.threads));
    }
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<io::Cell> row;
        append_vector(row, grid[j]);
        for (const auto& v : values) row.emplace_back(v[j]);
        a.table.add(std::move(row));
    }
    a.doc = header("curvature-map", c, o);
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact cmd_flatness(const RunConfig& c, const Options& o) {
    const std::string where = "config.flatness";
    const json sec = c.section("flatness");
    check_keys(sec, {"grid", "tolerance"}, where);
    const ConnectionSpec& spec = c.conn();
    const auto grid = grid_from_json(io::detail::require(sec, "grid", where), c.n, where + ".grid");
    const double tol = number_or(sec, "tolerance", 1e-7, where);
    if (!(tol >= 0.0)) throw ConfigError(where + ".tolerance must be nonnegative");
    if (grid.empty()) throw ConfigError(where + ".grid must be nonempty");
    Artifact a;
    if (o.validate_only) return a;

    const auto r = flatness_check(spec, grid, tol);
    a.table.columns = {"flat", "max_abs_curvature", "k", "l"};
    for (const auto& s : lambda_columns(c.n)) a.table.columns.push_back(s);
    std::vector<io::Cell> row{r.flat, r.max_abs_curvature, std::int64_t{r.k < 0 ? 0 : r.k + 1},
                              std::int64_t{r.l < 0 ? 0 : r.l + 1}};
    append_vector(row, r.where);
    a.table.add(std::move(row));
    a.doc = header("flatness", c, o);
    a.doc["tolerance"] = tol;
    a.doc["points"] = grid.size();
    a.doc["rows"] = io::to_json(a.table);
    return a;
}

inline Artifact dispatch(const std::string& name, const RunConfig& c, const Options& o) {
    static const std::map<std::string, std::function<Artifact(const RunConfig&, const Options&)>> table = {
        {"gibbs", cmd_gibbs},
        {"metric", cmd_metric},
        {"length", cmd_length},
        {"entropy-production", cmd_entropy_production},
        {"geodesic", cmd_geodesic},
        {"third-law", cmd_third_law},
        {"boundary-entropy", cmd_boundary_entropy},
        {"contact-check", cmd_contact_check},
        {"holonomy", cmd_holonomy},
        {"curvature-map", cmd_curvature_map},
        {"flatness", cmd_flatness},
    };
    return table.at(name)(c, o);
}

inline std::string render(const Artifact& a, const std::string& format) {
    if (format == "json") return a.doc.dump(2) + "\n";
    return io::to_csv(a.table);
}

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Geometric quantum thermodynamics toolkit", "qtgeom"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path, out_path, format;
    bool validate = false;
    std::optional<long long> seed;
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--out", out_path, "output file (default: standard output)");
    app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--validate", validate, "check the configuration without computing");
    app.add_option("--seed", seed, "seed for randomized runs (recorded, not otherwise used)");

    std::vector<double> lambda_override;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        if (name == "gibbs")
            sub->add_option("--lambda", lambda_override, "comma-separated lambda (overrides the config)")
                ->delimiter(',');
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "qtgeom: " << e.what() << "\n";
        return kConfig;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    Options opts;
    opts.validate_only = validate;
    opts.seed = seed;
    if (!lambda_override.empty()) opts.lambda = lambda_override;

    try {
        RunConfig cfg = load_run_config(config_path);
        if (!format.empty()) cfg.format = format;
        if (cfg.format != "csv" && cfg.format != "json")
            throw ConfigError("format must be csv or json, got \"" + cfg.format + "\"");
        if (!out_path.empty()) cfg.out = fs::path(out_path);

        const Artifact a = dispatch(name, cfg, opts);
        if (validate) {
            out << "qtgeom " << name << ": configuration ok\n";
            return kOk;
        }
        const std::string text = render(a, cfg.format);
        if (cfg.out) {
            io::write_atomic(*cfg.out, text);
            if (a.sidecar && cfg.format == "csv") {
                fs::path side = *cfg.out;
                side += ".convergence.json";
                io::write_atomic(side, a.sidecar->dump(2) + "\n");
            }
        } else {
            out << text;
            if (a.sidecar && cfg.format == "csv") err << "convergence: " << a.sidecar->dump() << "\n";
        }
        if (a.exit_code == kNotConverged) err << "qtgeom " << name << ": optimizer did not converge\n";
        return a.exit_code;
    } catch (const ConfigError& e) {
        err << "qtgeom " << name << ": configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericError& e) {
        err << "qtgeom " << name << ": numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        err << "qtgeom " << name << ": " << e.what() << "\n";
        return kNumeric;
    } catch (const json::exception& e) {
        err << "qtgeom " << name << ": configuration error: " << e.what() << "\n";
        return kConfig;
    }
}

}  // namespace qtgeom::cli
