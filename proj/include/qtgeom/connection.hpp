#pragma once

// Principal connection on the label bundle (S, a) -> lambda with abelian
// structure group R^{n+1}. Horizontal directions are the g_M-orthogonal
// complement of the fibers, which gives Gamma^k_0 = h_k / g_S and Gamma^k_i = 0:
// only the entropy coordinate is ever transported.

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "contact.hpp"
#include "exprlang.hpp"
#include "fd.hpp"
#include "parallel.hpp"
#include "processes.hpp"

namespace qtgeom {

struct ConnectionSpec {
    expr::Expr g_S;
    std::vector<expr::Expr> h;
    double fd_step = 1e-5;

    static constexpr double kDegenerateThreshold = 1e-12;

    int n() const noexcept { return static_cast<int>(h.size()); }

    /// The fields are functions of lambda alone; S, a and t are rejected.
    static ConnectionSpec parse(const std::string& g_S, const std::vector<std::string>& h, double fd_step = 1e-5) {
        const int n = static_cast<int>(h.size());
        if (n < 1) throw ConfigError("connection spec needs at least one h entry");
        ConnectionSpec s{expr::parse(g_S, n), {}, fd_step};
        for (const auto& e : h) s.h.push_back(expr::parse(e, n));
        s.validate();
        return s;
    }

    void validate() const {
        FDScheme{fd_step, 4}.validate();
        if (h.empty()) throw ConfigError("connection spec needs at least one h entry");
        const expr::Alphabet alphabet(n());
        const auto check = [&](const expr::Expr& e, const std::string& what) {
            if (e.n() != n()) throw ConfigError(what + " was parsed for a different n");
            std::vector<int> banned = {expr::Alphabet::t_slot(), expr::Alphabet::S_slot()};
            for (int i = 0; i < n(); ++i) banned.push_back(alphabet.a_slot(i));
            for (int slot : banned)
                if (e.references(slot))
                    throw ConfigError(what + " must depend on l1..l" + std::to_string(n()) + " only: " + e.to_string());
        };
        check(g_S, "g_S");
        for (int k = 0; k < n(); ++k) check(h[k], "h" + std::to_string(k + 1));
    }

    /// h_k / g_S at lambda.
    RVector ratio(const RVector& lambda) const {
        if (lambda.size() != n()) throw ConfigError("lambda has the wrong length for this connection");
        expr::Environment env(n());
        env.set_l(lambda);
        const double gs = g_S.eval(env);
        if (!(std::abs(gs) > kDegenerateThreshold)) {
            std::ostringstream os;
            os << "degenerate metric: g_S = " << gs << " at lambda = (" << lambda.transpose() << ")";
            throw DegenerateMetricError(os.str());
        }
        RVector r(n());
        for (int k = 0; k < n(); ++k) r(k) = h[k].eval(env) / gs;
        return r;
    }
};

struct GammaCoefficients {
    RVector entropy;     // Gamma^k_0, k = 1..n
    RMatrix expectation; // Gamma^k_i, identically zero
};

inline GammaCoefficients gamma_coeffs(const ConnectionSpec& spec, const RVector& lambda) {
    return {spec.ratio(lambda), RMatrix::Zero(spec.n(), spec.n())};
}

namespace detail {

/// Entropy increments of the horizontal lift over each segment of the base.
/// The base is taken piecewise linear between samples; one classical RK4 step
/// per segment, whose stages collapse to Simpson's weights because the
/// right-hand side depends on t only.
inline std::vector<double> lift_increments(const ConnectionSpec& spec, const ParamPath& base) {
    if (base.dim() != spec.n()) throw ConfigError("path dimension does not match the connection's n");
    std::vector<double> out;
    out.reserve(base.steps());
    RVector r0 = spec.ratio(base[0]);
    for (int k = 0; k < base.steps(); ++k) {
        const RVector delta = base[k + 1] - base[k];
        const RVector rm = spec.ratio(0.5 * (base[k] + base[k + 1]));
        const RVector r1 = spec.ratio(base[k + 1]);
        out.push_back(-(r0 + 4.0 * rm + r1).dot(delta) / 6.0);
        r0 = r1;
    }
    return out;
}

}  // namespace detail

/// Horizontal lift of a sampled base path starting at p0: S' = -sum_k Gamma^k_0 lambda_k',
/// a' = 0. The lifted lambda reproduces the base samples exactly.
inline std::vector<ThermoPoint> horizontal_lift(const ConnectionSpec& spec, const ParamPath& base,
                                                const ThermoPoint& p0) {
    p0.validate();
    if (p0.n() != spec.n()) throw ConfigError("start point dimension does not match the connection's n");
    if (p0.lambda != base[0]) throw ConfigError("lift start point must lie over the first path sample");
    const auto dS = detail::lift_increments(spec, base);
    std::vector<ThermoPoint> out;
    out.reserve(dS.size() + 1);
    out.push_back(p0);
    for (int k = 0; k < base.steps(); ++k) out.push_back({out.back().S + dS[k], p0.a, base[k + 1]});
    return out;
}

/// d_k (h_l / g_S) - d_l (h_k / g_S) by the five-point stencil.
inline double curvature(const ConnectionSpec& spec, const RVector& lambda, int k, int l) {
    if (spec.n() < 2) throw ConfigError("curvature needs n >= 2");
    if (k < 0 || l < 0 || k >= spec.n() || l >= spec.n()) throw ConfigError("curvature index out of range");
    if (k == l) return 0.0;
    const auto partial = [&](int along, int component) {
        const auto f = [&](double s) {
            RVector x = lambda;
            x(along) = s;
            return spec.ratio(x)(component);
        };
        return central_difference(f, lambda(along), spec.fd_step, 4);
    };
    return partial(k, l) - partial(l, k);
}

/// Closed base path.
class Loop {
public:
    static constexpr int kMinSteps = 16;
    static constexpr double kClosureTolerance = 1e-12;

    explicit Loop(ParamPath path) : path_(std::move(path)) {
        if (path_.steps() < kMinSteps)
            throw ConfigError("loop needs at least " + std::to_string(kMinSteps) + " steps");
        const double gap = (path_[0] - path_[path_.steps()]).cwiseAbs().maxCoeff();
        if (!(gap <= kClosureTolerance)) {
            std::ostringstream os;
            os << "loop is not closed: endpoint gap " << gap;
            throw ConfigError(os.str());
        }
    }

    /// Boundary of [k_min, k_max] x [l_min, l_max] in the (lambda_k, lambda_l) plane,
    /// counter-clockwise from (k_min, l_min), other coordinates fixed at `base`.
    static Loop rectangle(const RVector& base, int k, int l, double k_min, double k_max, double l_min, double l_max,
                          int steps_per_side) {
        if (k == l || k < 0 || l < 0 || k >= base.size() || l >= base.size())
            throw ConfigError("rectangle needs two distinct coordinate indices");
        const auto corner = [&](double x, double y) {
            RVector c = base;
            c(k) = x;
            c(l) = y;
            return c;
        };
        const RVector corners[5] = {corner(k_min, l_min), corner(k_max, l_min), corner(k_max, l_max),
                                    corner(k_min, l_max), corner(k_min, l_min)};
        std::vector<RVector> samples;
        for (int side = 0; side < 4; ++side) {
            for (int j = 0; j < steps_per_side; ++j) {
                const double s = static_cast<double>(j) / steps_per_side;
                samples.push_back((1.0 - s) * corners[side] + s * corners[side + 1]);
            }
        }
        samples.push_back(corners[4]);
        return Loop(ParamPath::from_samples(1.0, std::move(samples)));
    }

    const ParamPath& path() const noexcept { return path_; }

    Loop reversed() const {
        std::vector<RVector> s(path_.samples().rbegin(), path_.samples().rend());
        return Loop(ParamPath::from_samples(path_.duration(), std::move(s)));
    }

    /// This loop followed by `other`; both must start at the same point.
    Loop then(const Loop& other) const {
        if ((path_[0] - other.path_[0]).cwiseAbs().maxCoeff() > kClosureTolerance)
            throw ConfigError("loops to concatenate must share a base point");
        std::vector<RVector> s = path_.samples();
        s.insert(s.end(), other.path_.samples().begin() + 1, other.path_.samples().end());
        return Loop(ParamPath::from_samples(path_.duration() + other.path_.duration(), std::move(s)));
    }

private:
    ParamPath path_;
};

struct HolonomyResult {
    enum class Method { lift, curvature_integral };

    double dS;
    RVector da;
    Method method;
};

inline std::string to_string(HolonomyResult::Method m) {
    return m == HolonomyResult::Method::lift ? "lift" : "curvature-integral";
}

/// Vertical displacement of the lifted loop. Summed from the per-segment
/// increments, so it does not depend on the (S, a) label of p0 at all.
inline HolonomyResult holonomy_via_lift(const ConnectionSpec& spec, const Loop& loop, const ThermoPoint& p0) {
    p0.validate();
    if (p0.n() != spec.n()) throw ConfigError("start point dimension does not match the connection's n");
    if (p0.lambda != loop.path()[0]) throw ConfigError("holonomy base point must lie over the loop start");
    const auto dS = detail::lift_increments(spec, loop.path());
    return {std::accumulate(dS.begin(), dS.end(), 0.0), RVector::Zero(spec.n()), HolonomyResult::Method::lift};
}

inline HolonomyResult holonomy_via_lift(const ConnectionSpec& spec, const Loop& loop) {
    return holonomy_via_lift(spec, loop, {0.0, RVector::Zero(spec.n()), loop.path()[0]});
}

/// Coordinate rectangle in the (lambda_k, lambda_l) plane through `base`.
struct Rectangle {
    int k = 0;
    int l = 1;
    double k_min = 0.0, k_max = 1.0;
    double l_min = 0.0, l_max = 1.0;
    RVector base;

    void validate(int n) const {
        if (n < 2) throw ConfigError("a rectangle needs n >= 2");
        if (k == l || k < 0 || l < 0 || k >= n || l >= n) throw ConfigError("rectangle needs two distinct coordinates");
        if (base.size() != n) throw ConfigError("rectangle base point has the wrong length");
        if (!(k_min <= k_max) || !(l_min <= l_max)) throw ConfigError("rectangle bounds are inverted");
    }

    Loop boundary(int steps_per_side) const {
        return Loop::rectangle(base, k, l, k_min, k_max, l_min, l_max, steps_per_side);
    }
};

/// dS = -iint R_kl dlambda_k dlambda_l over the rectangle, 2-D composite trapezoid
/// on an (nk+1) x (nl+1) grid.
inline HolonomyResult holonomy_via_curvature(const ConnectionSpec& spec, const Rectangle& rect, int nk, int nl) {
    rect.validate(spec.n());
    if (nk < 1 || nl < 1) throw ConfigError("curvature integration grid needs at least one cell per side");
    const double hk = (rect.k_max - rect.k_min) / nk;
    const double hl = (rect.l_max - rect.l_min) / nl;
    double sum = 0.0;
    for (int i = 0; i <= nk; ++i) {
        const double wi = (i == 0 || i == nk) ? 0.5 : 1.0;
        for (int j = 0; j <= nl; ++j) {
            const double wj = (j == 0 || j == nl) ? 0.5 : 1.0;
            RVector x = rect.base;
            x(rect.k) = rect.k_min + i * hk;
            x(rect.l) = rect.l_min + j * hl;
            sum += wi * wj * curvature(spec, x, rect.k, rect.l);
        }
    }
    return {-sum * hk * hl, RVector::Zero(spec.n()), HolonomyResult::Method::curvature_integral};
}

/// R_kl at every point, in input order.
inline std::vector<double> curvature_grid(const ConnectionSpec& spec, const std::vector<RVector>& points, int k, int l,
                                          unsigned threads = 0) {
    return parallel_map(points, [&](const RVector& x) { return curvature(spec, x, k, l); }, threads);
}

struct FlatnessReport {
    bool flat;
    double max_abs_curvature;
    int k = -1, l = -1;  // worst pair, -1 if there is none (n = 1)
    RVector where;
};

/// Flat iff |R_kl| <= tol for every pair k < l at every grid point.
inline FlatnessReport flatness_check(const ConnectionSpec& spec, const std::vector<RVector>& grid,
                                     double tol = 1e-7) {
    if (grid.empty()) throw ConfigError("flatness check needs a nonempty grid");
    FlatnessReport r{true, 0.0, -1, -1, grid.front()};
    if (spec.n() < 2) {
        for (const auto& x : grid) spec.ratio(x);  // domain checks only
        return r;
    }
    for (const auto& x : grid) {
        for (int k = 0; k < spec.n(); ++k) {
            for (int l = k + 1; l < spec.n(); ++l) {
                const double c = std::abs(curvature(spec, x, k, l));
                if (c > r.max_abs_curvature || r.k < 0) {
                    r.max_abs_curvature = std::max(r.max_abs_curvature, c);
                    r.k = k;
                    r.l = l;
                    r.where = x;
                }
            }
        }
    }
    r.flat = r.max_abs_curvature <= tol;
    return r;
}

/// Vertical segment at fixed lambda from `from` to `to` (equal lambda), for
/// measuring the gap a holonomy opens in the fiber.
inline std::vector<ThermoPoint> vertical_segment(const ThermoPoint& from, const ThermoPoint& to, int steps = 16) {
    if (from.lambda != to.lambda) throw ConfigError("vertical segment endpoints must share lambda");
    if (steps < 2) throw ConfigError("vertical segment needs at least 2 steps");
    std::vector<ThermoPoint> out;
    for (int k = 0; k <= steps; ++k) {
        const double s = static_cast<double>(k) / steps;
        out.push_back({(1.0 - s) * from.S + s * to.S, (1.0 - s) * from.a + s * to.a, from.lambda});
    }
    return out;
}

}  // namespace qtgeom
