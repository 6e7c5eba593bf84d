#pragma once

// The (2n+1)-dimensional thermodynamic state space with coordinates (S, a, lambda)
// and contact form eta = dS - sum_i lambda_i da_i. Equilibrium states form the
// Legendrian image of lambda -> (S(lambda), a(lambda), lambda).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "exprlang.hpp"
#include "fd.hpp"
#include "geometry.hpp"
#include "gibbs.hpp"
#include "processes.hpp"

namespace qtgeom {

struct ThermoPoint {
    double S = 0.0;
    RVector a;
    RVector lambda;

    int n() const noexcept { return static_cast<int>(lambda.size()); }

    void validate() const {
        if (a.size() != lambda.size()) throw ConfigError("thermodynamic point: a and lambda differ in length");
        if (!std::isfinite(S) || !a.allFinite() || !lambda.allFinite())
            throw ConfigError("thermodynamic point has non-finite coordinates");
    }

    expr::Environment environment() const {
        expr::Environment env(n());
        env.set_S(S).set_a(a).set_l(lambda);
        return env;
    }

    /// Coordinates in the order (S, a1, l1, ..., an, ln).
    RVector interleaved() const {
        RVector x(2 * n() + 1);
        x(0) = S;
        for (int i = 0; i < n(); ++i) {
            x(1 + 2 * i) = a(i);
            x(2 + 2 * i) = lambda(i);
        }
        return x;
    }

    static ThermoPoint from_interleaved(const RVector& x) {
        const int n = static_cast<int>(x.size() - 1) / 2;
        ThermoPoint p{x(0), RVector(n), RVector(n)};
        for (int i = 0; i < n; ++i) {
            p.a(i) = x(1 + 2 * i);
            p.lambda(i) = x(2 + 2 * i);
        }
        return p;
    }
};

struct TangentVector {
    double dS = 0.0;
    RVector da;
    RVector dlambda;

    static TangentVector zero(int n) { return {0.0, RVector::Zero(n), RVector::Zero(n)}; }
    static TangentVector reeb(int n) { return {1.0, RVector::Zero(n), RVector::Zero(n)}; }

    static TangentVector from_interleaved(const RVector& x) {
        const ThermoPoint p = ThermoPoint::from_interleaved(x);
        return {p.S, p.a, p.lambda};
    }
};

inline double eta_eval(const ThermoPoint& p, const TangentVector& v) {
    return v.dS - p.lambda.dot(v.da);
}

// --- exterior algebra on the coordinate basis ------------------------------

/// A one-form given by its coefficients on the interleaved coordinate basis.
using OneForm = std::function<RVector(const RVector&)>;

inline OneForm contact_form() {
    return [](const RVector& x) {
        RVector c = RVector::Zero(x.size());
        c(0) = 1.0;
        for (Eigen::Index i = 1; i + 1 < x.size(); i += 2) c(i) = -x(i + 1);
        return c;
    };
}

/// (d alpha)_jk = d_j alpha_k - d_k alpha_j by central differences.
inline RMatrix exterior_derivative(const OneForm& alpha, const RVector& x, const FDScheme& scheme = {}) {
    scheme.validate();
    const Eigen::Index m = x.size();
    RMatrix jac(m, m);  // jac(k, j) = d_j alpha_k
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto along = [&](double s) {
            RVector y = x;
            y(j) = s;
            return RVector(alpha(y));
        };
        jac.col(j) = central_difference(along, x(j), scheme);
    }
    return jac.transpose() - jac;
}

/// Coefficient of alpha ^ (d alpha)^n on e_1 ^ ... ^ e_{2n+1}, by brute-force
/// antisymmetrization over all orderings of the basis. The 1/2^n accounts for
/// the two orderings inside each d alpha factor, so dS ^ da ^ dl evaluates to 1.
inline double volume_form_coefficient(const OneForm& alpha, const RVector& x, const FDScheme& scheme = {}) {
    const int m = static_cast<int>(x.size());
    if (m < 3 || m % 2 == 0) throw ConfigError("volume form needs an odd dimension >= 3");
    const RVector a = alpha(x);
    const RMatrix w = exterior_derivative(alpha, x, scheme);
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    double total = 0.0;
    do {
        int inversions = 0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) inversions += perm[i] > perm[j];
        double term = a(perm[0]);
        for (int k = 1; k < m && term != 0.0; k += 2) term *= w(perm[k], perm[k + 1]);
        total += (inversions % 2 == 0) ? term : -term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::ldexp(total, -(m - 1) / 2);
}

/// eta ^ (d eta)^n at a generic point. Nonzero iff eta is a contact form.
inline double contact_volume_coefficient(int n) {
    if (n < 1) throw ConfigError("contact_volume_coefficient needs n >= 1");
    RVector x(2 * n + 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 0.3 + 0.1 * static_cast<double>(i);
    return volume_form_coefficient(contact_form(), x);
}

/// eta(R) and max_j |d eta(R, e_j)| for the Reeb field R = d/dS.
struct ReebCheck {
    double eta_of_reeb;
    double max_contraction;
};

inline ReebCheck reeb_check(const ThermoPoint& p, const FDScheme& scheme = {}) {
    const RVector x = p.interleaved();
    const RMatrix w = exterior_derivative(contact_form(), x, scheme);
    return {eta_eval(p, TangentVector::reeb(p.n())), w.row(0).cwiseAbs().maxCoeff()};
}

/// Rank of eta as a row vector on the coordinate basis (its kernel has dimension 2n+1-rank).
inline int eta_rank(const ThermoPoint& p) {
    const RVector c = contact_form()(p.interleaved());
    return c.cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
}

// --- equilibrium embedding -------------------------------------------------

inline ThermoPoint equilibrium_point(const ObservableSet& obs, const RVector& c) {
    const GibbsPoint g = gibbs_point(obs, c);
    return {g.S, g.a, c};
}

/// d/d lambda_i of (S, a) along the equilibrium embedding. Column i is the
/// derivative along lambda_i; row 0 is S, rows 1..n are a.
inline RMatrix equilibrium_jacobian(const ObservableSet& obs, const RVector& lambda, const FDScheme& scheme = {}) {
    scheme.validate();
    const int n = obs.size();
    RMatrix j(n + 1, n);
    for (int i = 0; i < n; ++i) {
        const auto sa = [&](double s) {
            RVector l = lambda;
            l(i) = s;
            const GibbsPoint g = gibbs_point(obs, l);
            RVector out(n + 1);
            out(0) = g.S;
            out.tail(n) = g.a;
            return out;
        };
        j.col(i) = central_difference(sa, lambda(i), scheme);
    }
    return j;
}

/// Tangent of the equilibrium embedding along the lambda-direction u.
inline TangentVector equilibrium_tangent(const ObservableSet& obs, const RVector& lambda, const RVector& u,
                                         const FDScheme& scheme = {}) {
    const RVector d = equilibrium_jacobian(obs, lambda, scheme) * u;
    return {d(0), d.tail(obs.size()), u};
}

/// max over grid points and coordinates of |dS/dl_i - sum_j l_j da_j/dl_i|.
inline double legendrian_residual(const ObservableSet& obs, const std::vector<RVector>& grid,
                                  const FDScheme& scheme = {}) {
    double worst = 0.0;
    for (const RVector& lambda : grid) {
        const RMatrix j = equilibrium_jacobian(obs, lambda, scheme);
        const RVector r = j.row(0).transpose() - j.bottomRows(obs.size()).transpose() * lambda;
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
}

// --- state function ----------------------------------------------------------

/// mu_i = lambda_i + f_i(S, a, lambda); f must vanish on equilibrium points.
class MuExtension {
public:
    static constexpr double kValidationTolerance = 1e-8;

    explicit MuExtension(std::vector<expr::Expr> f) : f_(std::move(f)) {
        if (f_.empty()) throw ConfigError("mu extension needs at least one component");
        for (const auto& e : f_)
            if (e.n() != n()) throw ConfigError("mu extension components disagree on n");
    }

    static MuExtension trivial(int n) { return MuExtension(std::vector<expr::Expr>(n, expr::parse("0", n))); }

    static MuExtension parse(const std::vector<std::string>& f, int n) {
        if (static_cast<int>(f.size()) != n)
            throw ConfigError("mu extension needs " + std::to_string(n) + " components, got " +
                              std::to_string(f.size()));
        std::vector<expr::Expr> out;
        for (const auto& s : f) out.push_back(expr::parse(s, n));
        return MuExtension(std::move(out));
    }

    int n() const noexcept { return static_cast<int>(f_.size()); }
    const std::vector<expr::Expr>& f() const noexcept { return f_; }

    RVector offsets(const ThermoPoint& p) const {
        check(p);
        const auto env = p.environment();
        RVector out(n());
        for (int i = 0; i < n(); ++i) out(i) = f_[i].eval(env);
        return out;
    }

    RVector operator()(const ThermoPoint& p) const { return p.lambda + offsets(p); }

    /// Deterministic low-discrepancy grid in [-2, 2]^n used to check that f vanishes on equilibrium.
    static std::vector<RVector> validation_grid(int n, int points = 32) {
        std::vector<RVector> grid;
        for (int j = 0; j < points; ++j) {
            RVector l(n);
            for (int i = 0; i < n; ++i) {
                // 2 + 3i is never a perfect square, so the stride is irrational
                const double r = std::sqrt(2.0 + 3.0 * i);
                const double u = std::fmod((j + 0.5) * (r - std::floor(r)), 1.0);
                l(i) = -2.0 + 4.0 * u;
            }
            grid.push_back(std::move(l));
        }
        return grid;
    }

    /// Throws ValidationError if some |f_i| >= tolerance at an equilibrium point.
    void validate(const ObservableSet& obs, const std::vector<RVector>& grid,
                  double tolerance = kValidationTolerance) const {
        if (obs.size() != n()) throw ConfigError("mu extension size does not match the observable set");
        for (const RVector& l : grid) {
            const RVector f = offsets(equilibrium_point(obs, l));
            const double worst = f.cwiseAbs().maxCoeff();
            if (!(worst < tolerance)) {
                std::ostringstream os;
                os << "mu extension does not vanish at equilibrium: max |f| = " << worst << " at lambda = ("
                   << l.transpose() << ")";
                throw ValidationError(os.str());
            }
        }
    }

    void validate(const ObservableSet& obs) const { validate(obs, validation_grid(n())); }

private:
    void check(const ThermoPoint& p) const {
        if (p.n() != n()) throw ConfigError("point dimension does not match the mu extension");
    }

    std::vector<expr::Expr> f_;
};

inline DensityOperator state_function(const ObservableSet& obs, const MuExtension& mu, const ThermoPoint& p) {
    return gibbs_point(obs, mu(p)).rho;
}

inline bool fiber_membership(const ObservableSet& /*obs*/, const MuExtension& mu, const ThermoPoint& p,
                             const RVector& c, double tol = 1e-9) {
    const RVector m = mu(p);
    if (m.size() != c.size()) throw ConfigError("fiber label has the wrong length");
    return (m - c).cwiseAbs().maxCoeff() <= tol;
}

struct FiberDimension {
    int jacobian_rank;
    int dimension;  // 2n+1 - rank
};

/// Local dimension of the level set mu = mu(p) from the rank of the FD Jacobian of mu.
inline FiberDimension fiber_dimension(const MuExtension& mu, const ThermoPoint& p, const FDScheme& scheme = {}) {
    scheme.validate();
    const RVector x = p.interleaved();
    const Eigen::Index m = x.size();
    RMatrix jac(mu.n(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto along = [&](double s) {
            RVector y = x;
            y(j) = s;
            return RVector(mu(ThermoPoint::from_interleaved(y)));
        };
        jac.col(j) = central_difference(along, x(j), scheme);
    }
    const Eigen::JacobiSVD<RMatrix> svd(jac);
    const RVector sv = svd.singularValues();
    const double cut = 1e-8 * std::max(1.0, sv.size() ? sv(0) : 0.0);
    const int rank = static_cast<int>((sv.array() > cut).count());
    return {rank, static_cast<int>(m) - rank};
}

/// Gauge action of R^{n+1} on labels: (S, a, l) -> (S + dS, a + da, l).
inline ThermoPoint gauge_translate(const ThermoPoint& p, double dS, const RVector& da) {
    if (da.size() != p.a.size()) throw ConfigError("gauge translation has the wrong length");
    return {p.S + dS, p.a + da, p.lambda};
}

// --- pseudo-Riemannian metric on the state space -------------------------------

struct MMetricSpec {
    expr::Expr g_S;
    std::vector<expr::Expr> g_a;
    std::vector<expr::Expr> h;

    static constexpr double kDegenerateThreshold = 1e-12;

    int n() const noexcept { return g_S.n(); }

    static MMetricSpec parse(const std::string& g_S, const std::vector<std::string>& g_a,
                             const std::vector<std::string>& h, int n) {
        if (static_cast<int>(g_a.size()) != n || static_cast<int>(h.size()) != n)
            throw ConfigError("metric spec needs " + std::to_string(n) + " g_a and h entries");
        MMetricSpec s{expr::parse(g_S, n), {}, {}};
        for (const auto& e : g_a) s.g_a.push_back(expr::parse(e, n));
        for (const auto& e : h) s.h.push_back(expr::parse(e, n));
        return s;
    }

    struct Values {
        double g_S;
        RVector g_a;
        RVector h;
    };

    /// Evaluates every field at p; checks g_a > 0 and |g_S| above threshold.
    Values at(const ThermoPoint& p) const {
        if (p.n() != n()) throw ConfigError("point dimension does not match the metric spec");
        const auto env = p.environment();
        Values v{g_S.eval(env), RVector(n()), RVector(n())};
        for (int i = 0; i < n(); ++i) {
            v.g_a(i) = g_a[i].eval(env);
            v.h(i) = h[i].eval(env);
        }
        if (!(std::abs(v.g_S) > kDegenerateThreshold)) {
            std::ostringstream os;
            os << "degenerate metric: g_S = " << v.g_S << " at lambda = (" << p.lambda.transpose() << ")";
            throw DegenerateMetricError(os.str());
        }
        for (int i = 0; i < n(); ++i) {
            if (!(v.g_a(i) > 0.0)) {
                std::ostringstream os;
                os << "g_a" << i + 1 << " = " << v.g_a(i) << " is not positive at lambda = (" << p.lambda.transpose()
                   << ")";
                throw ValidationError(os.str());
            }
        }
        return v;
    }
};

inline double gM_quadratic(const MMetricSpec& spec, const MetricTensor& g, const ThermoPoint& p,
                           const TangentVector& v) {
    if (g.dim() != p.n()) throw ConfigError("metric tensor dimension does not match the point");
    const auto f = spec.at(p);
    return f.g_S * v.dS * v.dS + (f.g_a.array() * v.da.array().square()).sum() + g.quadratic(v.dlambda) +
           2.0 * v.dS * f.h.dot(v.dlambda);
}

/// Length of a vertical path (fixed lambda) under the fiber-restricted metric
/// g_S dS^2 + sum g_a da^2, sampled uniformly over [0, duration].
inline double fiber_path_length(const MMetricSpec& spec, const std::vector<ThermoPoint>& path, double duration = 1.0) {
    if (path.size() < 3) throw ConfigError("fiber path needs at least 3 samples");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("fiber path duration must be positive");
    const int n = path.front().n();
    std::vector<RVector> coords;
    coords.reserve(path.size());
    for (const auto& p : path) {
        p.validate();
        if (p.n() != n || p.lambda != path.front().lambda)
            throw ConfigError("fiber path must keep lambda fixed");
        RVector c(n + 1);
        c(0) = p.S;
        c.tail(n) = p.a;
        coords.push_back(std::move(c));
    }
    const ParamPath vertical = ParamPath::from_samples(duration, std::move(coords), 2);
    const auto vel = vertical.velocities();
    std::vector<double> speed(path.size());
    for (std::size_t k = 0; k < path.size(); ++k) {
        const RVector& d = vel[k];
        const auto f = spec.at(path[k]);
        if (!(f.g_S > 0.0)) {
            std::ostringstream os;
            os << "vertical metric is not positive definite: g_S = " << f.g_S;
            throw SignatureError(os.str());
        }
        speed[k] = std::sqrt(f.g_S * d(0) * d(0) + (f.g_a.array() * d.tail(n).array().square()).sum());
    }
    return trapezoid(speed, vertical.dt());
}

}  // namespace qtgeom
