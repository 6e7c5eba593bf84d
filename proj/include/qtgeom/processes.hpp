#pragma once

// Processes on the Gibbs manifold: sampled parameter paths, thermodynamic
// length, entropy production, geodesics by discrete path-energy minimization,
// and scans along rays toward the rank-deficient boundary.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exprlang.hpp"
#include "geometry.hpp"
#include "gibbs.hpp"

namespace qtgeom {

/// Curve lambda(t) sampled on the uniform grid t_k = k T / K, k = 0..K.
class ParamPath {
public:
    enum class Provenance { explicit_samples, expression_defined };

    static constexpr int kMinSteps = 8;

    static ParamPath from_samples(double duration, std::vector<RVector> samples, int min_steps = kMinSteps) {
        ParamPath p;
        p.duration_ = duration;
        p.samples_ = std::move(samples);
        p.provenance_ = Provenance::explicit_samples;
        p.validate(min_steps);
        return p;
    }

    /// Evaluate one expression per coordinate at every grid time. Expressions
    /// may use the variable t.
    static ParamPath from_expressions(double duration, int steps, const std::vector<expr::Expr>& coords,
                                      int min_steps = kMinSteps) {
        if (coords.empty()) throw ConfigError("path needs at least one coordinate expression");
        if (steps < min_steps) {
            throw ConfigError("path needs at least " + std::to_string(min_steps) + " steps, got " +
                              std::to_string(steps));
        }
        const int n = static_cast<int>(coords.size());
        std::vector<RVector> samples;
        samples.reserve(steps + 1);
        for (int k = 0; k <= steps; ++k) {
            expr::Environment env(coords.front().n());
            env.set_t(duration * k / steps);
            RVector l(n);
            for (int i = 0; i < n; ++i) l(i) = coords[i].eval(env);
            samples.push_back(std::move(l));
        }
        ParamPath p = from_samples(duration, std::move(samples), min_steps);
        p.provenance_ = Provenance::expression_defined;
        return p;
    }

    /// Straight line from a to b with the given number of steps.
    static ParamPath straight(const RVector& a, const RVector& b, int steps, double duration = 1.0) {
        std::vector<RVector> samples;
        samples.reserve(steps + 1);
        for (int k = 0; k <= steps; ++k) {
            const double s = static_cast<double>(k) / steps;
            samples.push_back((1.0 - s) * a + s * b);
        }
        return from_samples(duration, std::move(samples));
    }

    double duration() const noexcept { return duration_; }
    int steps() const noexcept { return static_cast<int>(samples_.size()) - 1; }
    double dt() const noexcept { return duration_ / steps(); }
    int dim() const noexcept { return static_cast<int>(samples_.front().size()); }
    double time(int k) const noexcept { return duration_ * k / steps(); }
    const std::vector<RVector>& samples() const noexcept { return samples_; }
    const RVector& operator[](int k) const { return samples_.at(k); }
    Provenance provenance() const noexcept { return provenance_; }

    /// Same samples over a different duration.
    ParamPath with_duration(double duration) const {
        ParamPath p = from_samples(duration, samples_);
        p.provenance_ = provenance_;
        return p;
    }

    /// Piecewise-linear interpolation between samples.
    RVector at(double t) const {
        const double u = std::clamp(t / duration_, 0.0, 1.0) * steps();
        const int k = std::min(static_cast<int>(std::floor(u)), steps() - 1);
        const double s = u - k;
        return (1.0 - s) * samples_[k] + s * samples_[k + 1];
    }

    /// Grid velocities: central differences inside, second-order one-sided at the ends.
    std::vector<RVector> velocities() const {
        const int kk = steps();
        const double h = dt();
        std::vector<RVector> v(kk + 1);
        for (int k = 1; k < kk; ++k) v[k] = (samples_[k + 1] - samples_[k - 1]) / (2.0 * h);
        v[0] = (4.0 * (samples_[1] - samples_[0]) - (samples_[2] - samples_[0])) / (2.0 * h);
        v[kk] = (4.0 * (samples_[kk] - samples_[kk - 1]) - (samples_[kk] - samples_[kk - 2])) / (2.0 * h);
        return v;
    }

private:
    void validate(int min_steps) const {
        if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
            std::ostringstream os;
            os << "path duration must be positive and finite, got " << duration_;
            throw ConfigError(os.str());
        }
        if (static_cast<int>(samples_.size()) < min_steps + 1) {
            throw ConfigError("path needs at least " + std::to_string(min_steps + 1) + " samples, got " +
                              std::to_string(samples_.size()));
        }
        const auto n = samples_.front().size();
        if (n == 0) throw ConfigError("path samples must be nonempty vectors");
        for (std::size_t k = 0; k < samples_.size(); ++k) {
            if (samples_[k].size() != n) {
                throw ConfigError("path sample " + std::to_string(k) + " has " + std::to_string(samples_[k].size()) +
                                  " coordinates, expected " + std::to_string(n));
            }
            if (!samples_[k].allFinite()) throw ConfigError("path sample " + std::to_string(k) + " is not finite");
        }
    }

    double duration_ = 1.0;
    std::vector<RVector> samples_;
    Provenance provenance_ = Provenance::explicit_samples;
};

/// Composite trapezoid rule on a uniform grid.
inline double trapezoid(const std::vector<double>& f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
    return s * h;
}

struct LengthReport {
    double length = 0.0;
    /// Trapezoid integral of g(lambda', lambda') dt.
    double energy = 0.0;
    /// sqrt(g(lambda', lambda')) at each grid time.
    std::vector<double> speeds;
    /// Trapezoid contribution of each of the K segments to the length.
    std::vector<double> segment_lengths;
};

namespace detail {

inline void check_path_dim(const ObservableSet& obs, const ParamPath& path) {
    if (path.dim() != obs.size()) {
        throw ConfigError("path has " + std::to_string(path.dim()) + " coordinates, observable set has " +
                          std::to_string(obs.size()));
    }
}

/// g(lambda'(t_k), lambda'(t_k)) at every grid time.
inline std::vector<double> squared_speeds(const ObservableSet& obs, const ParamPath& path, const FDScheme& scheme) {
    check_path_dim(obs, path);
    const auto metrics = metric_grid(obs, path.samples(), scheme);
    const auto vel = path.velocities();
    std::vector<double> out(vel.size());
    for (std::size_t k = 0; k < vel.size(); ++k) out[k] = std::max(0.0, metrics[k].quadratic(vel[k]));
    return out;
}

}  // namespace detail

/// L = int sqrt(g_ij lambda_i' lambda_j') dt by the composite trapezoid rule.
inline LengthReport thermo_length(const ObservableSet& obs, const ParamPath& path, const FDScheme& scheme = {}) {
    const auto sq = detail::squared_speeds(obs, path, scheme);
    LengthReport r;
    r.speeds.resize(sq.size());
    for (std::size_t k = 0; k < sq.size(); ++k) r.speeds[k] = std::sqrt(sq[k]);
    const double h = path.dt();
    r.segment_lengths.resize(sq.size() - 1);
    for (std::size_t k = 0; k + 1 < sq.size(); ++k) r.segment_lengths[k] = 0.5 * h * (r.speeds[k] + r.speeds[k + 1]);
    r.length = trapezoid(r.speeds, h);
    r.energy = trapezoid(sq, h);
    return r;
}

struct EntropyProductionReport {
    /// kappa g(lambda', lambda') at each grid time.
    std::vector<double> rate;
    double total = 0.0;
};

inline EntropyProductionReport entropy_production(const ObservableSet& obs, const ParamPath& path, double kappa = 1.0,
                                                  const FDScheme& scheme = {}) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        std::ostringstream os;
        os << "kappa must be positive, got " << kappa;
        throw ConfigError(os.str());
    }
    EntropyProductionReport r;
    r.rate = detail::squared_speeds(obs, path, scheme);
    for (double& x : r.rate) x *= kappa;
    r.total = trapezoid(r.rate, path.dt());
    return r;
}

// ---------------------------------------------------------------------------
// Geodesics

struct GeodesicProblem {
    RVector start;
    RVector end;
    /// Number of segments K; the K - 1 interior samples are optimized.
    int segments = 64;
    int max_iters = 500;
    /// Stop when the max-norm of the energy gradient drops below this.
    double gradient_tolerance = 1e-7;
    double duration = 1.0;
    /// Step for finite differences of the metric in the energy gradient.
    double metric_fd_step = 1e-4;

    void validate(int n) const {
        if (start.size() != n || end.size() != n) {
            throw ConfigError("geodesic endpoints must have " + std::to_string(n) + " coordinates");
        }
        if (!start.allFinite() || !end.allFinite()) throw ConfigError("geodesic endpoints must be finite");
        if (segments < ParamPath::kMinSteps) {
            throw ConfigError("geodesic needs at least " + std::to_string(ParamPath::kMinSteps) + " segments");
        }
        if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
        if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient tolerance must be positive");
        if (!(duration > 0.0)) throw ConfigError("geodesic duration must be positive");
        if (!(metric_fd_step > 0.0 && metric_fd_step <= 1e-2)) throw ConfigError("metric_fd_step outside (0, 1e-2]");
    }
};

struct ConvergenceRecord {
    int iterations = 0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double final_gradient_norm = 0.0;
    bool converged = false;
    std::string message;
};

struct GeodesicResult {
    ParamPath path;
    LengthReport length;
    ConvergenceRecord convergence;
};

/// E = sum_k Delta_k^T g(m_k) Delta_k / dt with Delta_k = lambda_{k+1} - lambda_k
/// and m_k the segment midpoint.
inline double discrete_path_energy(const ObservableSet& obs, const std::vector<RVector>& samples, double dt,
                                   const FDScheme& scheme = {}) {
    double e = 0.0;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const RVector d = samples[k + 1] - samples[k];
        if (d.squaredNorm() == 0.0) continue;
        e += metric_tensor(obs, 0.5 * (samples[k] + samples[k + 1]), scheme).quadratic(d) / dt;
    }
    return e;
}

/// sqrt(Delta_k^T g(m_k) Delta_k) / dt for each segment.
inline std::vector<double> segment_speeds(const ObservableSet& obs, const std::vector<RVector>& samples, double dt,
                                          const FDScheme& scheme = {}) {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const RVector d = samples[k + 1] - samples[k];
        out.push_back(std::sqrt(std::max(0.0, metric_tensor(obs, 0.5 * (samples[k] + samples[k + 1]), scheme).quadratic(d))) / dt);
    }
    return out;
}

namespace detail {

struct SegmentTerms {
    RMatrix g;           // metric at the midpoint
    RVector quad_grad;   // d/dx [Delta^T g(x) Delta] at the midpoint
};

inline SegmentTerms segment_terms(const ObservableSet& obs, const RVector& mid, const RVector& delta,
                                  const FDScheme& scheme, double h) {
    const int n = static_cast<int>(mid.size());
    SegmentTerms t{metric_tensor(obs, mid, scheme).g(), RVector::Zero(n)};
    if (delta.squaredNorm() == 0.0) return t;
    for (int i = 0; i < n; ++i) {
        RVector up = mid, down = mid;
        up(i) += h;
        down(i) -= h;
        t.quad_grad(i) = (metric_tensor(obs, up, scheme).quadratic(delta) -
                          metric_tensor(obs, down, scheme).quadratic(delta)) / (2.0 * h);
    }
    return t;
}

/// Gradient of discrete_path_energy with respect to the interior samples,
/// stacked as (K - 1) blocks of n; also returns the midpoint metrics.
inline RVector path_energy_gradient(const ObservableSet& obs, const std::vector<RVector>& x, double dt,
                                    const FDScheme& scheme, double h, std::vector<RMatrix>* metrics) {
    const int kk = static_cast<int>(x.size()) - 1;
    const int n = static_cast<int>(x.front().size());
    std::vector<SegmentTerms> seg;
    seg.reserve(kk);
    for (int k = 0; k < kk; ++k) seg.push_back(segment_terms(obs, 0.5 * (x[k] + x[k + 1]), x[k + 1] - x[k], scheme, h));
    RVector grad(static_cast<Eigen::Index>(kk - 1) * n);
    for (int k = 1; k < kk; ++k) {
        const RVector left = x[k] - x[k - 1];
        const RVector right = x[k + 1] - x[k];
        grad.segment(static_cast<Eigen::Index>(k - 1) * n, n) =
            (2.0 * seg[k - 1].g * left - 2.0 * seg[k].g * right + 0.5 * seg[k - 1].quad_grad + 0.5 * seg[k].quad_grad) /
            dt;
    }
    if (metrics) {
        metrics->clear();
        for (auto& s : seg) metrics->push_back(std::move(s.g));
    }
    return grad;
}

/// Hessian of the energy with the metric frozen at the current midpoints:
/// block tridiagonal with (g_{k-1} + g_k) on the diagonal and -g_k off it.
inline Eigen::SparseMatrix<double> frozen_metric_hessian(const std::vector<RMatrix>& g, double dt) {
    const int kk = static_cast<int>(g.size());
    const int n = static_cast<int>(g.front().rows());
    const int size = (kk - 1) * n;
    double scale = 0.0;
    for (const auto& gk : g) scale = std::max(scale, gk.diagonal().cwiseAbs().maxCoeff());
    const double ridge = 1e-10 * std::max(scale, 1e-300);
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 1; k < kk; ++k) {
        const int row = (k - 1) * n;
        const RMatrix diag_block = (g[k - 1] + g[k]) * (2.0 / dt);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) trip.emplace_back(row + i, row + j, diag_block(i, j));
            trip.emplace_back(row + i, row + i, ridge);
        }
        if (k + 1 < kk) {
            const RMatrix off = -g[k] * (2.0 / dt);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    trip.emplace_back(row + i, row + n + j, off(i, j));
                    trip.emplace_back(row + n + j, row + i, off(i, j));
                }
        }
    }
    Eigen::SparseMatrix<double> hess(size, size);
    hess.setFromTriplets(trip.begin(), trip.end());
    return hess;
}

}  // namespace detail

/// Minimize the discrete path energy between fixed endpoints, starting from
/// the straight line in lambda. Each iteration takes a descent step
/// preconditioned by the frozen-metric Hessian, with backtracking (Armijo)
/// line search. Non-convergence is reported in the record, not thrown.
inline GeodesicResult geodesic_between(const ObservableSet& obs, const GeodesicProblem& problem,
                                       const FDScheme& scheme = {}) {
    problem.validate(obs.size());
    scheme.validate();
    const int kk = problem.segments;
    const int n = obs.size();
    const double dt = problem.duration / kk;

    std::vector<RVector> x = ParamPath::straight(problem.start, problem.end, kk, problem.duration).samples();
    ConvergenceRecord rec;
    double energy = discrete_path_energy(obs, x, dt, scheme);
    rec.initial_energy = energy;

    const auto shifted = [&](const RVector& step, double alpha) {
        std::vector<RVector> y = x;
        for (int k = 1; k < kk; ++k) y[k] += alpha * step.segment(static_cast<Eigen::Index>(k - 1) * n, n);
        return y;
    };

    std::vector<RMatrix> mids;
    for (rec.iterations = 0;; ++rec.iterations) {
        const RVector grad = detail::path_energy_gradient(obs, x, dt, scheme, problem.metric_fd_step, &mids);
        rec.final_gradient_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        if (rec.final_gradient_norm < problem.gradient_tolerance) {
            rec.converged = true;
            rec.message = "gradient below tolerance";
            break;
        }
        if (rec.iterations >= problem.max_iters) {
            rec.message = "iteration limit reached";
            break;
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(detail::frozen_metric_hessian(mids, dt));
        RVector dir;
        if (solver.info() == Eigen::Success) dir = -solver.solve(grad);
        if (dir.size() != grad.size() || !dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;

        const double slope = dir.dot(grad);
        double alpha = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 50; ++halvings, alpha *= 0.5) {
            std::vector<RVector> trial = shifted(dir, alpha);
            double e_trial;
            try {
                e_trial = discrete_path_energy(obs, trial, dt, scheme);
            } catch (const NumericError&) {
                continue;  // step left the admissible region; shrink
            }
            if (e_trial <= energy + 1e-4 * alpha * slope) {
                x = std::move(trial);
                energy = e_trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            rec.message = "line search could not decrease the energy";
            break;
        }
    }
    rec.final_energy = energy;

    ParamPath path = ParamPath::from_samples(problem.duration, x);
    LengthReport length = thermo_length(obs, path, scheme);
    return GeodesicResult{std::move(path), std::move(length), std::move(rec)};
}

// ---------------------------------------------------------------------------
// Rays toward the boundary

namespace detail {

inline void check_ray(const ObservableSet& obs, const RVector& direction, const std::vector<double>& lambdas) {
    if (direction.size() != obs.size()) {
        throw ConfigError("direction has " + std::to_string(direction.size()) + " components, expected " +
                          std::to_string(obs.size()));
    }
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "direction must be a unit vector, has norm " << direction.norm();
        throw ConfigError(os.str());
    }
    if (lambdas.empty()) throw ConfigError("Lambda list must be nonempty");
    if (!(lambdas.front() >= 0.0)) throw ConfigError("Lambda values must be nonnegative");
    for (std::size_t j = 1; j < lambdas.size(); ++j) {
        if (!(lambdas[j] > lambdas[j - 1])) throw ConfigError("Lambda values must be strictly increasing");
    }
}

}  // namespace detail

struct ThirdLawRow {
    double Lambda;
    double length;
    /// L(Lambda_j) - L(Lambda_{j-1}); for the first row, L(Lambda_0).
    double increment;
};

struct ThirdLawScan {
    std::vector<ThirdLawRow> rows;
    bool monotone = true;
    /// Whether successive increments shrink; reported as a convergence hint only.
    bool increments_decreasing = true;
};

/// Thermodynamic length of the ray 0 -> Lambda_j * direction for each Lambda_j.
/// The ray is integrated piecewise between successive Lambda values with
/// `steps_per_piece` trapezoid steps, so lengths are cumulative.
inline ThirdLawScan third_law_scan(const ObservableSet& obs, const RVector& direction,
                                   const std::vector<double>& lambdas, const FDScheme& scheme = {},
                                   int steps_per_piece = 1024) {
    detail::check_ray(obs, direction, lambdas);
    if (steps_per_piece < ParamPath::kMinSteps) throw ConfigError("steps_per_piece too small");
    ThirdLawScan scan;
    double previous_lambda = 0.0;
    double total = 0.0;
    for (double lam : lambdas) {
        double piece = 0.0;
        if (lam > previous_lambda) {
            const auto path = ParamPath::straight(previous_lambda * direction, lam * direction, steps_per_piece,
                                                  lam - previous_lambda);
            piece = thermo_length(obs, path, scheme).length;
        } else {
            gibbs_point(obs, lam * direction);  // range check only
        }
        total += piece;
        scan.rows.push_back({lam, total, piece});
        previous_lambda = lam;
    }
    for (std::size_t j = 1; j < scan.rows.size(); ++j) {
        if (scan.rows[j].length < scan.rows[j - 1].length) scan.monotone = false;
        if (j >= 2 && scan.rows[j].increment >= scan.rows[j - 1].increment) scan.increments_decreasing = false;
    }
    return scan;
}

struct BoundaryEntropyRow {
    double Lambda;
    double S;
    /// S - ln k.
    double gap;
};

struct BoundaryEntropyScan {
    /// Dimension of the ground eigenspace of sum_i direction_i A_i.
    int ground_degeneracy = 1;
    /// ln k, the entropy of the limiting boundary stratum.
    double limit = 0.0;
    std::vector<BoundaryEntropyRow> rows;
};

inline int ground_degeneracy(const ObservableSet& obs, const RVector& direction) {
    const RVector e = eig(HermitianOperator::trusted(obs.combination(direction))).eigenvalues;
    const double tol = 1e-9 * std::max(1.0, e.cwiseAbs().maxCoeff());
    int k = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i)
        if (e(i) - e(0) <= tol) ++k;
    return k;
}

inline BoundaryEntropyScan boundary_entropy_limit(const ObservableSet& obs, const RVector& direction,
                                                  const std::vector<double>& lambdas) {
    detail::check_ray(obs, direction, lambdas);
    BoundaryEntropyScan scan;
    scan.ground_degeneracy = ground_degeneracy(obs, direction);
    scan.limit = std::log(static_cast<double>(scan.ground_degeneracy));
    for (double lam : lambdas) {
        const double s = gibbs_point(obs, lam * direction).S;
        scan.rows.push_back({lam, s, s - scan.limit});
    }
    return scan;
}

}  // namespace qtgeom
