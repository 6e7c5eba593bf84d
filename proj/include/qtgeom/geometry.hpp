#pragma once

// Fidelity, Bures-Wasserstein distance and the metric g_ij(lambda) on the Gibbs
// manifold, built from symmetric logarithmic derivatives of finite-difference
// state derivatives.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "fd.hpp"
#include "gibbs.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace qtgeom {

namespace detail {

/// Principal square root of a positive semidefinite matrix. Eigenvalues within
/// the clamp window below zero are treated as zero.
inline CMatrix psd_sqrt(const HermitianOperator& a, const char* what) {
    const Spectrum s = eig(a);
    if (s.eigenvalues(0) < -tol::clamp_window) {
        std::ostringstream os;
        os << what << " is not positive semidefinite: eigenvalue " << s.eigenvalues(0);
        throw ValidationError(os.str());
    }
    return s.apply([](double p) { return std::sqrt(std::max(p, 0.0)); });
}

/// tr[(sqrt(A) B sqrt(A))^{1/2}] given sqrt(A).
inline double root_fidelity_trace(const CMatrix& sqrt_a, const CMatrix& b) {
    const CMatrix inner = sqrt_a * b * sqrt_a;
    const RVector e = eig(HermitianOperator::trusted(inner)).eigenvalues;
    double f = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) f += std::sqrt(std::max(e(i), 0.0));
    return f;
}

}  // namespace detail

/// F = tr[(rho^{1/2} sigma rho^{1/2})^{1/2}].
inline double fidelity(const DensityOperator& rho, const DensityOperator& sigma) {
    if (rho.dim() != sigma.dim()) throw ValidationError("fidelity: dimension mismatch");
    const CMatrix sqrt_rho = rho.spectrum().apply([](double p) { return std::sqrt(p); });
    return detail::root_fidelity_trace(sqrt_rho, sigma.matrix());
}

/// Bures-Wasserstein distance between positive semidefinite matrices of any trace.
inline double bw_distance(const HermitianOperator& a, const HermitianOperator& b) {
    if (a.dim() != b.dim()) throw ValidationError("bw_distance: dimension mismatch");
    const CMatrix sqrt_a = detail::psd_sqrt(a, "first argument");
    detail::psd_sqrt(b, "second argument");
    const double radicand = a.trace() + b.trace() - 2.0 * detail::root_fidelity_trace(sqrt_a, b.matrix());
    if (radicand < -tol::clamp_window) {
        std::ostringstream os;
        os << "Bures-Wasserstein radicand " << radicand << " is negative beyond roundoff";
        throw NumericError(os.str());
    }
    return std::sqrt(std::max(radicand, 0.0));
}

inline double bw_distance(const DensityOperator& rho, const DensityOperator& sigma) {
    if (rho.dim() != sigma.dim()) throw ValidationError("bw_distance: dimension mismatch");
    const double radicand = 2.0 - 2.0 * fidelity(rho, sigma);
    if (radicand < -tol::clamp_window) {
        std::ostringstream os;
        os << "Bures-Wasserstein radicand " << radicand << " is negative beyond roundoff";
        throw NumericError(os.str());
    }
    return std::sqrt(std::max(radicand, 0.0));
}

/// Symmetric positive semidefinite metric tensor at a base point.
class MetricTensor {
public:
    MetricTensor(RVector lambda, const RMatrix& g) : lambda_(std::move(lambda)) {
        if (g.rows() != g.cols() || g.rows() != lambda_.size()) {
            throw ValidationError("metric tensor shape does not match base point");
        }
        g_ = 0.5 * (g + g.transpose());
        if (g_.size() > 0) {
            const double min_ev = Eigen::SelfAdjointEigenSolver<RMatrix>(g_).eigenvalues()(0);
            if (min_ev < -1e-10) {
                std::ostringstream os;
                os << "metric tensor is not positive semidefinite: eigenvalue " << min_ev;
                throw NumericError(os.str());
            }
        }
    }

    const RVector& lambda() const noexcept { return lambda_; }
    const RMatrix& g() const noexcept { return g_; }
    double operator()(int i, int j) const { return g_(i, j); }
    int dim() const noexcept { return static_cast<int>(g_.rows()); }

    /// g(v, v).
    double quadratic(const RVector& v) const { return v.dot(g_ * v); }

private:
    RVector lambda_;
    RMatrix g_;
};

/// d rho / d lambda_i for every i, by central differences of gibbs_point.
inline std::vector<HermitianOperator> state_derivatives(const ObservableSet& obs, const RVector& lambda,
                                                        const FDScheme& scheme = {}) {
    scheme.validate();
    check_lambda(obs, lambda);
    std::vector<HermitianOperator> out;
    out.reserve(obs.size());
    for (int i = 0; i < obs.size(); ++i) {
        const auto rho_at = [&](double x) -> CMatrix {
            RVector l = lambda;
            l(i) = x;
            return gibbs_point(obs, l).rho.matrix();
        };
        CMatrix d = central_difference(rho_at, lambda(i), scheme);
        // tr(rho) = 1 identically; drop the roundoff-amplified trace component
        d.diagonal().array() -= d.trace() / static_cast<double>(obs.dim());
        out.push_back(HermitianOperator::trusted(d));
    }
    return out;
}

/// g_ij = Re tr(rho L_i L_j) with rho L_i + L_i rho = 2 d rho / d lambda_i.
inline MetricTensor metric_tensor(const ObservableSet& obs, const RVector& lambda,
                                  const FDScheme& scheme = {}) {
    const GibbsPoint gp = gibbs_point(obs, lambda);
    const auto drho = state_derivatives(obs, lambda, scheme);
    const int n = obs.size();
    std::vector<CMatrix> sld;
    sld.reserve(n);
    for (const auto& d : drho) sld.push_back(sld_solve(gp.rho, d).matrix());
    RMatrix g(n, n);
    for (int i = 0; i < n; ++i) {
        const CMatrix rho_li = gp.rho.matrix() * sld[i];
        for (int j = i; j < n; ++j) g(i, j) = g(j, i) = trace_product_re(rho_li, sld[j]);
    }
    return MetricTensor(lambda, g);
}

/// Metric from the coordinate expression L_i = d ln(rho) / d lambda_i. Agrees
/// with metric_tensor only for commuting families; kept as a cross-check.
inline MetricTensor log_derivative_metric(const ObservableSet& obs, const RVector& lambda,
                                          const FDScheme& scheme = {}) {
    scheme.validate();
    const GibbsPoint gp = gibbs_point(obs, lambda);
    const int n = obs.size();
    std::vector<CMatrix> dlog;
    for (int i = 0; i < n; ++i) {
        const auto log_rho_at = [&](double x) -> CMatrix {
            RVector l = lambda;
            l(i) = x;
            return matfun(gibbs_point(obs, l).rho.op(), MatrixFunction::log).matrix();
        };
        dlog.push_back(central_difference(log_rho_at, lambda(i), scheme));
    }
    RMatrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) g(i, j) = g(j, i) = trace_product_re(gp.rho.matrix() * dlog[i], dlog[j]);
    return MetricTensor(lambda, g);
}

/// Evaluate the metric at every point of a grid. Points are independent, so
/// the work is split across threads; results are in input order.
inline std::vector<MetricTensor> metric_grid(const ObservableSet& obs, const std::vector<RVector>& points,
                                             const FDScheme& scheme = {}, unsigned threads = 0) {
    return parallel_map(points, [&](const RVector& l) { return metric_tensor(obs, l, scheme); }, threads);
}

}  // namespace qtgeom
