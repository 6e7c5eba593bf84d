#pragma once

// Gibbs family rho_lambda = exp(-sum_i lambda_i A_i) / Z over a finite set of
// observables. Sign convention: a_i = tr(A_i rho_lambda) = -d ln Z / d lambda_i,
// so the single-qubit family with A = sigma_z has a(lambda) = -tanh(lambda).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"

namespace qtgeom {

/// Largest |lambda_i| accepted by gibbs_point.
inline constexpr double kMaxLambda = 1e3;

class ObservableSet {
public:
    ObservableSet(std::vector<HermitianOperator> observables, std::vector<std::string> names = {})
        : observables_(std::move(observables)), names_(std::move(names)) {
        if (observables_.empty()) throw ConfigError("observable set must contain at least one observable");
        dim_ = observables_.front().dim();
        for (std::size_t i = 0; i < observables_.size(); ++i) {
            if (observables_[i].dim() != dim_) {
                throw ConfigError("observable " + std::to_string(i) + " has dimension " +
                                  std::to_string(observables_[i].dim()) + ", expected " +
                                  std::to_string(dim_));
            }
        }
        if (names_.empty()) {
            for (std::size_t i = 0; i < observables_.size(); ++i) names_.push_back("A" + std::to_string(i + 1));
        }
        if (names_.size() != observables_.size()) {
            throw ConfigError("observable names and matrices differ in count");
        }
        linearly_independent_ = vectorized_rank() == size();
    }

    int dim() const noexcept { return dim_; }
    int size() const noexcept { return static_cast<int>(observables_.size()); }
    const HermitianOperator& operator[](int i) const { return observables_.at(i); }
    const std::vector<HermitianOperator>& observables() const noexcept { return observables_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Whether vec(A_1) ... vec(A_n) are linearly independent (relative threshold 1e-10).
    bool linearly_independent() const noexcept { return linearly_independent_; }

    /// sum_i lambda_i A_i.
    CMatrix combination(const RVector& lambda) const {
        CMatrix h = CMatrix::Zero(dim_, dim_);
        for (int i = 0; i < size(); ++i) h += lambda(i) * observables_[i].matrix();
        return h;
    }

    /// Largest squared operator norm among the observables; sets the scale for
    /// covariance rank decisions.
    double scale() const {
        double s = 0.0;
        for (const auto& a : observables_) {
            const RVector e = eig(a).eigenvalues;
            s = std::max(s, std::max(e.cwiseAbs().maxCoeff() * e.cwiseAbs().maxCoeff(), 0.0));
        }
        return s;
    }

private:
    int vectorized_rank() const {
        CMatrix v(static_cast<Eigen::Index>(dim_) * dim_, size());
        for (int i = 0; i < size(); ++i) {
            v.col(i) = Eigen::Map<const Eigen::VectorXcd>(observables_[i].matrix().data(),
                                                          static_cast<Eigen::Index>(dim_) * dim_);
        }
        Eigen::JacobiSVD<CMatrix> svd(v);
        const RVector s = svd.singularValues();
        if (s.size() == 0 || s(0) == 0.0) return 0;
        return static_cast<int>((s.array() > 1e-10 * s(0)).count());
    }

    std::vector<HermitianOperator> observables_;
    std::vector<std::string> names_;
    int dim_ = 0;
    bool linearly_independent_ = false;
};

struct GibbsPoint {
    RVector lambda;
    double log_Z;
    double Z;
    DensityOperator rho;
    RVector a;
    double S;
};

inline void check_lambda(const ObservableSet& obs, const RVector& lambda) {
    if (lambda.size() != obs.size()) {
        throw ConfigError("lambda has " + std::to_string(lambda.size()) + " components, expected " +
                          std::to_string(obs.size()));
    }
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (!std::isfinite(lambda(i)) || std::abs(lambda(i)) > kMaxLambda) {
            std::ostringstream os;
            os << "lambda_" << i + 1 << " = " << lambda(i) << " outside the supported range [-"
               << kMaxLambda << ", " << kMaxLambda << "]";
            throw ParameterRangeError(os.str());
        }
    }
}

/// Evaluate the Gibbs state at lambda. The exponent is shifted by its largest
/// eigenvalue before exponentiation; ln Z carries the shift back.
inline GibbsPoint gibbs_point(const ObservableSet& obs, const RVector& lambda) {
    check_lambda(obs, lambda);
    const Spectrum h = eig(HermitianOperator::trusted(obs.combination(lambda)));
    // exponent eigenvalues are -h; the largest is -h_min = -h(0)
    const double shift = -h.eigenvalues(0);
    RVector q = (-(h.eigenvalues.array() - h.eigenvalues(0))).exp().matrix();
    const double zs = q.sum();
    q /= zs;
    // eigenvalues of rho must be ascending for Spectrum; h ascending => q descending
    Spectrum rs{q.reverse(), h.eigenvectors.rowwise().reverse()};
    DensityOperator rho = DensityOperator::from_spectrum(std::move(rs));

    RVector a(obs.size());
    for (int i = 0; i < obs.size(); ++i) a(i) = trace_product_re(obs[i].matrix(), rho.matrix());
    const double log_z = shift + std::log(zs);
    const double s = log_z + lambda.dot(a);
    return GibbsPoint{lambda, log_z, std::exp(log_z), std::move(rho), std::move(a), s};
}

inline double log_partition(const ObservableSet& obs, const RVector& lambda) {
    return gibbs_point(obs, lambda).log_Z;
}

/// max_i |a_i - (-(ln Z(lambda + h e_i) - ln Z(lambda - h e_i)) / 2h)|.
inline double expectation_consistency(const ObservableSet& obs, const RVector& lambda, double step) {
    if (!(step > 0.0 && step <= 1e-2)) {
        std::ostringstream os;
        os << "consistency step " << step << " outside (0, 1e-2]";
        throw ConfigError(os.str());
    }
    const GibbsPoint g = gibbs_point(obs, lambda);
    double worst = 0.0;
    for (int i = 0; i < obs.size(); ++i) {
        RVector up = lambda, down = lambda;
        up(i) += step;
        down(i) -= step;
        const double fd = -(log_partition(obs, up) - log_partition(obs, down)) / (2.0 * step);
        worst = std::max(worst, std::abs(g.a(i) - fd));
    }
    return worst;
}

struct InjectivityDiagnostic {
    RMatrix covariance;
    RVector covariance_eigenvalues;  // ascending
    int rank;
};

/// Symmetrized covariance C_ij = Re tr(rho (A_i - a_i)(A_j - a_j)) and its
/// numerical rank. rank < n means the Gibbs map is locally non-injective.
inline InjectivityDiagnostic injectivity_diagnostic(const ObservableSet& obs, const RVector& lambda) {
    const GibbsPoint g = gibbs_point(obs, lambda);
    const int n = obs.size();
    const int m = obs.dim();
    std::vector<CMatrix> centered;
    centered.reserve(n);
    for (int i = 0; i < n; ++i) centered.push_back(obs[i].matrix() - g.a(i) * CMatrix::Identity(m, m));
    RMatrix c(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            c(i, j) = c(j, i) = trace_product_re(g.rho.matrix(), centered[i] * centered[j]);
        }
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(c);
    const RVector ev = es.eigenvalues();
    const double threshold = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), obs.scale());
    const int rank = static_cast<int>((ev.array() > threshold).count());
    return InjectivityDiagnostic{c, ev, rank};
}

}  // namespace qtgeom
