#pragma once

// Dense Hermitian linear algebra at desk-scale dimension: eigendecomposition,
// spectral matrix functions, the symmetric-logarithmic-derivative Lyapunov
// solve and von Neumann entropy. Every matrix function goes through an explicit
// eigendecomposition; m is small and the spectrum is needed anyway.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <utility>

#include "errors.hpp"

namespace qtgeom {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace tol {
inline constexpr double hermiticity = 1e-12;
inline constexpr double unit_trace = 1e-12;
/// Eigenvalues in [-clamp_window, 0] are numerical noise and are set to 0.
inline constexpr double clamp_window = 1e-12;
/// Minimum eigenvalue above which a density operator counts as full rank.
inline constexpr double rank = 1e-10;
/// Guard on p_i + p_j in the Lyapunov solve.
inline constexpr double lyapunov_pair = 1e-14;
}  // namespace tol

/// Self-adjoint complex matrix. Construction checks hermiticity and stores the
/// exactly symmetrized matrix (A + A^dagger)/2.
class HermitianOperator {
public:
    HermitianOperator() = default;

    explicit HermitianOperator(const CMatrix& m, double tolerance = tol::hermiticity) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw ValidationError("Hermitian operator must be a nonempty square matrix, got " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
        const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (asym > tolerance) {
            std::ostringstream os;
            os << "matrix is not self-adjoint: max |A_ij - conj(A_ji)| = " << asym;
            throw ValidationError(os.str());
        }
        m_ = hermitize(m);
    }

    /// Symmetrize without validation; for matrices that are Hermitian by construction.
    static HermitianOperator trusted(const CMatrix& m) {
        HermitianOperator h;
        h.m_ = hermitize(m);
        return h;
    }

    static CMatrix hermitize(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

    static HermitianOperator identity(int dim) {
        return trusted(CMatrix::Identity(dim, dim));
    }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const CMatrix& matrix() const noexcept { return m_; }
    Complex operator()(int i, int j) const { return m_(i, j); }
    double trace() const { return m_.trace().real(); }

private:
    CMatrix m_;
};

/// Eigendecomposition of a Hermitian operator: ascending eigenvalues and the
/// unitary matrix whose columns are the corresponding eigenvectors.
struct Spectrum {
    RVector eigenvalues;
    CMatrix eigenvectors;

    int dim() const noexcept { return static_cast<int>(eigenvalues.size()); }

    /// U diag(f(p)) U^dagger.
    template <typename F>
    CMatrix apply(F&& f) const {
        RVector mapped(eigenvalues.size());
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) mapped(i) = f(eigenvalues(i));
        return eigenvectors * mapped.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
    }

    CMatrix reconstruct() const {
        return apply([](double p) { return p; });
    }
};

inline Spectrum eig(const HermitianOperator& h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix());
    if (solver.info() != Eigen::Success) {
        const double scale = h.matrix().norm();
        std::ostringstream os;
        os << "Hermitian eigensolver did not converge (dim " << h.dim()
           << ", Frobenius-norm condition estimate " << scale << ")";
        throw EigenSolverError(os.str(), h.dim(), scale);
    }
    return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

enum class MatrixFunction { exp, log, sqrt, xlogx };

inline const char* to_string(MatrixFunction f) {
    switch (f) {
        case MatrixFunction::exp: return "exp";
        case MatrixFunction::log: return "log";
        case MatrixFunction::sqrt: return "sqrt";
        case MatrixFunction::xlogx: return "xlogx";
    }
    return "?";
}

/// Scalar x log x with the continuous extension 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline HermitianOperator matfun(const HermitianOperator& h, MatrixFunction f) {
    const Spectrum spec = eig(h);
    const auto check_domain = [&](bool strictly_positive) {
        for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
            const double p = spec.eigenvalues(i);
            if (strictly_positive ? !(p > 0.0) : (p < 0.0)) {
                std::ostringstream os;
                os << "matrix " << to_string(f) << " undefined: eigenvalue " << p
                   << (strictly_positive ? " is not positive" : " is negative");
                throw BoundaryDomainError(os.str(), p);
            }
        }
    };
    switch (f) {
        case MatrixFunction::exp:
            return HermitianOperator::trusted(spec.apply([](double p) { return std::exp(p); }));
        case MatrixFunction::log:
            check_domain(true);
            return HermitianOperator::trusted(spec.apply([](double p) { return std::log(p); }));
        case MatrixFunction::sqrt:
            check_domain(true);
            return HermitianOperator::trusted(spec.apply([](double p) { return std::sqrt(p); }));
        case MatrixFunction::xlogx:
            check_domain(false);
            return HermitianOperator::trusted(spec.apply(xlogx));
    }
    throw std::logic_error("unhandled matrix function");
}

/// Density operator: self-adjoint, unit trace, positive semidefinite. The
/// spectrum is computed once and cached; eigenvalues within the clamp window
/// below zero are set to zero.
class DensityOperator {
public:
    explicit DensityOperator(const HermitianOperator& h) : h_(h) {
        const double tr = h.trace();
        if (std::abs(tr - 1.0) > tol::unit_trace) {
            std::ostringstream os;
            os << "density operator must have unit trace, got " << tr;
            throw ValidationError(os.str());
        }
        init_spectrum(eig(h));
    }

    explicit DensityOperator(const CMatrix& m) : DensityOperator(HermitianOperator(m)) {}

    /// Build directly from a known spectral decomposition (probabilities and
    /// orthonormal eigenvectors); avoids a redundant eigensolve.
    static DensityOperator from_spectrum(Spectrum s) {
        DensityOperator rho;
        rho.h_ = HermitianOperator::trusted(s.reconstruct());
        const double tr = s.eigenvalues.sum();
        if (std::abs(tr - 1.0) > tol::unit_trace) {
            std::ostringstream os;
            os << "density operator must have unit trace, got " << tr;
            throw ValidationError(os.str());
        }
        rho.init_spectrum(std::move(s));
        return rho;
    }

    static DensityOperator maximally_mixed(int dim) {
        return DensityOperator(CMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim)));
    }

    int dim() const noexcept { return h_.dim(); }
    const CMatrix& matrix() const noexcept { return h_.matrix(); }
    const HermitianOperator& op() const noexcept { return h_; }
    const Spectrum& spectrum() const noexcept { return spectrum_; }

    /// Probabilities in descending order.
    RVector eigenvalues() const { return spectrum_.eigenvalues.reverse(); }

    double min_eigenvalue() const { return spectrum_.eigenvalues(0); }

    bool is_full_rank(double rank_tolerance = tol::rank) const {
        return min_eigenvalue() > rank_tolerance;
    }

private:
    DensityOperator() = default;

    void init_spectrum(Spectrum s) {
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
            double& p = s.eigenvalues(i);
            if (p < -tol::clamp_window) {
                std::ostringstream os;
                os << "density operator has negative eigenvalue " << p;
                throw ValidationError(os.str());
            }
            if (p < 0.0) p = 0.0;
        }
        spectrum_ = std::move(s);
    }

    HermitianOperator h_;
    Spectrum spectrum_;
};

/// Solve rho L + L rho = 2 delta for the symmetric logarithmic derivative L.
/// In the eigenbasis of rho the solution is L_ij = 2 delta_ij / (p_i + p_j).
inline HermitianOperator sld_solve(const DensityOperator& rho, const HermitianOperator& delta) {
    if (rho.dim() != delta.dim()) {
        throw ValidationError("sld_solve: dimension mismatch " + std::to_string(rho.dim()) +
                              " vs " + std::to_string(delta.dim()));
    }
    const Spectrum& s = rho.spectrum();
    const RVector& p = s.eigenvalues;
    const int m = rho.dim();
    const double min_pair = 2.0 * p(0);
    if (min_pair < tol::lyapunov_pair) {
        std::ostringstream os;
        os << "Lyapunov equation near-singular: smallest p_i + p_j = " << min_pair
           << " (state is at or near the rank-deficient boundary)";
        throw NearSingularError(os.str(), min_pair);
    }
    CMatrix d = s.eigenvectors.adjoint() * delta.matrix() * s.eigenvectors;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) d(i, j) *= 2.0 / (p(i) + p(j));
    }
    return HermitianOperator::trusted(s.eigenvectors * d * s.eigenvectors.adjoint());
}

/// S = -sum p_i ln p_i in nats, with 0 ln 0 = 0.
inline double von_neumann_entropy(const DensityOperator& rho) {
    double s = 0.0;
    const RVector& p = rho.spectrum().eigenvalues;
    for (Eigen::Index i = 0; i < p.size(); ++i) s -= xlogx(p(i));
    return std::max(s, 0.0);
}

/// Re tr(A B) for Hermitian A, B without forming the product.
inline double trace_product_re(const CMatrix& a, const CMatrix& b) {
    return (a.transpose().cwiseProduct(b)).sum().real();
}

}  // namespace qtgeom
