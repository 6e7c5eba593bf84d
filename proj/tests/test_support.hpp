#pragma once

#include <random>

#include <qtgeom/gibbs.hpp>
#include <qtgeom/linalg.hpp>

namespace qtgeom::testing {

inline CMatrix pauli_z() {
    CMatrix z = CMatrix::Zero(2, 2);
    z(0, 0) = 1.0;
    z(1, 1) = -1.0;
    return z;
}

inline CMatrix pauli_x() {
    CMatrix x = CMatrix::Zero(2, 2);
    x(0, 1) = x(1, 0) = 1.0;
    return x;
}

inline CMatrix diag(std::initializer_list<double> d) {
    RVector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double x : d) v(i++) = x;
    return v.cast<Complex>().asDiagonal();
}

inline RVector vec(std::initializer_list<double> d) {
    RVector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double x : d) v(i++) = x;
    return v;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

inline ObservableSet qubit() { return ObservableSet({HermitianOperator(pauli_z())}, {"sz"}); }

inline ObservableSet qutrit() { return ObservableSet({HermitianOperator(diag({1.0, 0.0, -1.0}))}); }

/// sigma_z on each of two qubits: a commuting product family.
inline ObservableSet two_qubit_commuting() {
    const CMatrix id = CMatrix::Identity(2, 2);
    return ObservableSet({HermitianOperator(kron(pauli_z(), id)), HermitianOperator(kron(id, pauli_z()))},
                         {"z1", "z2"});
}

inline CMatrix random_hermitian(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> nd;
    CMatrix g(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = Complex(nd(rng), nd(rng));
    return 0.5 * (g + g.adjoint());
}

/// Full-rank random density matrix G G^dagger / tr.
inline DensityOperator random_density(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> nd;
    CMatrix g(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = Complex(nd(rng), nd(rng));
    CMatrix r = g * g.adjoint() + 0.05 * CMatrix::Identity(m, m);
    r /= r.trace().real();
    return DensityOperator(HermitianOperator(HermitianOperator::hermitize(r)));
}

}  // namespace qtgeom::testing
