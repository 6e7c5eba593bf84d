#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <qtgeom/linalg.hpp>

#include "test_support.hpp"

using namespace qtgeom;
using namespace qtgeom::testing;

TEST(Linalg, RejectsNonHermitian) {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 1) = 1.0;
    EXPECT_THROW(HermitianOperator{m}, ValidationError);
    EXPECT_THROW(HermitianOperator{CMatrix(2, 3)}, ValidationError);
}

TEST(Linalg, EigIdentityAndPauliZ) {
    const Spectrum id = eig(HermitianOperator::identity(2));
    EXPECT_NEAR(id.eigenvalues(0), 1.0, 1e-15);
    EXPECT_NEAR(id.eigenvalues(1), 1.0, 1e-15);
    EXPECT_LT((id.eigenvectors.adjoint() * id.eigenvectors - CMatrix::Identity(2, 2)).norm(), 1e-12);

    const Spectrum z = eig(HermitianOperator(pauli_z()));
    EXPECT_DOUBLE_EQ(z.eigenvalues(0), -1.0);
    EXPECT_DOUBLE_EQ(z.eigenvalues(1), 1.0);
}

TEST(Linalg, EigReconstructsRandomHermitian) {
    std::mt19937_64 rng(7);
    for (int m : {2, 3, 5, 8, 16}) {
        const CMatrix h = random_hermitian(rng, m);
        const Spectrum s = eig(HermitianOperator(h));
        const double scale = h.cwiseAbs().maxCoeff();
        EXPECT_LT((s.reconstruct() - h).cwiseAbs().maxCoeff(), 1e-10 * scale) << "m=" << m;
        EXPECT_LT((s.eigenvectors.adjoint() * s.eigenvectors - CMatrix::Identity(m, m)).cwiseAbs().maxCoeff(),
                  1e-10);
        for (int i = 1; i < m; ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
    }
}

TEST(Linalg, MatfunExamples) {
    const auto e0 = matfun(HermitianOperator(CMatrix::Zero(3, 3)), MatrixFunction::exp);
    EXPECT_LT((e0.matrix() - CMatrix::Identity(3, 3)).norm(), 1e-15);

    const auto r = matfun(HermitianOperator(diag({4.0, 9.0})), MatrixFunction::sqrt);
    EXPECT_LT((r.matrix() - diag({2.0, 3.0})).norm(), 1e-14);

    const double lam = 0.7;
    const auto ez = matfun(HermitianOperator(CMatrix(-lam * pauli_z())), MatrixFunction::exp);
    EXPECT_NEAR(ez.trace(), std::exp(-lam) + std::exp(lam), 1e-14);
}

TEST(Linalg, MatfunDomainErrorsReportEigenvalue) {
    try {
        matfun(HermitianOperator(diag({1.0, -0.5})), MatrixFunction::log);
        FAIL() << "expected BoundaryDomainError";
    } catch (const BoundaryDomainError& e) {
        EXPECT_DOUBLE_EQ(e.eigenvalue(), -0.5);
    }
    EXPECT_THROW(matfun(HermitianOperator(diag({0.0, 1.0})), MatrixFunction::sqrt), BoundaryDomainError);
    EXPECT_THROW(matfun(HermitianOperator(diag({-1e-3, 1.0})), MatrixFunction::xlogx), BoundaryDomainError);
    const auto x = matfun(HermitianOperator(diag({0.0, 0.5})), MatrixFunction::xlogx);
    EXPECT_NEAR(x.matrix()(0, 0).real(), 0.0, 0.0);
    EXPECT_NEAR(x.matrix()(1, 1).real(), 0.5 * std::log(0.5), 1e-15);
}

TEST(Linalg, MatfunEigenvaluesMapThroughFunction) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + trial % 5;
        const DensityOperator rho = random_density(rng, m);
        const RVector p = rho.spectrum().eigenvalues;
        for (auto f : {MatrixFunction::exp, MatrixFunction::log, MatrixFunction::sqrt, MatrixFunction::xlogx}) {
            const RVector out = eig(matfun(rho.op(), f)).eigenvalues;
            RVector expected(m);
            for (int i = 0; i < m; ++i) {
                const double x = p(i);
                switch (f) {
                    case MatrixFunction::exp: expected(i) = std::exp(x); break;
                    case MatrixFunction::log: expected(i) = std::log(x); break;
                    case MatrixFunction::sqrt: expected(i) = std::sqrt(x); break;
                    case MatrixFunction::xlogx: expected(i) = x * std::log(x); break;
                }
            }
            std::sort(expected.data(), expected.data() + m);
            EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-10) << to_string(f);
        }
    }
}

TEST(Linalg, DensityValidation) {
    EXPECT_THROW(DensityOperator(CMatrix(diag({0.6, 0.6}))), ValidationError);
    EXPECT_THROW(DensityOperator(CMatrix(diag({1.1, -0.1}))), ValidationError);
    // noise inside the clamp window is set to zero
    const DensityOperator clamped(CMatrix(diag({1.0 + 5e-13, -5e-13})));
    EXPECT_EQ(clamped.min_eigenvalue(), 0.0);
    EXPECT_FALSE(clamped.is_full_rank());
    const DensityOperator mixed = DensityOperator::maximally_mixed(3);
    EXPECT_TRUE(mixed.is_full_rank());
    const RVector desc = DensityOperator(CMatrix(diag({0.2, 0.8}))).eigenvalues();
    EXPECT_DOUBLE_EQ(desc(0), 0.8);
    EXPECT_DOUBLE_EQ(desc(1), 0.2);
}

TEST(Linalg, SldMaximallyMixedIsTwiceDelta) {
    std::mt19937_64 rng(3);
    const CMatrix delta = random_hermitian(rng, 2);
    const auto l = sld_solve(DensityOperator::maximally_mixed(2), HermitianOperator(delta));
    EXPECT_LT((l.matrix() - 2.0 * delta).norm(), 1e-13);
}

TEST(Linalg, SldDiagonalClosedForm) {
    const double p = 0.3, q = 0.7, d1 = 0.25, d2 = -0.4;
    const auto l = sld_solve(DensityOperator(CMatrix(diag({p, q}))), HermitianOperator(diag({d1, d2})));
    EXPECT_NEAR(l.matrix()(0, 0).real(), d1 / p, 1e-14);
    EXPECT_NEAR(l.matrix()(1, 1).real(), d2 / q, 1e-14);
    EXPECT_NEAR(std::abs(l.matrix()(0, 1)), 0.0, 1e-15);
}

TEST(Linalg, SldResidualOnRandomStates) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 2 + trial % 4;
        const DensityOperator rho = random_density(rng, m);
        const CMatrix delta = random_hermitian(rng, m);
        const auto l = sld_solve(rho, HermitianOperator(delta));
        const CMatrix residual = rho.matrix() * l.matrix() + l.matrix() * rho.matrix() - 2.0 * delta;
        EXPECT_LE(residual.norm(), 1e-10 * delta.norm());
        EXPECT_LT((l.matrix() - l.matrix().adjoint()).norm(), 1e-14);
    }
}

TEST(Linalg, SldNearSingularBoundary) {
    const DensityOperator pure(CMatrix(diag({1.0, 0.0})));
    EXPECT_THROW(sld_solve(pure, HermitianOperator(pauli_z())), NearSingularError);
}

TEST(Linalg, EntropyExamples) {
    EXPECT_EQ(von_neumann_entropy(DensityOperator(CMatrix(diag({1.0, 0.0})))), 0.0);
    EXPECT_NEAR(von_neumann_entropy(DensityOperator::maximally_mixed(2)), std::log(2.0), 1e-15);
    const double lam = 1.0;
    const double t = std::tanh(lam);
    const DensityOperator thermal(CMatrix(diag({(1 - t) / 2, (1 + t) / 2})));
    EXPECT_NEAR(von_neumann_entropy(thermal), std::log(2 * std::cosh(lam)) - lam * t, 1e-14);
}

TEST(Linalg, EntropyConcavity) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 2 + trial % 4;
        const DensityOperator a = random_density(rng, m);
        const DensityOperator b = random_density(rng, m);
        for (double t : {0.25, 0.5, 0.75}) {
            const DensityOperator mix(HermitianOperator::hermitize(t * a.matrix() + (1 - t) * b.matrix()));
            EXPECT_GE(von_neumann_entropy(mix),
                      t * von_neumann_entropy(a) + (1 - t) * von_neumann_entropy(b) - 1e-10);
        }
        EXPECT_LE(von_neumann_entropy(a), std::log(m) + 1e-12);
    }
}

TEST(Linalg, EntropyContinuousAtBoundary) {
    const int m = 3;
    CMatrix pure = CMatrix::Zero(m, m);
    pure(0, 0) = 1.0;
    double previous = std::log(m) + 1.0;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8}) {
        const DensityOperator r(HermitianOperator::hermitize((1 - eps) * pure + eps * CMatrix::Identity(m, m) / m));
        const double s = von_neumann_entropy(r);
        EXPECT_LT(s, previous);
        previous = s;
    }
    EXPECT_LT(previous, 1e-6);
}
