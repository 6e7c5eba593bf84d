#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <qtgeom/geometry.hpp>

#include "test_support.hpp"

using namespace qtgeom;
using namespace qtgeom::testing;

namespace {

double sech2(double x) { return 1.0 / (std::cosh(x) * std::cosh(x)); }

// d_BW^2 / (g eps^2) for infinitesimally close Gibbs states. Measured once on
// the qubit, two-qubit and (sigma_x, sigma_z) families and pinned here.
constexpr double kDistanceMetricConstant = 0.25;

ObservableSet noncommuting_pair() {
    return ObservableSet({HermitianOperator(pauli_x()), HermitianOperator(pauli_z())}, {"x", "z"});
}

}  // namespace

TEST(Fidelity, Examples) {
    std::mt19937_64 rng(1);
    for (int m = 2; m <= 5; ++m) {
        const DensityOperator r = random_density(rng, m);
        EXPECT_NEAR(fidelity(r, r), 1.0, 1e-12);
    }
    const DensityOperator up(CMatrix(diag({1.0, 0.0})));
    const DensityOperator down(CMatrix(diag({0.0, 1.0})));
    EXPECT_NEAR(fidelity(up, down), 0.0, 1e-15);

    const ObservableSet q = qubit();
    const RVector p = gibbs_point(q, vec({0.0})).rho.matrix().diagonal().real();
    const RVector s = gibbs_point(q, vec({1.0})).rho.matrix().diagonal().real();
    const double bhattacharyya = std::sqrt(p(0) * s(0)) + std::sqrt(p(1) * s(1));
    EXPECT_NEAR(fidelity(gibbs_point(q, vec({0.0})).rho, gibbs_point(q, vec({1.0})).rho), bhattacharyya, 1e-14);
}

TEST(Fidelity, BoundedAndSymmetric) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 2 + trial % 3;
        const DensityOperator a = random_density(rng, m);
        const DensityOperator b = random_density(rng, m);
        const double f = fidelity(a, b);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0 + 1e-10);
        EXPECT_NEAR(f, fidelity(b, a), 1e-10);
    }
}

TEST(BwDistance, Examples) {
    std::mt19937_64 rng(3);
    const DensityOperator r = random_density(rng, 3);
    EXPECT_NEAR(bw_distance(r, r), 0.0, 1e-6);
    EXPECT_NEAR(bw_distance(r.op(), r.op()), 0.0, 1e-6);

    const DensityOperator up(CMatrix(diag({1.0, 0.0})));
    const DensityOperator down(CMatrix(diag({0.0, 1.0})));
    EXPECT_NEAR(bw_distance(up, down), std::sqrt(2.0), 1e-15);

    const HermitianOperator two(CMatrix(2.0 * CMatrix::Identity(2, 2)));
    const HermitianOperator four(CMatrix(4.0 * CMatrix::Identity(2, 2)));
    EXPECT_NEAR(bw_distance(two, two), 0.0, 1e-7);
    EXPECT_NEAR(bw_distance(HermitianOperator::identity(2), four), std::sqrt(2.0), 1e-14);
    // unit-trace branch agrees with the general formula
    const DensityOperator s = random_density(rng, 3);
    EXPECT_NEAR(bw_distance(r, s), bw_distance(r.op(), s.op()), 1e-12);
}

TEST(BwDistance, RejectsIndefinite) {
    EXPECT_THROW(bw_distance(HermitianOperator(diag({1.0, -0.5})), HermitianOperator::identity(2)), ValidationError);
}

TEST(StateDerivatives, QubitClosedForm) {
    for (double lam : {0.0, 0.3, -1.2}) {
        const auto d = state_derivatives(qubit(), vec({lam}));
        ASSERT_EQ(d.size(), 1u);
        EXPECT_NEAR(d[0](0, 0).real(), -sech2(lam) / 2.0, 1e-10);
        EXPECT_NEAR(d[0](1, 1).real(), sech2(lam) / 2.0, 1e-10);
        EXPECT_NEAR(std::abs(d[0](0, 1)), 0.0, 1e-15);
    }
}

TEST(StateDerivatives, TracelessAndSelfAdjoint) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ul(-2.0, 2.0);
    const ObservableSet obs({HermitianOperator(random_hermitian(rng, 3)), HermitianOperator(random_hermitian(rng, 3))});
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = state_derivatives(obs, vec({ul(rng), ul(rng)}));
        for (const auto& di : d) {
            EXPECT_LT(std::abs(di.matrix().trace()), 1e-10);
            EXPECT_LT((di.matrix() - di.matrix().adjoint()).norm(), 1e-15);
        }
    }
}

TEST(StateDerivatives, RichardsonConsistency) {
    std::mt19937_64 rng(5);
    const ObservableSet obs({HermitianOperator(random_hermitian(rng, 3))});
    for (double h : {1e-2, 5e-3, 2e-3}) {
        const auto d2 = state_derivatives(obs, vec({0.4}), FDScheme{h, 2});
        const auto d4 = state_derivatives(obs, vec({0.4}), FDScheme{h, 4});
        const double gap = (d2[0].matrix() - d4[0].matrix()).norm();
        const double scale = obs[0].matrix().norm();
        EXPECT_LT(gap, h * h * std::pow(scale, 3)) << h;
    }
}

TEST(FDScheme, Validation) {
    EXPECT_THROW((FDScheme{1e-9, 4}.validate()), ConfigError);
    EXPECT_THROW((FDScheme{0.1, 4}.validate()), ConfigError);
    EXPECT_THROW((FDScheme{1e-5, 3}.validate()), ConfigError);
    EXPECT_NO_THROW((FDScheme{1e-8, 2}.validate()));
}

TEST(MetricTensor, QubitSech2) {
    EXPECT_NEAR(metric_tensor(qubit(), vec({0.0}))(0, 0), 1.0, 1e-9);
    EXPECT_NEAR(metric_tensor(qubit(), vec({2.0}))(0, 0), 0.0706508248, 1e-9);
    for (int k = 0; k <= 80; ++k) {
        const double lam = -2.0 + 4.0 * k / 80.0;
        EXPECT_NEAR(metric_tensor(qubit(), vec({lam}))(0, 0), sech2(lam), 1e-7) << lam;
    }
}

TEST(MetricTensor, RedundantPairIsRankOne) {
    const ObservableSet redundant({HermitianOperator(pauli_z()), HermitianOperator(CMatrix(2.0 * pauli_z()))});
    const MetricTensor g = metric_tensor(redundant, vec({0.2, -0.3}));
    EXPECT_NEAR(g(1, 1), 4.0 * g(0, 0), 1e-9);
    EXPECT_NEAR(g(0, 1), 2.0 * g(0, 0), 1e-9);
    const RVector ev = Eigen::SelfAdjointEigenSolver<RMatrix>(g.g()).eigenvalues();
    EXPECT_LT(std::abs(ev(0)), 1e-9 * ev(1));
}

TEST(MetricTensor, QuadraticUnderRescaling) {
    std::mt19937_64 rng(6);
    const CMatrix a = random_hermitian(rng, 3);
    const CMatrix b = random_hermitian(rng, 3);
    const double c = 3.0;
    const ObservableSet base({HermitianOperator(a), HermitianOperator(b)});
    const ObservableSet scaled({HermitianOperator(CMatrix(c * a)), HermitianOperator(b)});
    const RVector lam = vec({0.15, -0.4});
    // rho_lambda(cA) = rho_{(c lambda_1, lambda_2)}(A), so g'_11(lambda) = c^2 g_11(c lambda_1, lambda_2)
    const double lhs = metric_tensor(scaled, lam)(0, 0);
    const double rhs = c * c * metric_tensor(base, vec({c * lam(0), lam(1)}))(0, 0);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(rhs));
}

TEST(MetricTensor, SymmetricPsdAtRandomPoints) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ul(-2.0, 2.0);
    const ObservableSet obs({HermitianOperator(random_hermitian(rng, 3)), HermitianOperator(random_hermitian(rng, 3)),
                             HermitianOperator(random_hermitian(rng, 3))});
    for (int trial = 0; trial < 100; ++trial) {
        const MetricTensor g = metric_tensor(obs, vec({ul(rng), ul(rng), ul(rng)}));
        EXPECT_EQ(g.g(), g.g().transpose());
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<RMatrix>(g.g()).eigenvalues()(0), -1e-10);
    }
}

TEST(MetricTensor, CommutingFamilyMatchesCovarianceAndLogDerivative) {
    const ObservableSet obs = two_qubit_commuting();
    for (const RVector& lam : {vec({0.3, -0.7}), vec({1.1, 0.2})}) {
        const MetricTensor g = metric_tensor(obs, lam);
        const MetricTensor gl = log_derivative_metric(obs, lam);
        const RMatrix cov = injectivity_diagnostic(obs, lam).covariance;
        EXPECT_LT((g.g() - gl.g()).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((g.g() - cov).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_NEAR(g(0, 0), sech2(lam(0)), 1e-9);
        EXPECT_NEAR(g(1, 1), sech2(lam(1)), 1e-9);
        EXPECT_NEAR(g(0, 1), 0.0, 1e-9);
    }
}

TEST(MetricTensor, DistanceConsistencyConstant) {
    const auto check = [](const ObservableSet& obs, const RVector& lam) {
        const MetricTensor g = metric_tensor(obs, lam);
        for (int dir = 0; dir < obs.size(); ++dir) {
            for (double eps : {1e-3, 5e-4}) {
                RVector shifted = lam;
                shifted(dir) += eps;
                const double d = bw_distance(gibbs_point(obs, lam).rho, gibbs_point(obs, shifted).rho);
                const double ratio = d * d / (g(dir, dir) * eps * eps);
                EXPECT_NEAR(ratio, kDistanceMetricConstant, 0.02 * kDistanceMetricConstant)
                    << "lambda=" << lam.transpose() << " dir=" << dir << " eps=" << eps;
            }
        }
    };
    for (double lam : {-1.0, 0.0, 0.5, 1.5}) check(qubit(), vec({lam}));
    check(two_qubit_commuting(), vec({0.3, -0.6}));
    check(noncommuting_pair(), vec({0.4, 0.8}));
    check(noncommuting_pair(), vec({-1.0, 0.2}));
}

TEST(MetricTensor, BoundaryProximityIsAnError) {
    EXPECT_THROW(metric_tensor(qubit(), vec({40.0})), NearSingularError);
}

TEST(MetricTensor, GridMatchesSerialEvaluation) {
    const ObservableSet obs = noncommuting_pair();
    std::vector<RVector> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(vec({-1.0 + 0.2 * i, 0.5 - 0.1 * i}));
    const auto parallel = metric_grid(obs, pts, {}, 4);
    ASSERT_EQ(parallel.size(), pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) EXPECT_EQ(parallel[k].g(), metric_tensor(obs, pts[k]).g());
    EXPECT_TRUE(metric_grid(obs, {}, {}, 4).empty());
    pts.push_back(vec({40.0, 0.0}));
    EXPECT_THROW(metric_grid(obs, pts, {}, 3), NearSingularError);
}
