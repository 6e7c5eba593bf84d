#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <qtgeom/contact.hpp>

#include "test_support.hpp"

using namespace qtgeom;
using namespace qtgeom::testing;

namespace {

double sech2(double x) { return 1.0 / (std::cosh(x) * std::cosh(x)); }

ThermoPoint point(double S, std::initializer_list<double> a, std::initializer_list<double> l) {
    return {S, vec(a), vec(l)};
}

MMetricSpec spec1(const std::string& gS, const std::string& ga, const std::string& h) {
    return MMetricSpec::parse(gS, {ga}, {h}, 1);
}

std::vector<RVector> line_grid(double lo, double hi, int points) {
    std::vector<RVector> g;
    for (int k = 0; k < points; ++k) g.push_back(vec({lo + (hi - lo) * k / (points - 1)}));
    return g;
}

// (alpha ^ d alpha)(e1, e2, e3) = sum over cyclic orders of alpha(u) d alpha(v, w)
double three_form_oracle(const RVector& alpha, const RMatrix& dalpha) {
    return alpha(0) * dalpha(1, 2) + alpha(1) * dalpha(2, 0) + alpha(2) * dalpha(0, 1);
}

}  // namespace

TEST(Eta, Examples) {
    const ThermoPoint p = point(0.4, {0.1, -0.3}, {0.7, 1.2});
    EXPECT_EQ(eta_eval(p, TangentVector::reeb(2)), 1.0);
    EXPECT_EQ(eta_eval(p, TangentVector::zero(2)), 0.0);
    const TangentVector v{2.0, vec({1.0, 0.5}), vec({9.0, 9.0})};
    EXPECT_DOUBLE_EQ(eta_eval(p, v), 2.0 - 0.7 - 0.6);

    for (double lam : {-1.5, 0.0, 0.8}) {
        // closed forms: a = -tanh, S = log(2 cosh) - l tanh, so a' = -sech^2, S' = -l sech^2
        const TangentVector t{-lam * sech2(lam), vec({-sech2(lam)}), vec({1.0})};
        EXPECT_NEAR(eta_eval(equilibrium_point(qubit(), vec({lam})), t), 0.0, 1e-9);
    }
}

TEST(Eta, ReebFieldAndRank) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n = 1; n <= 3; ++n) {
        ThermoPoint p{u(rng), RVector(n), RVector(n)};
        for (int i = 0; i < n; ++i) {
            p.a(i) = u(rng);
            p.lambda(i) = u(rng);
        }
        const auto r = reeb_check(p);
        EXPECT_EQ(r.eta_of_reeb, 1.0);
        EXPECT_LT(r.max_contraction, 1e-9);
        EXPECT_EQ(eta_rank(p), 1);
        // d eta = sum_i da_i ^ dl_i on the interleaved basis
        const RMatrix w = exterior_derivative(contact_form(), p.interleaved());
        for (int i = 0; i < n; ++i) EXPECT_NEAR(w(1 + 2 * i, 2 + 2 * i), 1.0, 1e-9);
    }
}

TEST(ContactVolume, NonDegenerate) {
    double factorial = 1.0;
    for (int n = 1; n <= 3; ++n) {
        factorial *= n;
        const double c = contact_volume_coefficient(n);
        EXPECT_NE(c, 0.0);
        EXPECT_NEAR(std::abs(c), factorial, 1e-6 * factorial) << n;
    }
    // independent three-term expansion for n = 1
    const RVector x = vec({0.2, -0.4, 1.3});
    const RVector alpha = contact_form()(x);
    const RMatrix w = exterior_derivative(contact_form(), x);
    EXPECT_NEAR(volume_form_coefficient(contact_form(), x), three_form_oracle(alpha, w), 1e-9);
    EXPECT_NEAR(three_form_oracle(alpha, w), 1.0, 1e-9);
}

TEST(ContactVolume, DegenerateAndHomogeneous) {
    const OneForm dS = [](const RVector& x) {
        RVector c = RVector::Zero(x.size());
        c(0) = 1.0;
        return c;
    };
    for (int n = 1; n <= 3; ++n) EXPECT_EQ(volume_form_coefficient(dS, RVector::Constant(2 * n + 1, 0.5)), 0.0);

    // alpha ^ (d alpha)^n is homogeneous of degree n+1 in alpha
    const OneForm twice = [](const RVector& x) { return RVector(2.0 * contact_form()(x)); };
    const RVector x = RVector::LinSpaced(5, -0.5, 0.7);
    EXPECT_NEAR(volume_form_coefficient(twice, x), 8.0 * volume_form_coefficient(contact_form(), x), 1e-6);

    // a form with d alpha of rank 2 in dimension 5 is degenerate
    const OneForm partial = [](const RVector& x) {
        RVector c = RVector::Zero(x.size());
        c(0) = 1.0;
        c(1) = -x(2);
        return c;
    };
    EXPECT_NEAR(volume_form_coefficient(partial, x), 0.0, 1e-12);
    EXPECT_THROW(volume_form_coefficient(dS, RVector::Zero(4)), ConfigError);
}

TEST(Legendrian, QubitGrid) {
    EXPECT_LT(legendrian_residual(qubit(), line_grid(-2.0, 2.0, 81)), 1e-8);
    EXPECT_LT(legendrian_residual(qubit(), {vec({0.0})}), 1e-12);
}

TEST(Legendrian, OtherFamilies) {
    std::vector<RVector> grid;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) grid.push_back(vec({-2.0 + 0.5 * i, -2.0 + 0.5 * j}));
    EXPECT_LT(legendrian_residual(two_qubit_commuting(), grid), 1e-7);
    const ObservableSet xz({HermitianOperator(pauli_x()), HermitianOperator(pauli_z())});
    EXPECT_LT(legendrian_residual(xz, grid), 1e-7);
    EXPECT_LT(legendrian_residual(qutrit(), line_grid(-2.0, 2.0, 21)), 1e-7);
}

TEST(Legendrian, EquilibriumTangentsLieInKernel) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const ObservableSet xz({HermitianOperator(pauli_x()), HermitianOperator(pauli_z())});
    for (const ObservableSet& obs : {two_qubit_commuting(), xz}) {
        for (int trial = 0; trial < 10; ++trial) {
            const RVector l = vec({u(rng), u(rng)});
            const RVector dir = vec({u(rng), u(rng)});
            const TangentVector t = equilibrium_tangent(obs, l, dir);
            EXPECT_NEAR(eta_eval(equilibrium_point(obs, l), t), 0.0, 1e-9);
        }
    }
}

TEST(EquilibriumPoint, QubitClosedForms) {
    const ThermoPoint p0 = equilibrium_point(qubit(), vec({0.0}));
    EXPECT_NEAR(p0.S, std::log(2.0), 1e-15);
    EXPECT_NEAR(p0.a(0), 0.0, 1e-15);
    EXPECT_EQ(p0.lambda(0), 0.0);
    const ThermoPoint p1 = equilibrium_point(qubit(), vec({1.0}));
    EXPECT_NEAR(p1.S, std::log(2.0 * std::cosh(1.0)) - std::tanh(1.0), 1e-14);
    EXPECT_NEAR(p1.a(0), -std::tanh(1.0), 1e-15);
    EXPECT_NEAR(von_neumann_entropy(gibbs_point(qubit(), vec({1.0})).rho), p1.S, 1e-9);
}

TEST(MuExtension, ValidationOnEquilibriumGrid) {
    const ObservableSet q = qubit();
    EXPECT_NO_THROW(MuExtension::trivial(1).validate(q));
    EXPECT_NO_THROW(MuExtension::parse({"S - (log(2*cosh(l1)) - l1*tanh(l1))"}, 1).validate(q));
    EXPECT_NO_THROW(MuExtension::parse({"(a1 + tanh(l1))*S"}, 1).validate(q));
    EXPECT_THROW(MuExtension::parse({"0.01*l1"}, 1).validate(q), ValidationError);
    EXPECT_THROW(MuExtension::parse({"0", "0"}, 1), ConfigError);
    EXPECT_THROW(MuExtension::trivial(2).validate(q), ConfigError);

    const auto grid = MuExtension::validation_grid(2);
    ASSERT_EQ(grid.size(), 32u);
    for (const auto& l : grid) EXPECT_LE(l.cwiseAbs().maxCoeff(), 2.0);
    EXPECT_NE(grid[0], grid[1]);
}

TEST(StateFunction, Examples) {
    const ObservableSet q = qubit();
    const ThermoPoint off = point(0.1, {0.2}, {0.5});
    EXPECT_EQ(state_function(q, MuExtension::trivial(1), off).matrix(), gibbs_point(q, vec({0.5})).rho.matrix());

    const auto entropy_shift = MuExtension::parse({"S - (log(2*cosh(l1)) - l1*tanh(l1))"}, 1);
    const ThermoPoint eq = equilibrium_point(q, vec({0.7}));
    EXPECT_LT((state_function(q, entropy_shift, eq).matrix() - gibbs_point(q, vec({0.7})).rho.matrix()).norm(), 1e-14);

    const auto expectation_shift = MuExtension::parse({"a1 + tanh(l1)"}, 1);
    const double f = 0.2 + std::tanh(0.5);
    EXPECT_LT((state_function(q, expectation_shift, off).matrix() - gibbs_point(q, vec({0.5 + f})).rho.matrix()).norm(),
              1e-15);
}

TEST(Fiber, MembershipAndDimension) {
    const ObservableSet q = qubit();
    const auto mu = MuExtension::parse({"a1 + tanh(l1)"}, 1);
    mu.validate(q);
    const RVector c = vec({0.9});
    EXPECT_TRUE(fiber_membership(q, mu, equilibrium_point(q, c), c));
    EXPECT_TRUE(fiber_membership(q, mu, equilibrium_point(q, c), c, 1e-8));
    EXPECT_FALSE(fiber_membership(q, mu, point(0.0, {0.3}, {0.9}), c));
    EXPECT_THROW(fiber_membership(q, mu, point(0.0, {0.3}, {0.9}), vec({0.9, 1.0})), ConfigError);

    for (int n = 1; n <= 3; ++n) {
        ThermoPoint p{0.3, RVector::Constant(n, -0.2), RVector::LinSpaced(n, 0.1, 0.5)};
        const auto d = fiber_dimension(MuExtension::trivial(n), p);
        EXPECT_EQ(d.jacobian_rank, n);
        EXPECT_EQ(d.dimension, n + 1);
    }
    // an extension that also reads a still cuts out a codimension-n set
    EXPECT_EQ(fiber_dimension(mu, point(0.0, {0.3}, {0.9})).dimension, 2);
}

TEST(Gauge, GroupLaw) {
    const ThermoPoint p = point(0.25, {0.5, -1.0}, {0.3, 0.4});
    const ThermoPoint same = gauge_translate(p, 0.0, RVector::Zero(2));
    EXPECT_EQ(same.S, p.S);
    EXPECT_EQ(same.a, p.a);
    EXPECT_EQ(same.lambda, p.lambda);

    const ThermoPoint gh = gauge_translate(gauge_translate(p, 0.5, vec({0.25, 1.0})), 1.5, vec({-0.75, 0.5}));
    const ThermoPoint direct = gauge_translate(p, 2.0, vec({-0.5, 1.5}));
    EXPECT_EQ(gh.S, direct.S);
    EXPECT_EQ(gh.a, direct.a);
    EXPECT_EQ(gh.lambda, p.lambda);

    // free: a nontrivial element moves every point
    const ThermoPoint moved = gauge_translate(p, 0.0, vec({0.0, 0.125}));
    EXPECT_NE(moved.a, p.a);

    // fiber-transitive: the connecting element of two points with equal lambda
    const ThermoPoint q = point(1.75, {-0.5, 2.0}, {0.3, 0.4});
    const ThermoPoint to_q = gauge_translate(p, q.S - p.S, q.a - p.a);
    EXPECT_EQ(to_q.S, q.S);
    EXPECT_EQ(to_q.a, q.a);

    const ObservableSet obs = two_qubit_commuting();
    const auto mu = MuExtension::trivial(2);
    EXPECT_EQ(state_function(obs, mu, to_q).matrix(), state_function(obs, mu, p).matrix());
}

TEST(Gauge, EquivarianceOfAStateDependentExtension) {
    // mu reads a, so translating a shifts the label by exactly the translation
    const ObservableSet q = qubit();
    const auto mu = MuExtension::parse({"a1 + tanh(l1)"}, 1);
    const ThermoPoint p = point(0.2, {-0.1}, {0.6});
    const ThermoPoint t = gauge_translate(p, 0.7, vec({0.05}));
    EXPECT_NEAR(mu(t)(0) - mu(p)(0), 0.05, 1e-15);
}

TEST(MetricSpec, QuadraticFormExpansion) {
    const ObservableSet q = qubit();
    const ThermoPoint p = equilibrium_point(q, vec({0.4}));
    const MetricTensor g = metric_tensor(q, p.lambda);
    const auto s = spec1("2 + l1", "3", "0.5*l1");

    const TangentVector vertical{0.3, vec({-0.2}), vec({0.0})};
    EXPECT_NEAR(gM_quadratic(s, g, p, vertical), 2.4 * 0.09 + 3.0 * 0.04, 1e-15);

    const TangentVector base{0.0, vec({0.0}), vec({0.7})};
    EXPECT_NEAR(gM_quadratic(s, g, p, base), g.quadratic(vec({0.7})), 1e-15);

    const auto unit = spec1("1", "1", "1");
    const TangentVector mixed{0.3, vec({0.0}), vec({0.5})};
    const double expected = 0.09 + g(0, 0) * 0.25 + 2.0 * 0.3 * 0.5;
    EXPECT_NEAR(gM_quadratic(unit, g, p, mixed), expected, 1e-15);
}

TEST(MetricSpec, FieldChecks) {
    const ObservableSet q = qubit();
    const ThermoPoint p = point(0.0, {0.0}, {0.0});
    const MetricTensor g = metric_tensor(q, p.lambda);
    const TangentVector v{1.0, vec({1.0}), vec({1.0})};
    EXPECT_THROW(gM_quadratic(spec1("1e-13", "1", "0"), g, p, v), DegenerateMetricError);
    EXPECT_THROW(gM_quadratic(spec1("1", "l1", "0"), g, p, v), ValidationError);
    EXPECT_THROW(gM_quadratic(spec1("1/l1", "1", "0"), g, p, v), ExprDomainError);
    // negative g_S is allowed off the fibers
    EXPECT_NO_THROW(gM_quadratic(spec1("-1", "1", "0"), g, p, v));
    EXPECT_THROW(MMetricSpec::parse("1", {"1", "1"}, {"0"}, 1), ConfigError);
}

TEST(FiberPath, Lengths) {
    const auto flat = spec1("1", "1", "0");
    const auto segment = [](double dS, double da, int steps) {
        std::vector<ThermoPoint> path;
        for (int k = 0; k <= steps; ++k) {
            const double s = static_cast<double>(k) / steps;
            path.push_back(point(0.1 + s * dS, {-0.2 + s * da}, {0.5}));
        }
        return path;
    };
    EXPECT_EQ(fiber_path_length(flat, segment(0.0, 0.0, 8)), 0.0);
    EXPECT_NEAR(fiber_path_length(flat, segment(0.3, 0.4, 8)), 0.5, 1e-14);
    EXPECT_NEAR(fiber_path_length(flat, segment(0.3, 0.4, 8), 5.0), 0.5, 1e-14);
    EXPECT_NEAR(fiber_path_length(spec1("4", "1", "0"), segment(0.3, 0.4, 8)), std::hypot(0.6, 0.4), 1e-14);

    // curved vertical path: S = sin(pi s / 2), constant a, length with g_S = 1 is 1
    std::vector<ThermoPoint> arc;
    for (int k = 0; k <= 512; ++k) arc.push_back(point(std::sin(M_PI * k / 1024.0), {0.0}, {0.0}));
    EXPECT_NEAR(fiber_path_length(flat, arc), 1.0, 1e-5);

    EXPECT_THROW(fiber_path_length(spec1("-1", "1", "0"), segment(0.3, 0.4, 8)), SignatureError);
    auto moving = segment(0.3, 0.4, 8);
    moving[4].lambda(0) = 0.6;
    EXPECT_THROW(fiber_path_length(flat, moving), ConfigError);
    EXPECT_THROW(fiber_path_length(flat, segment(0.3, 0.4, 1)), ConfigError);
}
