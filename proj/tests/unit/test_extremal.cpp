#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "generators.hpp"
#include "osc3/extremal.hpp"

using namespace osc3;
namespace {

constexpr double pi = std::numbers::pi;

const ExtremalModel& model(double delta) {
    static std::map<double, ExtremalModel> cache;
    auto it = cache.find(delta);
    if (it == cache.end()) it = cache.emplace(delta, build_model(delta, 3)).first;
    return it->second;
}

// Sphere length of phi -> (phi, F(phi)) over one period by composite Simpson.
double simpson_length(const CurveF& F, int n) {
    const double h = 2 * pi / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double p = -pi + i * h;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w * std::hypot(F.d1(p), std::cos(F(p)));
    }
    return s * h / 3;
}

// |d/dt P - tangential part of the field at P|, where the field is the synthesised equation.
double residual(const ExtremalModel& m, const CoefficientSpec& spec, double t) {
    const double h = 1e-5;
    const State3 x = m.direction(t);
    const State3 fd = (1.0 / (2 * h)) * (m.direction(t + h) - m.direction(t - h));
    const State3 v = spec.derivative(t, x);
    const State3 tangential = v - dot(x, v) * x;
    return norm(tangential - fd);
}

}  // namespace

class BuildF : public ::testing::TestWithParam<double> {};

TEST_P(BuildF, ConstructionBoundsProperty) {
    const double delta = GetParam();
    const CurveF& F = model(delta).F;
    EXPECT_LT(F.w11, delta / (16 * pi));
    EXPECT_LE(F.max_value, pi / 2 - delta / (8 * pi));
    EXPECT_LT(std::abs(F.length - region_constant().value), delta);
    EXPECT_GT(F.length, region_constant().value - delta);
    Rng rng(gen::default_seed + 60);
    for (int i = 0; i < 5000; ++i) {
        const double p = rng.uniform(-pi, pi);
        EXPECT_LT(F(p), theta0_closed(p)) << p;
        EXPECT_LE(F(p), pi / 2 - delta / (8 * pi)) << p;
        EXPECT_LT(F.speed(p), 0.0) << p;
        EXPECT_NEAR(F(p + 2 * pi), F(p), 1e-12);
        EXPECT_NEAR(F.d1(p - 2 * pi), F.d1(p), 1e-10);
    }
    for (double p : {pi / 2, -pi / 2}) EXPECT_LE(F(p), pi / 2 - delta / (8 * pi));
    EXPECT_NEAR(simpson_length(F, 400000), F.length, 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Deltas, BuildF, ::testing::Values(0.5, 0.2, 0.1));

TEST(BuildFErrors, Preconditions) {
    EXPECT_THROW(build_F(0.0), PreconditionError);
    EXPECT_THROW(build_F(1.0), PreconditionError);
    EXPECT_THROW(build_F(-0.1), PreconditionError);
    CurveOptions coarse;
    coarse.grid_factor = 1.0;
    EXPECT_THROW(build_F(0.5, coarse), PreconditionError);
}

TEST(TimeReparam, Examples) {
    const ExtremalModel& m = model(0.5);
    EXPECT_EQ(m.time.t_nodes.front(), 0.0);
    EXPECT_EQ(m.time.phi_nodes.front(), pi);
    EXPECT_EQ(m.phi0(0.0), pi);
    // cos(pi/2) rounds to 6e-17, scaled by tan F.
    EXPECT_NEAR(m.F.speed(pi / 2), -1.0, 64 * std::tan(m.F(pi / 2)) * 1e-16);
    EXPECT_NEAR(m.F.speed(-3 * pi / 2), -1.0, 64 * std::tan(m.F(pi / 2)) * 1e-16);
    EXPECT_EQ(m.time.periods, 3);
    EXPECT_NEAR(m.time.horizon(), 3 * m.time.period, 1e-9 * m.time.period);
    EXPECT_LT(m.time.periodicity_error, 1e-9 * m.time.period);
    EXPECT_NEAR(m.phi0(m.time.period), -pi, 1e-9);
    EXPECT_THROW(time_reparam(m.F, 0), PreconditionError);
    EXPECT_THROW(time_reparam(m.F, 1, 0), PreconditionError);
}

TEST(TimeReparam, Phi0StrictlyDecreasingProperty) {
    const ExtremalModel& m = model(0.2);
    for (std::size_t j = 1; j < m.time.t_nodes.size(); ++j) {
        ASSERT_GT(m.time.t_nodes[j], m.time.t_nodes[j - 1]);
        ASSERT_LT(m.time.phi_nodes[j], m.time.phi_nodes[j - 1]);
    }
    Rng rng(gen::default_seed + 61);
    for (int i = 0; i < 5000; ++i) {
        const double a = rng.uniform(0, m.time.horizon()), b = rng.uniform(0, m.time.horizon());
        if (a < b) {
            EXPECT_GT(m.phi0(a), m.phi0(b));
        }
    }
}

TEST(TimeReparam, Phi0SolvesTheAzimuthEquation) {
    const ExtremalModel& m = model(0.2);
    Rng rng(gen::default_seed + 62);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(0.01, m.time.horizon() - 0.01), h = 1e-5;
        const double fd = (m.phi0(t + h) - m.phi0(t - h)) / (2 * h);
        EXPECT_NEAR(fd, m.F.speed(m.phi0(t)), 1e-6) << t;
    }
}

TEST(Coefficients, AVanishesWhereCosPhiDoes) {
    const ExtremalModel& m = model(0.5);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < m.time.t_nodes.size(); ++j) {
        const double p = m.time.phi_nodes[j];
        if (std::abs(std::remainder(p - pi / 2, pi)) < 1e-12) {
            EXPECT_NEAR(m.coeffs.A(m.time.t_nodes[j]), 0.0, 1e-12) << p;
            ++hits;
        }
    }
    EXPECT_EQ(hits, 6u);
}

TEST(Coefficients, ThetaDotMatchesFiniteDifferences) {
    const ExtremalModel& m = model(0.5);
    Rng rng(gen::default_seed + 63);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(0.01, m.time.horizon() - 0.01), h = 1e-5;
        const double fd = (m.Theta0(t + h) - m.Theta0(t - h)) / (2 * h);
        const double p = m.phi0(t);
        EXPECT_NEAR(m.F.d1(p) * m.F.speed(p), fd, 1e-6) << t;
    }
}

TEST(Coefficients, SignMappingMakesThePrescribedTrackAnIntegralCurve) {
    const ExtremalModel& m = model(0.5);
    CoefficientSpec flipped = m.coeffs.spec;
    const auto a = m.coeffs.spec.a, b = m.coeffs.spec.b, c = m.coeffs.spec.c;
    flipped.a = [a](double t) { return -a(t); };
    flipped.b = [b](double t) { return -b(t); };
    flipped.c = [c](double t) { return -c(t); };
    Rng rng(gen::default_seed + 64);
    double worst = 0.0, flipped_worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double t = rng.uniform(0.01, m.time.horizon() - 0.01);
        worst = std::max(worst, residual(m, m.coeffs.spec, t));
        flipped_worst = std::max(flipped_worst, residual(m, flipped, t));
    }
    EXPECT_LT(worst, 1e-5);
    EXPECT_GT(flipped_worst, 0.1);
}

TEST(Coefficients, FiniteEverywhere) {
    const ExtremalModel& m = model(0.1);
    for (double t = 0; t <= m.time.horizon(); t += m.time.horizon() / 20000) {
        EXPECT_TRUE(std::isfinite(m.coeffs.spec.a(t)));
        EXPECT_TRUE(std::isfinite(m.coeffs.spec.b(t)));
        EXPECT_TRUE(std::isfinite(m.coeffs.spec.c(t)));
    }
}

TEST(RunExtremal, HalfDeltaOracle) {
    const ExtremalReport r = run_extremal_experiment(0.5, 10);
    const double floor = region_constant().value / (2 * pi);
    EXPECT_EQ(r.nu, 20);
    EXPECT_EQ(r.nu_expected, 20);
    EXPECT_NEAR(r.nu_est, 2 * pi / r.period, 1 / (10 * r.period));
    EXPECT_GT(r.ratio, floor);
    EXPECT_LT(r.ratio, floor + 0.5 / (2 * pi) + 0.01);
    EXPECT_NEAR(r.floor, 0.64851178706580, 1e-12);
    EXPECT_NEAR(r.gamma_first_period, r.curve_length, 1e-4);
    EXPECT_NEAR(r.gamma, 10 * r.gamma_first_period, 1e-3);
    EXPECT_LE(std::max(r.max_phi_deviation, r.max_theta_deviation), 1e-3);
    EXPECT_EQ(r.omega_samples, 0u);
    EXPECT_TRUE(r.failures.empty());
    EXPECT_EQ(r.tolerances.rtol, 1e-11);
}

TEST(RunExtremal, Preconditions) {
    EXPECT_THROW(run_extremal_experiment(0.5, 2), PreconditionError);
    EXPECT_THROW(run_extremal_experiment(1.5, 5), PreconditionError);
}
