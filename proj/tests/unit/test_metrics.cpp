#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "osc3/metrics.hpp"

using namespace osc3;
namespace {

constexpr double pi = std::numbers::pi;

const CoefficientSpec& sin_spec() {
    static const CoefficientSpec s = CoefficientSpec::parse("0", "1", "0");
    return s;
}

// |d kappa / dt| by central differences on the dense output.
double fd_speed(const Trajectory& tr, double t, double h) {
    const State3 a = normalized(tr.eval_dense(t - h)), b = normalized(tr.eval_dense(t + h));
    return norm(b - a) / (2 * h);
}

// The same quantity with a plus sign under the root.
double plus_form(const State3& x, const State3& xd) {
    return std::sqrt(dot(xd, xd) * dot(x, x) + dot(x, xd) * dot(x, xd)) / dot(x, x);
}

}  // namespace

TEST(WanderingLength, Examples) {
    const Trajectory s = integrate(sin_spec(), {0, 1, 0}, 2 * pi);
    EXPECT_NEAR(wandering_length(s, 0, 2 * pi), 2 * pi, 1e-9);
    const Trajectory one = integrate(CoefficientSpec::parse("0", "0", "0"), {1, 0, 0}, 10);
    EXPECT_EQ(wandering_length(one, 0, 10), 0.0);
    const Trajectory e = integrate(CoefficientSpec::parse("0", "0", "-1"), {1, 1, 1}, 10);
    EXPECT_NEAR(wandering_length(e, 0, 10), 0.0, 1e-12);
}

TEST(WanderingLength, CrossChecksTrackLength) {
    Rng rng(gen::default_seed + 50);
    for (int trial = 0; trial < 5; ++trial) {
        const Trajectory tr = integrate(gen::trig_spec(rng), rng.unit_vector(), 15.0);
        const double g = wandering_length(tr, 0, 15);
        const double polyline = track_length(make_track(tr, 64));
        EXPECT_NEAR(polyline, g, 1e-5 * (1 + g)) << trial;
        EXPECT_LE(polyline, g + 1e-9) << trial;
    }
}

TEST(WanderingLength, IntegrandMatchesFiniteDifferencesProperty) {
    Rng rng(gen::default_seed + 51);
    int checked = 0;
    double plus_worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Trajectory tr = integrate(gen::trig_spec(rng, 2.0), rng.unit_vector(), 20.0);
        for (int i = 0; i < 50; ++i) {
            const double t = rng.uniform(0.01, 19.99);
            const State3 x = tr.eval_dense(t);
            const State3 xd = tr.spec().derivative(t, x);
            const double fd = fd_speed(tr, t, 1e-4);
            EXPECT_NEAR(wandering_integrand(x, xd), fd, 1e-6);
            plus_worst = std::max(plus_worst, std::abs(plus_form(x, xd) - fd));
            ++checked;
        }
    }
    EXPECT_EQ(checked, 1000);
    // The plus-sign variant disagrees with the finite differences by orders of magnitude more.
    EXPECT_GT(plus_worst, 1e-2);
}

TEST(WanderingLength, AdditiveProperty) {
    Rng rng(gen::default_seed + 52);
    for (int trial = 0; trial < 10; ++trial) {
        const Trajectory tr = integrate(gen::trig_spec(rng), rng.unit_vector(), 12.0);
        const double t1 = rng.uniform(1, 11), tol = 1e-10;
        const double whole = wandering_length(tr, 0, 12, tol);
        EXPECT_NEAR(wandering_length(tr, 0, t1, tol) + wandering_length(tr, t1, 12, tol), whole, 2 * tol);
    }
}

TEST(WanderingLength, ScaleInvariantProperty) {
    Rng rng(gen::default_seed + 53);
    for (int trial = 0; trial < 10; ++trial) {
        const CoefficientSpec spec = gen::trig_spec(rng);
        const State3 v = rng.unit_vector();
        const double a = wandering_length(integrate(spec, v, 12.0), 0, 12);
        const double b = wandering_length(integrate(spec, 3.0 * v, 12.0), 0, 12);
        EXPECT_NEAR(a, b, 1e-7 * (1 + a));
    }
}

TEST(WanderingLength, Preconditions) {
    const Trajectory s = integrate(sin_spec(), {0, 1, 0}, 1.0);
    EXPECT_THROW(wandering_length(s, 0, 2), PreconditionError);
    EXPECT_THROW(wandering_length(s, 0.5, 0.2), PreconditionError);
    EXPECT_THROW(wandering_integrand({0, 0, 0}, {1, 0, 0}), PreconditionError);
}

TEST(OscillationReport, SinOracle) {
    const Trajectory tr = integrate(sin_spec(), {0, 1, 0}, 20 * pi);
    const OscillationReport r = oscillation_report(tr);
    const double L = region_constant().value;
    EXPECT_EQ(r.nu, 21);
    EXPECT_EQ(r.nonsimple, 0u);
    EXPECT_NEAR(r.gamma, 20 * pi, 1e-8);
    EXPECT_NEAR(r.bound, 8 * L, 1e-12);
    EXPECT_NEAR(r.bound, 32.598, 1e-3);
    EXPECT_NEAR(r.margin, 30.23, 0.01);
    EXPECT_NEAR(r.phi_drop, 20 * pi, 1e-7);
    EXPECT_LE(std::abs(r.phi_drop / pi - static_cast<double>(r.nu)), 1.0 + 1e-9);
    for (long k = 0; k <= 20; ++k) EXPECT_NEAR(r.zeros[static_cast<std::size_t>(k)], k * pi, 1e-8);
}

TEST(OscillationReport, ConstantSolution) {
    const OscillationReport r = oscillation_report(integrate(CoefficientSpec::parse("0", "0", "0"), {1, 0, 0}, 100));
    EXPECT_EQ(r.nu, 0);
    EXPECT_EQ(r.gamma, 0.0);
    EXPECT_NEAR(r.bound, -2.5 * region_constant().value, 1e-12);
    EXPECT_GT(r.margin, 0.0);
}

TEST(OscillationReport, LengthBoundMarginAndPhiDropProperty) {
    Rng rng(gen::default_seed + 54);
    for (int trial = 0; trial < 30; ++trial) {
        const Trajectory tr = integrate(gen::trig_spec(rng, 2.0), rng.unit_vector(), 40.0);
        const OscillationReport r = oscillation_report(tr);
        EXPECT_GT(r.margin, 0.0) << trial;
        EXPECT_GE(r.gamma, 0.0);
        if (r.nu <= 5) {
            EXPECT_LE(r.bound, 0.0);
        }
        // Zeros of y are downward crossings of cos phi = 0.
        EXPECT_LE(std::abs(r.phi_drop / pi - static_cast<double>(r.nu)), 1.0 + 1e-9) << trial;
        EXPECT_TRUE(r.pole_events.empty());
        EXPECT_EQ(r.tolerances.rtol, 1e-9);
    }
}

TEST(RateEstimate, SinOracleAndSurrogateFloor) {
    auto factory = [](double h) { return integrate(sin_spec(), {0, 1, 0}, h); };
    const RateEstimate e = rate_estimate(factory, {50, 100, 200, 400}, 0.5);
    EXPECT_NEAR(e.mu_hat, 1.0, 0.02);
    EXPECT_NEAR(e.mu_check, 1.0, 0.02);
    EXPECT_NEAR(e.nu_hat, 1.0, 0.02);
    EXPECT_NEAR(e.nu_check, 1.0, 0.02);
    EXPECT_LE(e.mu_check, e.mu_hat);
    EXPECT_LE(e.nu_check, e.nu_hat);
    EXPECT_GE(e.mu_hat, region_constant().value / (2 * pi) * e.nu_hat - 0.02);
    EXPECT_EQ(e.mu_series.size(), 4u);
}

TEST(RateEstimate, ConstantSolutionIsZero) {
    auto factory = [](double h) { return integrate(CoefficientSpec::parse("0", "0", "0"), {1, 0, 0}, h); };
    const RateEstimate e = rate_estimate(factory, {10, 20, 40}, 1.0);
    EXPECT_EQ(e.mu_hat, 0.0);
    EXPECT_EQ(e.mu_check, 0.0);
    EXPECT_EQ(e.nu_hat, 0.0);
    EXPECT_EQ(e.nu_check, 0.0);
}

TEST(RateEstimate, Preconditions) {
    auto factory = [](double h) { return integrate(sin_spec(), {0, 1, 0}, h); };
    EXPECT_THROW(rate_estimate(factory, {10, 20}, 0.5), PreconditionError);
    EXPECT_THROW(rate_estimate(factory, {10, 30, 20}, 0.5), PreconditionError);
    EXPECT_THROW(rate_estimate(factory, {10, 20, 30}, 0.0), PreconditionError);
    EXPECT_THROW(rate_estimate(factory, {10, 20, 30}, 1.5), PreconditionError);
}

TEST(Perturbation, StepPolynomial) {
    EXPECT_EQ(Perturbation::step(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(Perturbation::step(1, 0), 1.0);
    for (int order = 1; order <= 3; ++order) {
        EXPECT_EQ(Perturbation::step(0, order), 0.0);
        EXPECT_NEAR(Perturbation::step(1, order), 0.0, 1e-11);
    }
    for (double s = 0.05; s < 1; s += 0.1)
        for (int order = 1; order <= 3; ++order) {
            const double h = 1e-6;
            const double fd = (Perturbation::step(s + h, order - 1) - Perturbation::step(s - h, order - 1)) / (2 * h);
            EXPECT_NEAR(Perturbation::step(s, order), fd, 1e-6 * (1 + std::abs(fd)));
        }
    EXPECT_THROW(Perturbation::step(0.5, 4), PreconditionError);
}

TEST(Desingularize, Examples) {
    const Perturbation none = desingularize([](double) { return 1.0; }, {});
    EXPECT_EQ(none(0.3), 0.0);
    const Perturbation one = desingularize([](double) { return 2.0; }, {1.5});
    for (double t : {-10.0, 1.5, 7.0}) EXPECT_EQ(one(t), -1.0);
    EXPECT_THROW(desingularize([](double) { return 0.0; }, {1.0}), PreconditionError);
    EXPECT_THROW(desingularize([](double) { return 1.0; }, {1.0, 1.0}), PreconditionError);
}

TEST(Desingularize, ThirdDerivativeContinuousAtJoins) {
    const std::vector<double> times{0.0, 1.0, 2.5};
    const Perturbation p = desingularize([](double t) { return t == 1.0 ? -1.0 : 1.0; }, times);
    for (double tj : times) {
        for (int order = 0; order <= 3; ++order) {
            const double e = 1e-10;
            const double left = p.eval(tj - e, order), right = p.eval(tj + e, order);
            EXPECT_NEAR(left, right, 1e-6 * std::max(1.0, std::abs(left))) << tj << ' ' << order;
        }
        EXPECT_EQ(p.eval(tj, 1), 0.0);
        EXPECT_EQ(p.eval(tj, 2), 0.0);
        EXPECT_EQ(p.eval(tj, 3), 0.0);
    }
    EXPECT_EQ(p(0.0), -1.0);
    EXPECT_EQ(p(1.0), 1.0);
    EXPECT_EQ(p(2.5), -1.0);
}

TEST(Desingularize, SplitsADoubleZeroIntoSimpleZeros) {
    // y = (t - 1)^2 (t - 2.5)(t + 0.5): double zero at t = 1 with y'' < 0.
    auto y = [](double t) { return (t - 1) * (t - 1) * (t - 2.5) * (t + 0.5); };
    auto dy = [](double t) {
        return 2 * (t - 1) * (t - 2.5) * (t + 0.5) + (t - 1) * (t - 1) * ((t + 0.5) + (t - 2.5));
    };
    auto ddy = [](double t) { return 2 * (t - 2.5) * (t + 0.5) + 4 * (t - 1) * (2 * t - 2) + 2 * (t - 1) * (t - 1); };
    const auto before = find_function_zeros(y, dy, -1.0, 3.0, 400);
    ASSERT_EQ(before.size(), 3u);
    EXPECT_FALSE(before[1].simple);
    const Perturbation p = desingularize(ddy, {1.0});
    for (double n : {1e2, 1e4, 1e6}) {
        auto yn = [&](double t) { return y(t) + p(t) / n; };
        auto dyn = [&](double t) { return dy(t) + p.eval(t, 1) / n; };
        const auto after = find_function_zeros(yn, dyn, -1.0, 3.0, 4000);
        EXPECT_GE(after.size(), before.size()) << n;
        for (const Zero& z : after) EXPECT_TRUE(z.simple) << n << ' ' << z.t;
    }
}
