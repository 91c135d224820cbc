// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "generators.hpp"
#include "osc3/commands.hpp"

using namespace osc3;
namespace {

constexpr double pi = std::numbers::pi;
constexpr double frozen_L = 4.074719732024625;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string f(const char* fmt, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome constant_criterion() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const RegionConstant q = boundary_length(LengthMethod::quadrature, 1e-10);
    const RegionConstant p = boundary_length(LengthMethod::polyline, 1e6);
    const double s = seconds_since(t0);
    o.require(std::abs(q.value - p.value) <= 1e-6, f("methods differ by %.3g", std::abs(q.value - p.value)));
    o.require(std::abs(q.value - frozen_L) <= 1e-12, f("quadrature %.17g off the frozen value", q.value));
    o.require(s < 1.0, f("took %.3g s", s));
    o.detail = f("L = %.15f, |quad - polyline| = %.2g, %.3g s", q.value, std::abs(q.value - p.value), s) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

Outcome sweep_criterion() {
    Outcome o;
    SweepConfig cfg;
    cfg.size = 100;
    cfg.horizon = 50;
    const auto t0 = std::chrono::steady_clock::now();
    const CommandResult r = cmd_sweep(cfg);
    const double s = seconds_since(t0);
    const Json& res = r.report["result"];
    o.require(res["margin_violations"] == 0, "margin violations");
    o.require(res["ok"] == 100, "not every item completed ok");
    o.require(s < 120.0, f("took %.3g s", s));
    o.detail = f("%d/100 ok, min margin %.6g, %.3g s", res["ok"].get<int>(), res["min_margin"].get<double>(), s) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

Outcome sin_criterion() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientSpec spec = CoefficientSpec::parse("0", "1", "0");
    const OscillationReport r = oscillation_report(integrate(spec, {0, 1, 0}, 20 * pi));
    o.require(r.nu == 21, f("nu = %ld", r.nu));
    const double g = wandering_length(integrate(spec, {0, 1, 0}, 2 * pi), 0, 2 * pi);
    o.require(std::abs(g - 2 * pi) <= 1e-6, f("gamma over one period off by %.3g", g - 2 * pi));
    const RateEstimate e =
        rate_estimate([&](double h) { return integrate(spec, {0, 1, 0}, h); }, {50, 100, 200, 400}, 0.5);
    o.require(std::abs(e.mu_hat - 1) <= 0.02 && std::abs(e.nu_hat - 1) <= 0.02,
              f("rates mu %.6g nu %.6g", e.mu_hat, e.nu_hat));
    const double floor = region_constant().value / (2 * pi) * e.nu_hat - 0.02;
    o.require(e.mu_hat >= floor, "lower rate bound fails");
    const double s = seconds_since(t0);
    o.require(s < 10.0, f("took %.3g s", s));
    o.detail = f("nu = %ld, gamma(2pi) - 2pi = %.2g, mu = %.6g, nu_hat = %.6g, %.3g s", r.nu, g - 2 * pi, e.mu_hat,
                 e.nu_hat, s) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

Outcome extremal_criterion() {
    Outcome o;
    const double floor = region_constant().value / (2 * pi);
    std::vector<double> ratios;
    std::string lines;
    for (double delta : {0.5, 0.2, 0.1}) {
        ExtremalOptions opts;
        opts.strict = false;
        opts.free_run = false;
        const auto t0 = std::chrono::steady_clock::now();
        const ExtremalReport r = run_extremal_experiment(delta, 10, opts);
        const double s = seconds_since(t0);
        const double dev = std::max(r.max_phi_deviation, r.max_theta_deviation);
        const std::string tag = f("delta %.2g: ", delta);
        o.require(r.ratio > floor, tag + "ratio not above the floor");
        o.require(r.ratio < floor + delta / (2 * pi) + 0.01, tag + "ratio above the upper bound");
        o.require(dev <= 1e-3, tag + f("track deviation %.3g", dev));
        o.require(r.nu == 20, tag + f("nu = %ld", r.nu));
        o.require(r.omega_samples == 0, tag + "track enters Omega");
        o.require(s < 60.0, tag + f("took %.3g s", s));
        ratios.push_back(r.ratio);
        lines += f("%s%.6f (dev %.1e, %.3g s) ", tag.c_str(), r.ratio, dev, s);
    }
    o.require(ratios[0] > ratios[1] && ratios[1] > ratios[2], "ratios not decreasing with delta");
    o.detail = lines + (o.detail.empty() ? "" : "| " + o.detail);
    return o;
}

Outcome integrand_criterion() {
    Outcome o;
    Rng rng(gen::default_seed + 100);
    double worst = 0.0;
    int n = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Trajectory tr = integrate(gen::trig_spec(rng, 2.0), rng.unit_vector(), 20.0);
        for (int i = 0; i < 50; ++i, ++n) {
            const double t = rng.uniform(0.01, 19.99), h = 1e-4;
            const State3 x = tr.eval_dense(t);
            const State3 a = normalized(tr.eval_dense(t - h)), b = normalized(tr.eval_dense(t + h));
            const double fd = norm(b - a) / (2 * h);
            worst = std::max(worst, std::abs(wandering_integrand(x, tr.spec().derivative(t, x)) - fd));
        }
    }
    o.require(n == 1000, "sample count");
    o.require(worst <= 1e-6, "integrand disagrees with finite differences");
    o.detail = f("%d times, max |closed form - finite difference| = %.2g", n, worst) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

bool surgery_ok(const SphericalTrack& in, std::string& why) {
    const SurgeryResult res = surger(in);
    const SphericalTrack& out = res.track;
    const auto& a = in.points;
    const auto& b = out.points;
    if (b.front().phi != a.front().phi || b.front().theta != a.front().theta || b.back().phi != a.back().phi ||
        b.back().theta != a.back().theta) {
        why = "endpoints moved";
        return false;
    }
    for (const auto& p : b) {
        if (in_omega(p.embed())) {
            why = "output enters Omega";
            return false;
        }
    }
    const double len_in = track_length(in), len_out = track_length(out);
    if (len_out > len_in + res.slack + 1e-12) {
        why = "length increased";
        return false;
    }
    if (len_out < loop_length_floor(1, a.front().theta, a.back().theta) - res.grid_slack - res.slack - 1e-12) {
        why = "below the single-loop floor";
        return false;
    }
    return true;
}

Outcome geometry_criterion() {
    Outcome o;
    Rng rng(gen::default_seed + 101);
    int phi_bad = 0, cone_bad = 0, mirror_bad = 0, minus = 0;
    for (int i = 0; i < 10000; ++i) {
        const State3 x = gen::unit_vector_off_boundary(rng, 1e-9);
        if ((phi_dot(x) > 0.0) != in_omega(x)) ++phi_bad;
        const double u = (x.y + x.ddy) / std::sqrt(2.0), v = (x.y - x.ddy) / std::sqrt(2.0);
        if ((u * u > v * v + 2 * x.dy * x.dy) != in_omega(x)) ++cone_bad;
        const Region r = classify(x), m = classify(reflect_mirror(x));
        if (r == Region::omega_minus) ++minus;
        const bool swapped = (r == Region::omega_minus && m == Region::omega_plus) ||
                             (r == Region::omega_plus && m == Region::omega_minus) ||
                             (r == Region::outside && m == Region::outside);
        if (!swapped || max_abs_diff(reflect_mirror(reflect_mirror(x)), x) != 0.0) ++mirror_bad;
    }
    o.require(phi_bad == 0, f("%d phi-dot mismatches", phi_bad));
    o.require(cone_bad == 0, f("%d cone mismatches", cone_bad));
    o.require(mirror_bad == 0 && minus > 0, f("%d mirror mismatches", mirror_bad));
    int loops = 0, loop_bad = 0;
    std::string why;
    for (int trial = 0; trial < 40; ++trial, ++loops) {
        const gen::Loop loop = trial % 2 ? gen::backtracking_loop(rng, 600, 0.9) : gen::smooth_loop(rng, 600, 0.9);
        if (!surgery_ok(track_from_points(loop.points, 0, 1), why)) ++loop_bad;
    }
    o.require(loop_bad == 0, f("%d loops fail surgery: ", loop_bad) + why);
    o.detail = f("1e4 points per check, %d Omega- points mirrored, %d loops surgered", minus, loops) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

Outcome desingularization_criterion() {
    Outcome o;
    // y = (t - 1)^2 (t - 2.5)(t + 0.5): one point with y = y' = 0.
    auto y = [](double t) { return (t - 1) * (t - 1) * (t - 2.5) * (t + 0.5); };
    auto dy = [](double t) {
        return 2 * (t - 1) * (t - 2.5) * (t + 0.5) + (t - 1) * (t - 1) * ((t + 0.5) + (t - 2.5));
    };
    auto ddy = [](double t) { return 2 * (t - 2.5) * (t + 0.5) + 8 * (t - 1) * (t - 1) + 2 * (t - 1) * (t - 1); };
    const auto before = find_function_zeros(y, dy, -1.0, 3.0, 400);
    const Perturbation p = desingularize(ddy, {1.0});
    std::size_t min_after = 1000;
    bool simple = true;
    for (double n : {1e2, 1e4, 1e6}) {
        auto yn = [&](double t) { return y(t) + p(t) / n; };
        auto dyn = [&](double t) { return dy(t) + p.eval(t, 1) / n; };
        const auto after = find_function_zeros(yn, dyn, -1.0, 3.0, 4000);
        min_after = std::min(min_after, after.size());
        for (const Zero& z : after) simple = simple && z.simple;
    }
    o.require(min_after >= before.size(), "zero count dropped");
    o.require(simple, "a perturbed zero is not simple");
    // C^3 check on a perturbation with several joins.
    const Perturbation q = desingularize([](double t) { return t < 1.5 ? 1.0 : -1.0; }, {0.0, 1.0, 2.5});
    // One-sided difference quotients of order k - 1 from each side against the sup norm of the k-th derivative.
    double worst = 0.0;
    const double h = 1e-8, e = 1e-12;
    for (int order = 1; order <= 3; ++order) {
        double scale = 0.0;
        for (double t = -0.5; t <= 3.0; t += 1e-4) scale = std::max(scale, std::abs(q.eval(t, order)));
        for (double tj : q.times()) {
            const double left = (q.eval(tj - e, order - 1) - q.eval(tj - e - h, order - 1)) / h;
            const double right = (q.eval(tj + e + h, order - 1) - q.eval(tj + e, order - 1)) / h;
            worst = std::max(worst, std::abs(left - right) / scale);
            worst = std::max(worst, std::abs(q.eval(tj - e, order) - q.eval(tj + e, order)) / scale);
        }
    }
    o.require(worst <= 1e-6, f("derivative jump %.3g at a join", worst));
    o.detail = f("zeros %zu -> >= %zu, all simple: %s, max relative jump %.2g", before.size(), min_after,
                 simple ? "yes" : "no", worst) +
               (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"boundary constant", constant_criterion},
        {"random-equation margin sweep", sweep_criterion},
        {"sine oracle", sin_criterion},
        {"extremal sharpness", extremal_criterion},
        {"integrand vs finite differences", integrand_criterion},
        {"sphere geometry and surgery", geometry_criterion},
        {"desingularization", desingularization_criterion},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        failed += !o.pass;
        std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
