#pragma once

// The extremal family: a smooth curve theta = F(phi) just outside the closure of Omega+, its
// time parameterisation along the azimuth flow phi' = tan F cos phi - sin^2 phi, and the
// equation y''' = A y + B y' + C y'' whose projected solution rides that curve. Measuring
// gamma and nu on it gives ratios mu/nu approaching L / (2 pi) from above as delta -> 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "osc3/error.hpp"
#include "osc3/hermite.hpp"
#include "osc3/metrics.hpp"
#include "osc3/ode.hpp"
#include "osc3/quadrature.hpp"
#include "osc3/sphere.hpp"
#include "osc3/state.hpp"

namespace osc3 {

struct CurveOptions {
    /// Mollifier half-width divided by the grid spacing.
    double grid_factor = 8.0;
};

/// Smooth 2 pi-periodic F with its construction diagnostics.
struct CurveF {
    double delta = 0.0;
    double width = 0.0;  // mollifier half-width
    PeriodicQuinticHermite table;

    double w11 = 0.0;          // int |F - g| + |F' - g'| with g = theta0_closed - delta/(4 pi)
    double w11_limit = 0.0;    // delta / (16 pi)
    double max_value = 0.0;    // max F
    double value_limit = 0.0;  // pi/2 - delta/(8 pi)
    double min_gap = 0.0;      // min (theta0_closed - F)
    double max_speed = 0.0;    // max (tan F cos phi - sin^2 phi), must be < 0
    double length = 0.0;       // sphere length of the graph
    double length_gap = 0.0;   // length - L

    double operator()(double phi) const { return table.eval(phi, 0); }
    double d1(double phi) const { return table.eval(phi, 1); }
    double d2(double phi) const { return table.eval(phi, 2); }

    /// phi' along the curve (negative everywhere).
    double speed(double phi) const { return std::tan((*this)(phi)) * std::cos(phi) - std::sin(phi) * std::sin(phi); }
};

namespace detail {

/// Kinks of theta0_closed at +-pi/2 inside (x - w, x + w), as offsets s with x - s at the kink.
inline std::vector<double> kink_offsets(double x, double w) {
    std::vector<double> out;
    for (double k : {std::numbers::pi / 2, -std::numbers::pi / 2}) {
        const double d = std::remainder(x - k, 2.0 * std::numbers::pi);
        if (std::abs(d) < w) out.push_back(d);
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <class Fn>
double piecewise_integral(Fn&& f, double a, double b, const std::vector<double>& breaks, double tol) {
    double sum = 0.0, lo = a;
    for (double x : breaks) {
        if (x <= lo || x >= b) continue;
        sum += quad::integrate(f, lo, x, tol, 0.0, 256).value;
        lo = x;
    }
    return sum + quad::integrate(f, lo, b, tol, 0.0, 256).value;
}

}  // namespace detail

/// Mollifies theta0_closed - delta/(4 pi) with the bump exp(-1/(1 - (s/w)^2)), w = delta/(16 pi),
/// tabulates F, F', F'' on a uniform grid with pi/2 and pi among the nodes, and verifies
/// the construction bounds. Throws ConstructionError (naming the failed bounds) otherwise.
inline CurveF build_F(double delta, const CurveOptions& opts = {}) {
    const double pi = std::numbers::pi;
    if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("build_F: delta must lie in (0, 1)");
    if (!(opts.grid_factor >= 2.0)) throw PreconditionError("build_F: grid_factor must be >= 2");
    CurveF F;
    F.delta = delta;
    F.width = delta / (16.0 * pi);
    const double w = F.width;
    const double shift = delta / (4.0 * pi);
    const auto quarter = static_cast<std::size_t>(std::ceil(pi / 2.0 / (w / opts.grid_factor)));
    const std::size_t n = 4 * quarter;
    const double h = 2.0 * pi / static_cast<double>(n);

    auto rho = [w](double s) {
        const double x = s / w;
        const double d = 1.0 - x * x;
        return d > 0.0 ? std::exp(-1.0 / d) : 0.0;
    };
    auto drho = [w](double s) {
        const double x = s / w;
        const double d = 1.0 - x * x;
        return d > 0.0 ? std::exp(-1.0 / d) * (-2.0 * x / (d * d)) / w : 0.0;
    };
    const double tol = 1e-16;
    const double norm_const = quad::integrate(rho, -w, w, tol * w, 0.0, 256).value;

    std::vector<double> f(n), df(n), d2f(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = -pi + static_cast<double>(k) * h;
        const auto breaks = detail::kink_offsets(x, w);
        auto gv = [&](double s) { return rho(s) * theta0_closed(x - s); };
        auto gd = [&](double s) { return rho(s) * theta0_closed_derivative(x - s); };
        auto gdd = [&](double s) { return drho(s) * theta0_closed_derivative(x - s); };
        f[k] = detail::piecewise_integral(gv, -w, w, breaks, tol * w) / norm_const - shift;
        df[k] = detail::piecewise_integral(gd, -w, w, breaks, tol * w) / norm_const;
        d2f[k] = detail::piecewise_integral(gdd, -w, w, breaks, tol) / norm_const;
    }
    F.table = PeriodicQuinticHermite(-pi, 2.0 * pi, f, df, d2f);

    // Diagnostics on every grid interval with a 15-point Kronrod rule; the kinks are nodes.
    F.w11_limit = delta / (16.0 * pi);
    F.value_limit = pi / 2 - delta / (8.0 * pi);
    F.max_value = -std::numeric_limits<double>::infinity();
    F.min_gap = std::numeric_limits<double>::infinity();
    F.max_speed = -std::numeric_limits<double>::infinity();
    detail::CompensatedSum w11, len;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = -pi + static_cast<double>(k) * h;
        const double b = a + h;
        auto g = [&](double p) { return theta0_closed(p) - shift; };
        auto gd = [&](double p) { return theta0_closed_derivative(p); };
        auto dist = [&](double p) {
            const double v = F(p);
            F.max_value = std::max(F.max_value, v);
            F.min_gap = std::min(F.min_gap, g(p) + shift - v);
            F.max_speed = std::max(F.max_speed, F.speed(p));
            return std::abs(v - g(p)) + std::abs(F.d1(p) - gd(p));
        };
        auto arclen = [&](double p) { return std::hypot(F.d1(p), std::cos(F(p))); };
        w11.add(quad::gauss_kronrod15(dist, a, b).value);
        len.add(quad::gauss_kronrod15(arclen, a, b).value);
    }
    F.w11 = w11.value();
    F.length = len.value();
    F.length_gap = F.length - region_constant().value;

    std::string failed;
    if (!(F.w11 < F.w11_limit)) failed += " W11-distance";
    if (!(F.max_value <= F.value_limit)) failed += " max-value";
    if (!(F.min_gap > 0.0)) failed += " outside-closure";
    if (!(F.max_speed < 0.0)) failed += " monotone-time";
    if (!(std::abs(F.length_gap) < delta)) failed += " length";
    if (!failed.empty())
        throw ConstructionError("build_F(delta=" + std::to_string(delta) + "): failed checks:" + failed);
    return F;
}

/// t(phi) = int_pi^phi dphi / (tan F cos phi - sin^2 phi) over K periods, and its inverse phi0(t).
struct TimeMap {
    double period = 0.0;  // T = -t(3 pi)
    int periods = 0;
    /// max_k |t(pi - 2 pi k) - k T| over the tabulated periods.
    double periodicity_error = 0.0;
    std::vector<double> t_nodes;    // increasing, t_nodes[0] = 0
    std::vector<double> phi_nodes;  // decreasing, phi_nodes[0] = pi
    CubicHermite phi0;              // t -> phi
    double horizon() const { return t_nodes.back(); }
};

/// Tabulates t(phi) on the curve grid refined `refine` times; phi0 is the monotone cubic
/// Hermite inverse with slopes phi' = speed(phi).
inline TimeMap time_reparam(const CurveF& F, int periods, int refine = 1) {
    const double pi = std::numbers::pi;
    if (periods < 1) throw PreconditionError("time_reparam: need at least one period");
    if (refine < 1) throw PreconditionError("time_reparam: refine must be >= 1");
    const std::size_t per = F.table.size() * static_cast<std::size_t>(refine);
    const double h = 2.0 * pi / static_cast<double>(per);
    auto inv = [&](double p) {
        const double s = F.speed(p);
        if (!(s < 0.0)) throw ConstructionError("time_reparam: azimuth speed is not negative at phi=" + std::to_string(p));
        return -1.0 / s;
    };
    TimeMap tm;
    tm.periods = periods;
    // One period by adaptive quadrature over [pi, 3 pi], split at the grid nodes near the poles.
    {
        detail::CompensatedSum sum;
        for (std::size_t j = 0; j < per; ++j) {
            const double a = pi + static_cast<double>(j) * h;
            sum.add(quad::integrate(inv, a, a + h, 1e-15, 1e-14, 64).value);
        }
        tm.period = sum.value();
    }
    const std::size_t total = per * static_cast<std::size_t>(periods);
    tm.t_nodes.resize(total + 1);
    tm.phi_nodes.resize(total + 1);
    std::vector<double> slopes(total + 1);
    detail::CompensatedSum t;
    tm.t_nodes[0] = 0.0;
    tm.phi_nodes[0] = pi;
    slopes[0] = F.speed(pi);
    for (std::size_t j = 1; j <= total; ++j) {
        const std::size_t k = j % per;
        const double cycles = static_cast<double>(j / per);
        const double b = pi - 2.0 * pi * cycles - static_cast<double>(k) * h;
        const double a = b + h;
        t.add(quad::integrate(inv, b, a, 1e-15, 1e-14, 64).value);
        tm.t_nodes[j] = t.value();
        tm.phi_nodes[j] = b;
        slopes[j] = F.speed(b);
        if (k == 0) {
            tm.periodicity_error = std::max(tm.periodicity_error, std::abs(tm.t_nodes[j] - cycles * tm.period));
        }
    }
    tm.phi0 = CubicHermite(tm.t_nodes, tm.phi_nodes, slopes);
    tm.phi0.make_monotone();
    return tm;
}

/// Synthesised equation in the form y''' + a y'' + b y' + c y = 0 with a = -C, b = -B, c = -A.
struct ExtremalCoefficients {
    CubicHermite A, B, C;
    CoefficientSpec spec;
};

inline ExtremalCoefficients synthesize_coefficients(const CurveF& F, const TimeMap& tm) {
    const std::size_t n = tm.t_nodes.size();
    std::vector<double> A(n), B(n), C(n), dA(n), dB(n), dC(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double p = tm.phi_nodes[j];
        const double f = F(p), f1 = F.d1(p), f2 = F.d2(p);
        const double cp = std::cos(p), sp = std::sin(p);
        const double tf = std::tan(f), sec2 = 1.0 + tf * tf;
        const double g = tf * cp - sp * sp;
        const double g1 = sec2 * f1 * cp - tf * sp - 2.0 * sp * cp;
        const double H = f1 * g;  // Theta0'(t)
        const double H1 = f2 * g + f1 * g1;  // dH/dphi
        A[j] = H * cp;
        B[j] = H * sp;
        C[j] = H * tf + sp * (cp + tf);
        // d/dt = g d/dphi
        dA[j] = g * (H1 * cp - H * sp);
        dB[j] = g * (H1 * sp + H * cp);
        dC[j] = g * (H1 * tf + H * sec2 * f1 + cp * (cp + tf) + sp * (-sp + sec2 * f1));
    }
    ExtremalCoefficients ec{CubicHermite(tm.t_nodes, A, dA), CubicHermite(tm.t_nodes, B, dB),
                            CubicHermite(tm.t_nodes, C, dC), {}};
    const CubicHermite a = ec.C, b = ec.B, c = ec.A;
    ec.spec.a = [a](double t) { return -a(t); };
    ec.spec.b = [b](double t) { return -b(t); };
    ec.spec.c = [c](double t) { return -c(t); };
    ec.spec.a_text = "-C(t) [table]";
    ec.spec.b_text = "-B(t) [table]";
    ec.spec.c_text = "-A(t) [table]";
    return ec;
}

struct ExtremalModel {
    CurveF F;
    TimeMap time;
    ExtremalCoefficients coeffs;

    double phi0(double t) const { return time.phi0(t); }
    double Theta0(double t) const { return F(time.phi0(t)); }
    /// Prescribed direction P(phi0(t), Theta0(t)).
    State3 direction(double t) const {
        const double p = phi0(t);
        return SphericalPoint{p, F(p)}.embed();
    }
    /// Initial data (-1, 0, tan F(pi)).
    State3 initial_state() const { return {-1.0, 0.0, std::tan(F(std::numbers::pi))}; }
};

inline ExtremalModel build_model(double delta, int periods, const CurveOptions& copts = {}, int refine = 1) {
    ExtremalModel m;
    m.F = build_F(delta, copts);
    m.time = time_reparam(m.F, periods, refine);
    m.coeffs = synthesize_coefficients(m.F, m.time);
    return m;
}

struct ExtremalOptions {
    CurveOptions curve;
    int refine = 1;
    IntegratorOptions integrator{.rtol = 1e-11, .atol = 1e-13};
    /// Longest re-anchoring window (time units); <= 0 integrates in one shot.
    double anchor_window = 8.0;
    /// A window whose deviation exceeds this is halved and retried, down to min_window.
    double anchor_target = 1e-5;
    double min_window = 1e-3;
    double track_tolerance = 1e-3;
    double quad_tol = 1e-10;
    /// Throw TrackMismatchError when the deviation exceeds track_tolerance.
    bool strict = true;
    bool free_run = true;
    /// Repeat on a grid twice as fine and compare ratios.
    bool self_check = false;
    double self_check_tolerance = 1e-4;
};

struct ExtremalReport {
    double delta = 0.0;
    int periods = 0;
    double period = 0.0;
    double horizon = 0.0;
    long nu = 0;
    long nu_expected = 0;
    double gamma = 0.0;
    double gamma_first_period = 0.0;
    double mu_est = 0.0, nu_est = 0.0, ratio = 0.0;
    double floor = 0.0;  // L / (2 pi)
    double upper = 0.0;  // L/(2 pi) + delta/(2 pi) + 0.01
    double curve_length = 0.0;
    double w11 = 0.0, w11_limit = 0.0, max_F = 0.0, max_F_limit = 0.0;
    double periodicity_error = 0.0;
    double max_phi_deviation = 0.0, max_theta_deviation = 0.0, deviation_time = 0.0;
    std::size_t windows = 0;
    std::size_t rejected_windows = 0;
    double max_anchor_jump = 0.0, total_anchor_jump = 0.0;
    std::size_t omega_samples = 0;  // integrated samples classified inside Omega
    std::optional<double> free_run_divergence;  // time at which the one-shot solution leaves the tolerance
    std::optional<double> self_check_ratio;
    std::size_t steps = 0;
    Tolerances tolerances;
    std::vector<std::string> failures;
    bool passed() const { return failures.empty(); }
};

namespace detail {

struct Deviation {
    double phi = 0.0, theta = 0.0, time = 0.0;
};

inline void measure_deviation(const ExtremalModel& m, const Trajectory& traj, Deviation& dev, std::size_t& omega,
                              int per_segment = 4) {
    auto check = [&](double t, const State3& x) {
        const double p0 = m.phi0(t);
        const SphericalPoint sp = to_spherical(x, p0);
        const double dp = std::abs(sp.phi - p0);
        const double dt = std::abs(sp.theta - m.F(p0));
        if (std::max(dp, dt) > std::max(dev.phi, dev.theta)) dev.time = t;
        dev.phi = std::max(dev.phi, dp);
        dev.theta = std::max(dev.theta, dt);
        if (in_omega(x)) ++omega;
    };
    const auto segs = traj.segments();
    for (std::size_t k = 0; k < segs.size(); ++k) {
        check(traj.time(k), traj.local_state(k));
        for (int j = 1; j < per_segment; ++j) {
            const double t = segs[k].t0 + segs[k].h * j / per_segment;
            check(t, segs[k].eval_local(t));
        }
    }
    check(traj.t_end(), traj.local_state(traj.size() - 1));
}

}  // namespace detail

/// Integrates the synthesised equation over K periods from (-1, 0, tan F(pi)) and measures
/// nu, gamma and their ratio. The prescribed track is repelling on part of every period, so
/// double precision cannot follow it for long: the run restarts from the prescribed direction
/// at the end of windows sized so the deviation within each stays below `anchor_target`,
/// and adds the restart jumps to gamma.
inline ExtremalReport run_extremal_experiment(const ExtremalModel& m, const ExtremalOptions& opts = {}) {
    const double pi = std::numbers::pi;
    const double L = region_constant().value;
    ExtremalReport rep;
    rep.delta = m.F.delta;
    rep.periods = m.time.periods;
    rep.period = m.time.period;
    rep.horizon = m.time.horizon();
    rep.nu_expected = 2L * rep.periods;
    rep.floor = L / (2.0 * pi);
    rep.upper = rep.floor + rep.delta / (2.0 * pi) + 0.01;
    rep.curve_length = m.F.length;
    rep.w11 = m.F.w11;
    rep.w11_limit = m.F.w11_limit;
    rep.max_F = m.F.max_value;
    rep.max_F_limit = m.F.value_limit;
    rep.periodicity_error = m.time.periodicity_error;
    rep.tolerances = {opts.integrator.rtol, opts.integrator.atol, opts.quad_tol};

    const double horizon = rep.horizon;
    const double window = opts.anchor_window > 0.0 ? opts.anchor_window : horizon;
    const double target_dev = opts.anchor_window > 0.0 ? opts.anchor_target : std::numeric_limits<double>::infinity();
    const double merge = 1e-6 * std::max(1.0, horizon);
    std::vector<double> zeros;
    detail::Deviation dev;
    detail::CompensatedSum gamma;
    State3 x = m.initial_state();
    double t = 0.0;
    double w = window;
    while (t < horizon) {
        double t1 = std::min(horizon, t + w);
        if (horizon - t1 < 1e-3 * w) t1 = horizon;
        const Trajectory traj = integrate(m.coeffs.spec, x, t, t1, opts.integrator);
        rep.steps += traj.segments().size();
        detail::Deviation d;
        std::size_t omega = 0;
        detail::measure_deviation(m, traj, d, omega);
        const double e = std::max(d.phi, d.theta);
        if (e > target_dev && t1 - t > opts.min_window) {
            w = std::max(opts.min_window, 0.5 * (t1 - t));
            ++rep.rejected_windows;
            continue;
        }
        if (e < target_dev / 8.0) w = std::min(window, 2.0 * (t1 - t));
        ++rep.windows;
        rep.omega_samples += omega;
        if (e > std::max(dev.phi, dev.theta)) dev.time = d.time;
        dev.phi = std::max(dev.phi, d.phi);
        dev.theta = std::max(dev.theta, d.theta);
        for (const Zero& z : find_zeros(traj))
            if (zeros.empty() || z.t - zeros.back() > merge) zeros.push_back(z.t);
        const double g = wandering_length(traj, t, t1, opts.quad_tol * (t1 - t) / horizon);
        gamma.add(g);
        if (t < rep.period) {
            const double cut = std::min(t1, rep.period);
            rep.gamma_first_period += cut == t1 ? g : wandering_length(traj, t, cut, opts.quad_tol);
        }
        const State3 end = normalized(traj.local_state(traj.size() - 1));
        const State3 target = m.direction(t1);
        if (t1 < horizon) {
            const double jump = great_circle_distance(end, target);
            rep.max_anchor_jump = std::max(rep.max_anchor_jump, jump);
            rep.total_anchor_jump += jump;
            gamma.add(jump);
            if (t1 <= rep.period) rep.gamma_first_period += jump;
        }
        x = target;
        t = t1;
    }
    rep.nu = static_cast<long>(zeros.size());
    rep.gamma = gamma.value();
    rep.max_phi_deviation = dev.phi;
    rep.max_theta_deviation = dev.theta;
    rep.deviation_time = dev.time;
    rep.mu_est = rep.gamma / horizon;
    rep.nu_est = pi * static_cast<double>(rep.nu) / horizon;
    rep.ratio = rep.nu > 0 ? rep.mu_est / rep.nu_est : std::numeric_limits<double>::infinity();

    if (opts.free_run) {
        // One-shot integration in chunks, stopped once it leaves the tolerance.
        State3 y = m.initial_state();
        double s = 0.0;
        while (s < horizon) {
            const double s1 = std::min(horizon, s + window);
            const Trajectory traj = integrate(m.coeffs.spec, y, s, s1, opts.integrator);
            detail::Deviation d;
            std::size_t ignored = 0;
            detail::measure_deviation(m, traj, d, ignored);
            if (std::max(d.phi, d.theta) > opts.track_tolerance) {
                rep.free_run_divergence = d.time;
                break;
            }
            y = traj.local_state(traj.size() - 1);
            s = s1;
        }
    }

    if (rep.nu != rep.nu_expected) rep.failures.push_back("zero count differs from 2K");
    if (!(rep.ratio > rep.floor)) rep.failures.push_back("ratio not above L/(2 pi)");
    if (!(rep.ratio < rep.upper)) rep.failures.push_back("ratio not below L/(2 pi) + delta/(2 pi) + 0.01");
    if (std::max(rep.max_phi_deviation, rep.max_theta_deviation) > opts.track_tolerance)
        rep.failures.push_back("integrated track deviates from the prescribed one");
    if (rep.omega_samples > 0) rep.failures.push_back("integrated track enters Omega");

    if (opts.self_check) {
        ExtremalOptions fine = opts;
        fine.self_check = false;
        fine.free_run = false;
        fine.strict = false;
        fine.curve.grid_factor *= 2.0;
        const ExtremalModel m2 = build_model(m.F.delta, m.time.periods, fine.curve, opts.refine);
        const ExtremalReport r2 = run_extremal_experiment(m2, fine);
        rep.self_check_ratio = r2.ratio;
        if (!(std::abs(r2.ratio - rep.ratio) <= opts.self_check_tolerance))
            rep.failures.push_back("ratio changes under grid refinement");
    }

    if (opts.strict && std::max(rep.max_phi_deviation, rep.max_theta_deviation) > opts.track_tolerance)
        throw TrackMismatchError("extremal track mismatch", rep.deviation_time,
                                 std::max(rep.max_phi_deviation, rep.max_theta_deviation));
    return rep;
}

inline ExtremalReport run_extremal_experiment(double delta, int periods, const ExtremalOptions& opts = {}) {
    if (periods < 3) throw PreconditionError("run_extremal_experiment: need at least 3 periods");
    const ExtremalModel m = build_model(delta, periods, opts.curve, opts.refine);
    return run_extremal_experiment(m, opts);
}

}  // namespace osc3
