#pragma once

// Integration of y''' + a(t) y'' + b(t) y' + c(t) y = 0 as the first-order system
// x' = (y', y'', -a y'' - b y' - c y) with the Dormand-Prince 5(4) pair and its
// 4th-order continuous extension, plus zero detection on the dense output.
//
// The equation is linear, so states are renormalised by powers of two after steps whose
// norm leaves [1/16, 16]. Each dense segment carries its binary exponent; the true state is
// ldexp(local, exponent). Directions, signs and zeros only need the local representation,
// and solutions that grow or decay exponentially neither overflow nor fall below atol.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osc3/error.hpp"
#include "osc3/expr.hpp"
#include "osc3/hermite.hpp"
#include "osc3/state.hpp"

namespace osc3 {

using ScalarFunction = std::function<double(double)>;

/// Coefficients a, b, c of y''' + a y'' + b y' + c y = 0.
struct CoefficientSpec {
    ScalarFunction a, b, c;
    std::string a_text = "0", b_text = "0", c_text = "0";

    static CoefficientSpec from_expressions(const expr::Expression& a, const expr::Expression& b,
                                            const expr::Expression& c) {
        return {a, b, c, a.to_string(), b.to_string(), c.to_string()};
    }

    static CoefficientSpec parse(std::string_view a, std::string_view b, std::string_view c) {
        CoefficientSpec s = from_expressions(expr::parse(a), expr::parse(b), expr::parse(c));
        s.a_text = std::string(a);
        s.b_text = std::string(b);
        s.c_text = std::string(c);
        return s;
    }

    static CoefficientSpec from_tables(CubicHermite a, CubicHermite b, CubicHermite c) {
        return {std::move(a), std::move(b), std::move(c), "<table>", "<table>", "<table>"};
    }

    /// Right-hand side of the first-order system.
    State3 derivative(double t, const State3& x) const {
        return {x.dy, x.ddy, -a(t) * x.ddy - b(t) * x.dy - c(t) * x.y};
    }
};

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double initial_step = 0.0;  // 0: automatic
    double max_step = std::numeric_limits<double>::infinity();
    /// Upper bound on the azimuth change |dphi| per step (keeps unwrapping unambiguous).
    double max_phase_step = std::numbers::pi / 4;
    std::size_t max_steps = 5'000'000;
};

/// One accepted step with the Dormand-Prince continuous extension, in the local scale.
struct DenseSegment {
    double t0 = 0.0;
    double h = 0.0;
    std::array<State3, 5> r{};
    int exponent = 0;

    double t1() const { return t0 + h; }

    State3 eval_local(double t) const {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        return r[0] + s * (r[1] + s1 * (r[2] + s * (r[3] + s1 * r[4])));
    }
};

class Trajectory {
public:
    Trajectory() = default;

    const CoefficientSpec& spec() const { return spec_; }
    const IntegratorOptions& options() const { return options_; }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }

    /// Number of stored samples (segments + 1).
    std::size_t size() const { return times_.size(); }
    double time(std::size_t i) const { return times_[i]; }
    const State3& local_state(std::size_t i) const { return states_[i]; }
    int exponent(std::size_t i) const { return exponents_[i]; }
    State3 state(std::size_t i) const { return ldexp(states_[i], exponents_[i]); }
    std::span<const double> times() const { return times_; }
    std::span<const DenseSegment> segments() const { return segments_; }
    std::size_t rhs_evaluations() const { return rhs_evaluations_; }

    std::size_t segment_index(double t) const {
        check_range(t);
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return std::min(i, segments_.size() - 1);
    }

    /// State at t in the local scale of its segment; `exponent` receives the scale.
    State3 eval_local(double t, int* exponent = nullptr) const {
        const std::size_t k = segment_index(t);
        const DenseSegment& seg = segments_[k];
        if (exponent) *exponent = seg.exponent;
        if (t == seg.t1()) return ldexp(states_[k + 1], exponents_[k + 1] - seg.exponent);
        if (t == seg.t0) return states_[k];
        return seg.eval_local(t);
    }

    /// True-scale state at any t in the horizon; throws PreconditionError outside it.
    State3 eval_dense(double t) const {
        int e = 0;
        const State3 x = eval_local(t, &e);
        return ldexp(x, e);
    }

    /// Direction x/|x| at t (scale free).
    State3 direction(double t) const { return normalized(eval_local(t)); }

private:
    friend Trajectory integrate(const CoefficientSpec&, const State3&, double, double, const IntegratorOptions&);

    void check_range(double t) const {
        if (!(t >= times_.front() && t <= times_.back()))
            throw PreconditionError("time " + std::to_string(t) + " outside integrated horizon [" +
                                    std::to_string(times_.front()) + ", " + std::to_string(times_.back()) + "]");
    }

    CoefficientSpec spec_;
    IntegratorOptions options_;
    std::vector<double> times_;
    std::vector<State3> states_;
    std::vector<int> exponents_;
    std::vector<DenseSegment> segments_;
    std::size_t rhs_evaluations_ = 0;
};

namespace detail {

// Dormand-Prince 5(4) coefficients with dense output (Hairer, Norsett, Wanner).
struct Dopri5 {
    static constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
    static constexpr double a21 = 0.2;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                            a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline bool finite(const State3& x) { return std::isfinite(x.y) && std::isfinite(x.dy) && std::isfinite(x.ddy); }

inline double error_norm(const State3& err, const State3& x0, const State3& x1, double rtol, double atol) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double sk = atol + rtol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        const double e = err[i] / sk;
        sum += e * e;
    }
    return std::sqrt(sum / 3.0);
}

/// |dphi/dt| at x, or 0 near a pole where the azimuth is undefined.
inline double phase_speed(const State3& x) {
    const double rho2 = x.y * x.y + x.dy * x.dy;
    const double n2 = rho2 + x.ddy * x.ddy;
    if (rho2 < 1e-20 * n2) return 0.0;
    return std::abs((x.ddy * x.y - x.dy * x.dy) / rho2);
}

}  // namespace detail

/// Integrates from t0 to t1 > t0 starting at `init`. Throws IntegrationError on step-size
/// underflow, step-count exhaustion or non-finite derivatives; DomainError from coefficients
/// propagates with the offending time appended.
inline Trajectory integrate(const CoefficientSpec& spec, const State3& init, double t0, double t1,
                            const IntegratorOptions& opts = {}) {
    using K = detail::Dopri5;
    if (!(t1 > t0)) throw PreconditionError("integrate: horizon must satisfy t1 > t0");
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw PreconditionError("integrate: tolerances must be positive");
    if (init == State3{} || !detail::finite(init)) throw PreconditionError("integrate: initial state must be nonzero and finite");

    Trajectory traj;
    traj.spec_ = spec;
    traj.options_ = opts;

    auto f = [&](double t, const State3& x) {
        ++traj.rhs_evaluations_;
        State3 d;
        try {
            d = spec.derivative(t, x);
        } catch (const DomainError& e) {
            throw DomainError(std::string(e.what()) + " (coefficient at t=" + std::to_string(t) + ")");
        }
        if (!detail::finite(d)) throw IntegrationError("non-finite derivative", t);
        return d;
    };

    int exponent = 0;
    State3 x = init;
    {
        const double n = norm(x);
        if (n > 16.0 || n < 1.0 / 16.0) {
            const int e = static_cast<int>(std::lround(std::log2(n)));
            x = ldexp(x, -e);
            exponent = e;
        }
    }
    double t = t0;
    traj.times_.push_back(t);
    traj.states_.push_back(x);
    traj.exponents_.push_back(exponent);

    State3 k1 = f(t, x);
    const double span = t1 - t0;
    double h = opts.initial_step;
    if (!(h > 0.0)) {
        // Hairer's starting-step heuristic.
        auto scaled = [&](const State3& v) {
            double s = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double sk = opts.atol + opts.rtol * std::abs(x[i]);
                s += (v[i] / sk) * (v[i] / sk);
            }
            return std::sqrt(s / 3.0);
        };
        const double d0 = scaled(x), d1 = scaled(k1);
        double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, span);
        const State3 k2 = f(t + h0, x + h0 * k1);
        const double d2 = scaled(k2 - k1) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, span});
    }
    h = std::min(h, opts.max_step);

    constexpr double safe = 0.9, facc1 = 5.0, facc2 = 0.1, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    double facold = 1e-4;
    bool last_rejected = false;
    std::size_t steps = 0;

    while (t < t1) {
        if (++steps > opts.max_steps) throw IntegrationError("step count limit exceeded", t);
        const double min_step = 1e-14 * std::max(1.0, std::abs(t));
        bool final_step = false;
        if (t + h >= t1 || t + 1.01 * h >= t1) {
            h = t1 - t;
            final_step = true;
        }
        if (h < min_step && !final_step) throw IntegrationError("step size underflow", t);

        const State3 k2 = f(t + K::c2 * h, x + h * (K::a21 * k1));
        const State3 k3 = f(t + K::c3 * h, x + h * (K::a31 * k1 + K::a32 * k2));
        const State3 k4 = f(t + K::c4 * h, x + h * (K::a41 * k1 + K::a42 * k2 + K::a43 * k3));
        const State3 k5 = f(t + K::c5 * h, x + h * (K::a51 * k1 + K::a52 * k2 + K::a53 * k3 + K::a54 * k4));
        const State3 ysti = x + h * (K::a61 * k1 + K::a62 * k2 + K::a63 * k3 + K::a64 * k4 + K::a65 * k5);
        const double tph = final_step ? t1 : t + h;
        const State3 k6 = f(tph, ysti);
        const State3 xnew = x + h * (K::a71 * k1 + K::a73 * k3 + K::a74 * k4 + K::a75 * k5 + K::a76 * k6);
        const State3 k7 = f(tph, xnew);
        const State3 errv = h * (K::e1 * k1 + K::e3 * k3 + K::e4 * k4 + K::e5 * k5 + K::e6 * k6 + K::e7 * k7);
        const double err = detail::error_norm(errv, x, xnew, opts.rtol, opts.atol);

        // Azimuth change bound, from speeds at both ends and at the stage states.
        const double phase = h * std::max({detail::phase_speed(x), detail::phase_speed(xnew),
                                           detail::phase_speed(ysti)});
        const bool phase_ok = phase <= opts.max_phase_step;

        const double fac11 = std::pow(std::max(err, 1e-300), expo1);
        if (err <= 1.0 && phase_ok) {
            DenseSegment seg;
            seg.t0 = t;
            seg.h = h;
            seg.exponent = exponent;
            seg.r[0] = x;
            seg.r[1] = xnew - x;
            seg.r[2] = h * k1 - seg.r[1];
            seg.r[3] = seg.r[1] - h * k7 - seg.r[2];
            seg.r[4] = h * (K::d1 * k1 + K::d3 * k3 + K::d4 * k4 + K::d5 * k5 + K::d6 * k6 + K::d7 * k7);
            traj.segments_.push_back(seg);

            x = xnew;
            k1 = k7;
            t = tph;
            const double n = norm(x);
            if (n > 16.0 || n < 1.0 / 16.0) {
                const int e = static_cast<int>(std::lround(std::log2(n)));
                x = ldexp(x, -e);
                k1 = ldexp(k1, -e);
                exponent += e;
            }
            traj.times_.push_back(t);
            traj.states_.push_back(x);
            traj.exponents_.push_back(exponent);

            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(facc2, std::min(facc1, fac / safe));
            double hnew = h / fac;
            if (last_rejected) hnew = std::min(hnew, h);
            facold = std::max(err, 1e-4);
            last_rejected = false;
            h = std::min(hnew, opts.max_step);
        } else {
            double hnew = h;
            if (err > 1.0) hnew = h / std::min(facc1, fac11 / safe);
            if (!phase_ok) hnew = std::min(hnew, h * std::max(0.2, 0.9 * opts.max_phase_step / phase));
            h = hnew;
            last_rejected = true;
            if (h < min_step) throw IntegrationError("step size underflow", t);
        }
    }
    return traj;
}

/// Integration over [0, horizon].
inline Trajectory integrate(const CoefficientSpec& spec, const State3& init, double horizon,
                            const IntegratorOptions& opts = {}) {
    return integrate(spec, init, 0.0, horizon, opts);
}

// ---------------------------------------------------------------------------------------------
// Zeros

struct Zero {
    double t;
    bool simple;
};

struct ZeroOptions {
    /// Sign scanning points per dense segment.
    int subdivisions = 8;
    /// A zero is non-simple when |y'| < nonsimple_rel * |x| there.
    double nonsimple_rel = 1e-8;
    /// |y| <= value_rel * |x| without a sign change counts as a zero at the horizon ends and
    /// at local extrema of y (tangential, non-simple zeros).
    double value_rel = 1e-7;
    /// Absolute |y| target for refinement, in the local scale; <= 0 uses the trajectory atol.
    double value_abs = 0.0;
};

namespace detail {

/// Brent's method on a bracket with fa*fb < 0; stops when the bracket is narrower than xtol
/// and |f| < ftol (or the bracket can no longer shrink).
template <class F>
double brent_root(F&& f, double a, double b, double fa, double fb, double xtol, double ftol) {
    if (std::abs(fa) < std::abs(fb)) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double c = a, fc = fa, d = b - a;
    bool bisected = true;
    for (int iter = 0; iter < 200; ++iter) {
        if (fb == 0.0) return b;
        if (std::abs(b - c) < xtol && std::abs(fb) < ftol) break;
        if (std::abs(b - a) < xtol && std::abs(fb) < ftol) break;
        double s;
        if (fa != fc && fb != fc) {
            s = a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) +
                c * fa * fb / ((fc - fa) * (fc - fb));
        } else {
            s = b - fb * (b - a) / (fb - fa);
        }
        const double m = 0.5 * (a + b);
        const bool out = (s - (3 * a + b) / 4) * (s - b) >= 0;
        if (out || (bisected && std::abs(s - b) >= std::abs(b - c) / 2) ||
            (!bisected && std::abs(s - b) >= std::abs(c - d) / 2)) {
            s = m;
            bisected = true;
        } else {
            bisected = false;
        }
        if (s == a || s == b) s = m;
        if (s == a || s == b) break;  // bracket exhausted
        const double fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if (fa * fs < 0) {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if (std::abs(fa) < std::abs(fb)) {
            std::swap(a, b);
            std::swap(fa, fb);
        }
    }
    return b;
}

/// Minimum of |g| for a bracket of an extremum of y (sign change of dy on [a,b]).
template <class DY>
double locate_extremum(DY&& dy, double a, double b, double xtol) {
    double fa = dy(a), fb = dy(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    return brent_root(dy, a, b, fa, fb, xtol, std::numeric_limits<double>::infinity());
}

inline void push_zero(std::vector<Zero>& zeros, Zero z, double dedupe) {
    if (!zeros.empty() && std::abs(zeros.back().t - z.t) <= dedupe) {
        zeros.back().simple = zeros.back().simple && z.simple;
        return;
    }
    zeros.push_back(z);
}

/// Scans one smooth piece given callables returning the local state at t.
template <class X>
void scan_piece(X&& state_at, double a, double b, int subdivisions, const ZeroOptions& opts, double ftol,
                double xtol, double dedupe, std::vector<Zero>& zeros) {
    auto y_at = [&](double t) { return state_at(t).y; };
    auto dy_at = [&](double t) { return state_at(t).dy; };
    auto classify = [&](double t) {
        const State3 s = state_at(t);
        return Zero{t, s.dy != 0.0 && std::abs(s.dy) >= opts.nonsimple_rel * norm(s)};
    };
    double ta = a;
    State3 sa = state_at(a);
    if (sa.y == 0.0) push_zero(zeros, classify(a), dedupe);
    for (int j = 1; j <= subdivisions; ++j) {
        const double tb = j == subdivisions ? b : a + (b - a) * j / subdivisions;
        const State3 sb = state_at(tb);
        if (sb.y == 0.0) {
            push_zero(zeros, classify(tb), dedupe);
        } else if (sa.y * sb.y < 0.0) {
            const double tz = brent_root(y_at, ta, tb, sa.y, sb.y, xtol, ftol);
            push_zero(zeros, classify(tz), dedupe);
        } else if (sa.y != 0.0 && sa.dy * sb.dy < 0.0) {
            const double te = locate_extremum(dy_at, ta, tb, xtol);
            const State3 se = state_at(te);
            if (std::abs(se.y) <= opts.value_rel * norm(se)) push_zero(zeros, Zero{te, false}, dedupe);
        }
        ta = tb;
        sa = sb;
    }
}

inline void endpoint_zeros(std::vector<Zero>& zeros, double t0, const State3& s0, double t1, const State3& s1,
                           const ZeroOptions& opts, double merge) {
    auto near_zero = [&](const State3& s) { return std::abs(s.y) <= opts.value_rel * norm(s); };
    auto simple = [&](const State3& s) { return s.dy != 0.0 && std::abs(s.dy) >= opts.nonsimple_rel * norm(s); };
    if (near_zero(s0) && (zeros.empty() || zeros.front().t - t0 > merge))
        zeros.insert(zeros.begin(), Zero{t0, simple(s0)});
    if (near_zero(s1) && (zeros.empty() || t1 - zeros.back().t > merge)) zeros.push_back(Zero{t1, simple(s1)});
}

}  // namespace detail

/// All zeros of y on [t_begin, t_end], ordered, counted once each (multiplicity not weighted).
/// Sign changes are refined by Brent's method to a bracket below 1e-12*max(1,T) and |y| below
/// atol (local scale). Zeros at t_begin/t_end and tangential zeros at extrema are included when
/// |y| <= value_rel*|x|.
inline std::vector<Zero> find_zeros(const Trajectory& traj, const ZeroOptions& opts = {}) {
    const double T = traj.t_end() - traj.t_begin();
    const double xtol = 1e-12 * std::max(1.0, std::max(std::abs(traj.t_end()), T));
    const double ftol = opts.value_abs > 0.0 ? opts.value_abs : traj.options().atol;
    const double merge = 1e-6 * std::max(1.0, T);
    std::vector<Zero> zeros;
    const auto segments = traj.segments();
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const DenseSegment& seg = segments[k];
        // Stored nodes are the exact endpoint states; scale to the segment's exponent.
        const State3 end = ldexp(traj.local_state(k + 1), traj.exponent(k + 1) - seg.exponent);
        auto state_at = [&](double t) {
            if (t == seg.t0) return traj.local_state(k);
            if (t == seg.t1()) return end;
            return seg.eval_local(t);
        };
        detail::scan_piece(state_at, seg.t0, seg.t1(), opts.subdivisions, opts, ftol, xtol, xtol, zeros);
    }
    detail::endpoint_zeros(zeros, traj.t_begin(), traj.local_state(0), traj.t_end(),
                           traj.local_state(traj.size() - 1), opts, merge);
    return zeros;
}

/// Zeros of an arbitrary smooth function given value and derivative callables, scanned on
/// `samples` uniform subintervals of [t0, t1]. Uses |(f, f')| as the scale for the
/// non-simple and tangential-zero thresholds.
template <class Fn, class DFn>
std::vector<Zero> find_function_zeros(Fn&& f, DFn&& df, double t0, double t1, std::size_t samples,
                                      const ZeroOptions& opts = {}) {
    const double T = t1 - t0;
    const double xtol = 1e-12 * std::max(1.0, T);
    const double ftol = opts.value_abs > 0.0 ? opts.value_abs : 1e-14;
    auto state_at = [&](double t) { return State3{f(t), df(t), 0.0}; };
    std::vector<Zero> zeros;
    const int per = std::max(1, opts.subdivisions);
    for (std::size_t i = 0; i < samples; ++i) {
        const double a = t0 + T * static_cast<double>(i) / static_cast<double>(samples);
        const double b = i + 1 == samples ? t1 : t0 + T * static_cast<double>(i + 1) / static_cast<double>(samples);
        detail::scan_piece(state_at, a, b, per, opts, ftol, xtol, xtol, zeros);
    }
    detail::endpoint_zeros(zeros, t0, state_at(t0), t1, state_at(t1), opts, 1e-6 * std::max(1.0, T));
    return zeros;
}

}  // namespace osc3
