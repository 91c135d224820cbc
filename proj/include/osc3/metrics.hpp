#pragma once

// Oscillation measures of a solution: the zero count nu(y, T), the wandering length gamma(T)
// of x/|x| on the sphere, the lower bound gamma > (nu - 5) L / 2, finite-horizon rate
// estimates, and the C3 perturbation that splits multiple zeros.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "osc3/error.hpp"
#include "osc3/ode.hpp"
#include "osc3/quadrature.hpp"
#include "osc3/sphere.hpp"
#include "osc3/state.hpp"

namespace osc3 {

/// |d/dt (x/|x|)| = sqrt(|x'|^2 |x|^2 - (x, x')^2) / |x|^2, evaluated through the Lagrange
/// identity as |x cross x'| / |x|^2 so x' parallel to x gives exactly zero.
inline double wandering_integrand(const State3& x, const State3& xdot) {
    const double n2 = dot(x, x);
    if (!(n2 > 0.0)) throw PreconditionError("wandering_integrand: zero state");
    return norm(cross(x, xdot)) / n2;
}

/// Wandering speed of the trajectory at time t, with x' taken from the equation itself.
inline double wandering_speed(const Trajectory& traj, double t) {
    const State3 x = traj.eval_local(t);
    return wandering_integrand(x, traj.spec().derivative(t, x));
}

struct LengthResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

/// gamma over [t0, t1]: adaptive Gauss-Kronrod on every dense segment, the tolerance split
/// in proportion to segment length.
inline LengthResult wandering_length_detail(const Trajectory& traj, double t0, double t1, double tol) {
    if (!(t0 <= t1) || t0 < traj.t_begin() || t1 > traj.t_end())
        throw PreconditionError("wandering_length: interval outside the integrated horizon");
    if (!(tol > 0.0)) throw PreconditionError("wandering_length: tolerance must be positive");
    LengthResult out;
    if (t0 == t1) return out;
    const double span = t1 - t0;
    detail::CompensatedSum sum;
    for (const DenseSegment& seg : traj.segments()) {
        const double a = std::max(seg.t0, t0), b = std::min(seg.t1(), t1);
        if (!(b > a)) continue;
        auto f = [&](double t) {
            const State3 x = seg.eval_local(t);
            return wandering_integrand(x, traj.spec().derivative(t, x));
        };
        const quad::Result r = quad::integrate(f, a, b, tol * (b - a) / span, 0.0, 200);
        sum.add(r.value);
        out.error += r.error;
        out.converged = out.converged && r.converged;
    }
    out.value = sum.value();
    return out;
}

inline double wandering_length(const Trajectory& traj, double t0, double t1, double tol = 1e-10) {
    return wandering_length_detail(traj, t0, t1, tol).value;
}

struct Tolerances {
    double rtol = 0.0;
    double atol = 0.0;
    double quad_tol = 0.0;
};

struct OscillationReport {
    double horizon = 0.0;
    long nu = 0;
    std::vector<double> zeros;
    std::size_t nonsimple = 0;
    double gamma = 0.0;
    double gamma_error = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    double phi_drop = 0.0;
    std::vector<double> pole_events;
    Tolerances tolerances;
};

/// Assembles nu, gamma, the bound (nu - 5) L / 2 and its margin over the whole trajectory.
inline OscillationReport oscillation_report(const Trajectory& traj, const RegionConstant& L = region_constant(),
                                            double quad_tol = 1e-10, const ZeroOptions& zopts = {}) {
    OscillationReport rep;
    rep.horizon = traj.t_end() - traj.t_begin();
    const auto zeros = find_zeros(traj, zopts);
    rep.nu = static_cast<long>(zeros.size());
    for (const Zero& z : zeros) {
        rep.zeros.push_back(z.t);
        if (!z.simple) ++rep.nonsimple;
    }
    const LengthResult g = wandering_length_detail(traj, traj.t_begin(), traj.t_end(), quad_tol);
    rep.gamma = g.value;
    rep.gamma_error = g.error;
    rep.bound = 0.5 * (static_cast<double>(rep.nu) - 5.0) * L.value;
    rep.margin = rep.gamma - rep.bound;
    const SphericalTrack tr = make_track(traj);
    rep.phi_drop = tr.points.front().phi - tr.points.back().phi;
    rep.pole_events = tr.pole_events;
    rep.tolerances = {traj.options().rtol, traj.options().atol, quad_tol};
    return rep;
}

struct RateEstimate {
    std::vector<double> horizons;
    std::vector<double> mu_series;  // gamma / t
    std::vector<double> nu_series;  // pi nu / t
    double mu_hat = 0.0, mu_check = 0.0;
    double nu_hat = 0.0, nu_check = 0.0;
    double tail_fraction = 1.0;
};

/// Tail max/min of gamma/t and pi nu/t over the last ceil(tail_fraction * n) horizons.
inline RateEstimate rate_estimate(const std::function<Trajectory(double)>& factory, const std::vector<double>& horizons,
                                  double tail_fraction, double quad_tol = 1e-10) {
    if (horizons.size() < 3) throw PreconditionError("rate_estimate: need at least 3 horizons");
    for (std::size_t i = 0; i < horizons.size(); ++i)
        if (!(horizons[i] > 0.0) || (i > 0 && !(horizons[i] > horizons[i - 1])))
            throw PreconditionError("rate_estimate: horizons must be positive and increasing");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw PreconditionError("rate_estimate: tail_fraction must lie in (0, 1]");
    RateEstimate est;
    est.horizons = horizons;
    est.tail_fraction = tail_fraction;
    for (double h : horizons) {
        const Trajectory traj = factory(h);
        const double span = traj.t_end() - traj.t_begin();
        const double gamma = wandering_length(traj, traj.t_begin(), traj.t_end(), quad_tol);
        const double nu = static_cast<double>(find_zeros(traj).size());
        est.mu_series.push_back(gamma / span);
        est.nu_series.push_back(std::numbers::pi * nu / span);
    }
    const auto n = horizons.size();
    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n) - 1e-12)));
    const auto mu_b = est.mu_series.end() - static_cast<std::ptrdiff_t>(tail);
    const auto nu_b = est.nu_series.end() - static_cast<std::ptrdiff_t>(tail);
    est.mu_hat = *std::max_element(mu_b, est.mu_series.end());
    est.mu_check = *std::min_element(mu_b, est.mu_series.end());
    est.nu_hat = *std::max_element(nu_b, est.nu_series.end());
    est.nu_check = *std::min_element(nu_b, est.nu_series.end());
    return est;
}

// ---------------------------------------------------------------------------------------------
// Splitting multiple zeros

/// Piecewise polynomial Delta y: constant outside [t_1, t_m], septic transitions with matching
/// value and three vanishing derivatives at every t_i.
class Perturbation {
public:
    Perturbation() = default;
    Perturbation(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values)) {}

    /// Derivative of order 0..3 at t.
    double eval(double t, int order = 0) const {
        if (times_.empty()) return 0.0;
        if (t <= times_.front()) return order == 0 ? values_.front() : 0.0;
        if (t >= times_.back()) return order == 0 ? values_.back() : 0.0;
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
        const double h = times_[i + 1] - times_[i];
        const double s = (t - times_[i]) / h;
        const double dv = values_[i + 1] - values_[i];
        return order == 0 ? values_[i] + dv * step(s, 0) : dv * step(s, order) / std::pow(h, order);
    }

    double operator()(double t) const { return eval(t, 0); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

    /// S(s) = 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7 and its derivatives: S(0)=0, S(1)=1, S', S'', S''' vanish at both ends.
    static double step(double s, int order) {
        switch (order) {
            case 0: return s * s * s * s * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)));
            case 1: return s * s * s * (140.0 + s * (-420.0 + s * (420.0 - 140.0 * s)));
            case 2: return s * s * (420.0 + s * (-1680.0 + s * (2100.0 - 840.0 * s)));
            case 3: return s * (840.0 + s * (-5040.0 + s * (8400.0 - 4200.0 * s)));
            default: throw PreconditionError("Perturbation: derivative order must be 0..3");
        }
    }

private:
    std::vector<double> times_, values_;
};

/// Delta y with Delta y(t_i) = -sign y''(t_i) at the points where y = y' = 0.
inline Perturbation desingularize(const std::function<double(double)>& ddy, const std::vector<double>& times) {
    std::vector<double> values;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1]))
            throw PreconditionError("desingularize: degenerate times must be strictly increasing");
        const double d = ddy(times[i]);
        if (d == 0.0) throw PreconditionError("desingularize: y'' vanishes together with y and y'");
        values.push_back(d > 0.0 ? -1.0 : 1.0);
    }
    return Perturbation(times, std::move(values));
}

}  // namespace osc3
