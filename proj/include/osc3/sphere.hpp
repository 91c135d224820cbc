#pragma once

// Geometry of the unit sphere in phase space (y, y', y''): spherical coordinates with the
// pole on the y'' axis, the region Omega = {y y'' - y'^2 > 0} with halves Omega+ (y'' > 0) and
// Omega- (y'' < 0), the length of its boundary, tracks of projected solutions, the loop
// surgery that pushes a clockwise loop out of Omega, and the resulting length floor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "osc3/error.hpp"
#include "osc3/ode.hpp"
#include "osc3/quadrature.hpp"
#include "osc3/state.hpp"

namespace osc3 {

inline constexpr double pole_tolerance = 1e-10;      // relative, on sqrt(y^2 + y'^2) / |x|
inline constexpr double boundary_tolerance = 1e-12;  // relative, on q / |x|^2

struct SphericalPoint {
    double phi = 0.0;    // unwrapped azimuth
    double theta = 0.0;  // latitude in [-pi/2, pi/2]

    /// P(phi, theta) = (cos theta cos phi, cos theta sin phi, sin theta).
    State3 embed() const {
        const double ct = std::cos(theta);
        return {ct * std::cos(phi), ct * std::sin(phi), std::sin(theta)};
    }
};

inline bool near_pole(const State3& x) {
    return std::hypot(x.y, x.dy) < pole_tolerance * norm(x);
}

/// Azimuth lifted to the branch nearest `reference`.
inline double unwrap_near(double phi, double reference) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return phi + two_pi * std::round((reference - phi) / two_pi);
}

/// Spherical coordinates of x/|x|. Without `prev_phi` the azimuth is atan2(y', y) in (-pi, pi].
inline SphericalPoint to_spherical(const State3& x, std::optional<double> prev_phi = std::nullopt) {
    const double rho = std::hypot(x.y, x.dy);
    const double n = norm(x);
    if (!(n > 0.0)) throw PreconditionError("to_spherical: zero vector");
    if (rho < pole_tolerance * n) throw PoleError("azimuth undefined at a pole of the spherical system");
    double phi = std::atan2(x.dy, x.y);
    if (prev_phi) phi = unwrap_near(phi, *prev_phi);
    return {phi, std::atan2(x.ddy, rho)};
}

/// Angular speed of the azimuth along a solution: (y'' y - y'^2) / (y^2 + y'^2).
inline double phi_dot(const State3& x) {
    const double rho2 = x.y * x.y + x.dy * x.dy;
    if (std::sqrt(rho2) < pole_tolerance * norm(x)) throw PoleError("phi_dot undefined at a pole");
    return (x.ddy * x.y - x.dy * x.dy) / rho2;
}

/// Boundary latitude arctan(sin^2 phi / cos phi) of Omega at azimuth phi.
inline double theta0(double phi) {
    const double c = std::cos(phi);
    if (std::abs(c) <= 1e-15) throw DomainError("theta0 undefined where cos(phi) = 0");
    const double s = std::sin(phi);
    return std::atan(s * s / c);
}

/// theta0 on (-pi/2, pi/2) mod 2pi, pi/2 elsewhere: the upper boundary of the complement of Omega+.
inline double theta0_closed(double phi) {
    const double c = std::cos(phi);
    if (c <= 1e-15) return std::numbers::pi / 2;
    const double s = std::sin(phi);
    return std::atan2(s * s, c);
}

/// d theta0_closed / d phi where it is smooth (one-sided value 0 on the closed part).
inline double theta0_closed_derivative(double phi) {
    const double c = std::cos(phi);
    if (c <= 1e-15) return 0.0;
    const double s = std::sin(phi);
    return (2.0 * s * c * c + s * s * s) / (c * c + s * s * s * s);
}

/// Point of the boundary of Omega+ at azimuth phi in (-pi/2, pi/2); analytic through the pole.
inline State3 boundary_point(double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const State3 p{c * c, s * c, s * s};
    return p / std::sqrt(c * c + s * s * s * s);
}

enum class Region { omega_plus, omega_minus, boundary, outside };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::omega_plus: return "omega_plus";
        case Region::omega_minus: return "omega_minus";
        case Region::boundary: return "boundary";
        case Region::outside: return "outside";
    }
    return "?";
}

inline Region classify(const State3& x) {
    const double q = x.y * x.ddy - x.dy * x.dy;
    const double n2 = dot(x, x);
    if (std::abs(q) <= boundary_tolerance * n2) return Region::boundary;
    if (q < 0.0) return Region::outside;
    return x.ddy > 0.0 ? Region::omega_plus : Region::omega_minus;
}

inline bool in_omega(const State3& x) {
    const Region r = classify(x);
    return r == Region::omega_plus || r == Region::omega_minus;
}

/// Reflection across the plane y + y'' = 0.
inline State3 reflect_mirror(const State3& x) { return {-x.ddy, x.dy, -x.y}; }

/// Great-circle distance between two unit vectors.
inline double great_circle_distance(const State3& a, const State3& b) {
    return std::atan2(norm(cross(a, b)), dot(a, b));
}

/// Spherical linear interpolation between unit vectors a and b, s in [0, 1].
inline State3 slerp(const State3& a, const State3& b, double s) {
    const double omega = great_circle_distance(a, b);
    if (omega < 1e-12) return normalized(a + s * (b - a));
    const double so = std::sin(omega);
    return std::sin((1.0 - s) * omega) / so * a + std::sin(s * omega) / so * b;
}

// ---------------------------------------------------------------------------------------------
// The constant L_Omega

enum class LengthMethod { quadrature, polyline };

inline const char* method_name(LengthMethod m) { return m == LengthMethod::quadrature ? "quadrature" : "polyline"; }

struct RegionConstant {
    double value = 0.0;
    double error_estimate = 0.0;
    LengthMethod method = LengthMethod::quadrature;
    double resolution = 0.0;  // tolerance (quadrature) or segment count (polyline)
};

/// Arc-length density of the boundary of Omega+ in the variable alpha = 4 phi.
inline double boundary_integrand(double alpha) {
    const double c = std::cos(alpha);
    return std::sqrt(5.0 - c) / (7.0 + c);
}

namespace detail {

/// Neumaier-compensated sum.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
};

inline double polyline_length(std::size_t segments) {
    const double pi = std::numbers::pi;
    const State3 pole{0.0, 0.0, 1.0};
    CompensatedSum sum;
    State3 prev = pole;
    for (std::size_t k = 1; k <= segments; ++k) {
        const State3 p = k == segments ? pole : boundary_point(-pi / 2 + pi * static_cast<double>(k) / segments);
        sum.add(great_circle_distance(prev, p));
        prev = p;
    }
    return sum.value();
}

}  // namespace detail

/// Length of the boundary of Omega+. `resolution` is the absolute tolerance for the
/// quadrature method and the (even, >= 4) segment count for the polyline method, which
/// reports the Richardson extrapolation of the n and n/2 chord sums.
inline RegionConstant boundary_length(LengthMethod method, double resolution) {
    RegionConstant rc;
    rc.method = method;
    rc.resolution = resolution;
    if (method == LengthMethod::quadrature) {
        if (!(resolution > 0.0)) throw PreconditionError("boundary_length: tolerance must be positive");
        const quad::Result r = quad::integrate(boundary_integrand, 0.0, std::numbers::pi, resolution / 4.0);
        rc.value = 4.0 * r.value;
        rc.error_estimate = 4.0 * r.error + 16.0 * std::numeric_limits<double>::epsilon() * rc.value;
        return rc;
    }
    if (!(resolution >= 4.0) || std::floor(resolution) != resolution || std::fmod(resolution, 2.0) != 0.0)
        throw PreconditionError("boundary_length: polyline needs an even segment count >= 4");
    const auto n = static_cast<std::size_t>(resolution);
    const double fine = detail::polyline_length(n);
    const double coarse = detail::polyline_length(n / 2);
    rc.value = (4.0 * fine - coarse) / 3.0;
    rc.error_estimate = std::abs(fine - coarse) / 3.0 +
                        4.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * fine;
    return rc;
}

/// L_Omega by adaptive quadrature at tolerance 1e-14, computed once.
inline const RegionConstant& region_constant() {
    static const RegionConstant rc = boundary_length(LengthMethod::quadrature, 1e-14);
    return rc;
}

/// N L_Omega - |theta_end - theta_start|: the length floor for a curve outside Omega making
/// N clockwise turns between azimuths congruent to pi/2.
inline double loop_length_floor(int n, double theta_start, double theta_end) {
    if (n < 1) throw PreconditionError("loop_length_floor: N must be >= 1");
    return n * region_constant().value - std::abs(theta_end - theta_start);
}

// ---------------------------------------------------------------------------------------------
// Tracks

struct SphericalTrack {
    std::vector<double> t;
    std::vector<SphericalPoint> points;
    std::vector<double> pole_events;

    std::size_t size() const { return t.size(); }
    void push(double time, SphericalPoint p) {
        t.push_back(time);
        points.push_back(p);
    }
};

/// Track from a point sequence on the sphere, times index-uniform on [t0, t1].
inline SphericalTrack track_from_points(const std::vector<SphericalPoint>& pts, double t0, double t1) {
    SphericalTrack tr;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        tr.push(i + 1 == n ? t1 : t0 + (t1 - t0) * s, pts[i]);
    }
    return tr;
}

/// Sum of great-circle distances between consecutive samples restricted to [t0, t1]; partial
/// end intervals are interpolated along the connecting arc.
inline double track_length(const SphericalTrack& tr, double t0, double t1) {
    if (tr.size() == 0) throw PreconditionError("track_length: empty track");
    if (!(t0 <= t1) || t0 < tr.t.front() || t1 > tr.t.back())
        throw PreconditionError("track_length: interval outside the track range");
    detail::CompensatedSum sum;
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
        const double a = tr.t[k], b = tr.t[k + 1];
        if (b <= t0 || a >= t1 || b <= a) continue;
        const State3 p = tr.points[k].embed(), q = tr.points[k + 1].embed();
        const double lo = std::max(a, t0), hi = std::min(b, t1);
        const State3 pp = lo == a ? p : slerp(p, q, (lo - a) / (b - a));
        const State3 qq = hi == b ? q : slerp(p, q, (hi - a) / (b - a));
        sum.add(great_circle_distance(pp, qq));
    }
    return sum.value();
}

inline double track_length(const SphericalTrack& tr) { return track_length(tr, tr.t.front(), tr.t.back()); }

/// Projects a trajectory onto the sphere at every step node plus `per_segment - 1` interior
/// points per step. Samples within the pole band keep the previous azimuth and are listed
/// in `pole_events`.
inline SphericalTrack make_track(const Trajectory& traj, int per_segment = 4) {
    SphericalTrack tr;
    std::optional<double> prev;
    auto add = [&](double t, const State3& x) {
        if (near_pole(x)) {
            tr.pole_events.push_back(t);
            const double phi = prev.value_or(0.0);
            tr.push(t, {phi, x.ddy > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2});
            return;
        }
        const SphericalPoint p = to_spherical(x, prev);
        prev = p.phi;
        tr.push(t, p);
    };
    const auto segs = traj.segments();
    for (std::size_t k = 0; k < segs.size(); ++k) {
        add(traj.time(k), traj.local_state(k));
        for (int j = 1; j < per_segment; ++j) {
            const double t = segs[k].t0 + segs[k].h * j / per_segment;
            add(t, segs[k].eval_local(t));
        }
    }
    add(traj.t_end(), traj.local_state(traj.size() - 1));
    return tr;
}

// ---------------------------------------------------------------------------------------------
// Loop surgery

struct SurgeryResult {
    SphericalTrack track;
    /// Bound on the length added by discretization: twice the clamping distances plus the
    /// meridian connectors inserted where one-sided envelope limits disagree.
    double slack = 0.0;
    /// Sum of cubed chord lengths of the output; bounds the chord shortfall against any
    /// smooth curve outside Omega through the same vertices.
    double grid_slack = 0.0;
};

namespace detail {

struct Arc {
    State3 p, q;  // unit endpoints
    double lo, hi;  // azimuth range (unwrapped)
    // Latitudes at lo and hi when known, returned exactly at the ends.
    double theta_lo = std::numeric_limits<double>::quiet_NaN();
    double theta_hi = std::numeric_limits<double>::quiet_NaN();
};

/// Latitude where the great-circle arc p->q crosses azimuth a (a within the arc's range).
inline double arc_theta(const Arc& arc, double a) {
    if (a == arc.lo && !std::isnan(arc.theta_lo)) return arc.theta_lo;
    if (a == arc.hi && !std::isnan(arc.theta_hi)) return arc.theta_hi;
    const double omega = great_circle_distance(arc.p, arc.q);
    const State3 w0 = arc.q - dot(arc.p, arc.q) * arc.p;
    const double wn = norm(w0);
    if (omega < 1e-15 || wn == 0.0) return std::atan2(arc.p.ddy, std::hypot(arc.p.y, arc.p.dy));
    const State3 w = w0 / wn;
    const double ca = std::cos(a), sa = std::sin(a);
    // r(u) = p cos u + w sin u; require r_y cos a - r_x sin a = 0.
    const double A = arc.p.dy * ca - arc.p.y * sa;
    const double B = w.dy * ca - w.y * sa;
    // Solutions are u and u + pi; take the one nearest [0, omega].
    double u = std::atan2(-A, B);
    if (u < 0.0) u += std::numbers::pi;
    if (u > omega && std::numbers::pi - u < u - omega) u -= std::numbers::pi;
    u = std::clamp(u, 0.0, omega);
    const State3 r = std::cos(u) * arc.p + std::sin(u) * w;
    return std::atan2(r.ddy, std::hypot(r.y, r.dy));
}

/// Lower envelope of the arcs over azimuths [lo, hi] where the boundary of Omega+ lies above,
/// listed from hi down to lo with vertices at every grid azimuth and arc crossing. Points
/// above the boundary are clamped onto it.
inline std::vector<SphericalPoint> lower_envelope(const std::vector<Arc>& arcs, std::vector<double> grid,
                                                  double& slack) {
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t m = grid.size();
    std::vector<std::vector<std::size_t>> active(m > 0 ? m - 1 : 0);
    for (std::size_t j = 0; j < arcs.size(); ++j) {
        if (!(arcs[j].hi > arcs[j].lo)) continue;
        auto first = std::lower_bound(grid.begin(), grid.end(), arcs[j].lo);
        auto last = std::lower_bound(grid.begin(), grid.end(), arcs[j].hi);
        for (auto it = first; it < last && it + 1 < grid.end(); ++it) active[it - grid.begin()].push_back(j);
    }

    auto clamp_point = [&](double a, double theta) {
        if (std::cos(a) > 1e-12) {
            const double b = theta0(a);
            if (theta > b) {
                slack += 2.0 * (theta - b);
                theta = b;
            }
        }
        return SphericalPoint{a, theta};
    };

    std::vector<SphericalPoint> out;
    auto emit = [&](SphericalPoint p) {
        if (!out.empty() && out.back().phi == p.phi && out.back().theta == p.theta) return;
        if (!out.empty() && out.back().phi == p.phi) slack += std::abs(out.back().theta - p.theta);
        out.push_back(p);
    };

    for (std::size_t ii = m - 1; ii-- > 0;) {
        const double a0 = grid[ii], a1 = grid[ii + 1];
        const auto& act = active[ii];
        if (act.empty()) throw PreconditionError("surger: track leaves a gap in azimuth");
        // Breakpoints: interval ends and pairwise crossings.
        std::vector<double> bp{a0, a1};
        for (std::size_t x = 0; x < act.size(); ++x) {
            for (std::size_t y = x + 1; y < act.size(); ++y) {
                auto diff = [&](double a) { return arc_theta(arcs[act[x]], a) - arc_theta(arcs[act[y]], a); };
                const double d0 = diff(a0), d1 = diff(a1);
                if (d0 * d1 < 0.0) bp.push_back(brent_root(diff, a0, a1, d0, d1, 1e-15 * (1.0 + std::abs(a1)),
                                                                std::numeric_limits<double>::infinity()));
            }
        }
        std::sort(bp.begin(), bp.end(), std::greater<>());
        bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
        for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
            const double hi = bp[k], lo = bp[k + 1];
            const double mid = 0.5 * (hi + lo);
            std::size_t best = act.front();
            double best_theta = std::numeric_limits<double>::infinity();
            for (std::size_t j : act) {
                const double th = arc_theta(arcs[j], mid);
                if (th < best_theta) {
                    best_theta = th;
                    best = j;
                }
            }
            emit(clamp_point(hi, arc_theta(arcs[best], hi)));
            // Interior samples where the chosen arc bulges into Omega+.
            constexpr int probes = 8;
            for (int s = 1; s < probes; ++s) {
                const double a = hi + (lo - hi) * s / probes;
                const double th = arc_theta(arcs[best], a);
                if (std::cos(a) > 1e-12 && th > theta0(a)) emit(clamp_point(a, th));
            }
            emit(clamp_point(lo, arc_theta(arcs[best], lo)));
        }
    }
    return out;
}

}  // namespace detail

/// Replaces a clockwise loop (phi(t1) = phi(t0) - 2 pi, phi(t0) = pi/2 mod 2pi, no pole
/// passage) by its envelope outside Omega: lowest admissible point per azimuth on the half
/// turn over Omega+, highest on the half turn under Omega-. The sampled track is read as a
/// chain of great-circle arcs; the output keeps the endpoints exactly and is a sub-chain of
/// those arcs up to the reported slack.
inline SurgeryResult surger(const SphericalTrack& track) {
    const double pi = std::numbers::pi;
    const std::size_t n = track.size();
    if (n < 3) throw PreconditionError("surger: need at least 3 samples");
    if (!track.pole_events.empty()) throw PreconditionError("surger: track passes through a pole");
    const double phi_start = track.points.front().phi;
    const double phi_end = track.points.back().phi;
    const double tol = 1e-9;
    if (std::abs(std::remainder(phi_start - pi / 2, 2 * pi)) > tol)
        throw PreconditionError("surger: loop must start at azimuth pi/2 mod 2pi");
    if (std::abs(phi_end - (phi_start - 2 * pi)) > tol)
        throw PreconditionError("surger: loop must end one clockwise turn after the start");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = track.points[i];
        if (p.phi > phi_start + tol || p.phi < phi_end - tol)
            throw PreconditionError("surger: track leaves the azimuth range of its loop");
        if (std::abs(p.theta) >= pi / 2 - 1e-12) throw PreconditionError("surger: track passes through a pole");
        if (i > 0 && std::abs(p.phi - track.points[i - 1].phi) >= pi)
            throw PreconditionError("surger: azimuth jump of pi or more between samples");
    }
    const double phi_half = phi_start - pi;
    std::size_t crossings = 0, cross_k = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double d0 = track.points[k].phi - phi_half, d1 = track.points[k + 1].phi - phi_half;
        if ((d0 > 0.0 && d1 <= 0.0) || (d0 <= 0.0 && d1 > 0.0)) {
            ++crossings;
            cross_k = k;
        }
    }
    if (crossings != 1) throw PreconditionError("surger: loop must cross azimuth phi(t0) - pi exactly once");

    std::vector<State3> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = track.points[i].embed();
    // Split the crossing arc at the half-turn meridian.
    detail::Arc cross_arc{u[cross_k], u[cross_k + 1],
                          std::min(track.points[cross_k].phi, track.points[cross_k + 1].phi),
                          std::max(track.points[cross_k].phi, track.points[cross_k + 1].phi)};
    const double theta_half = detail::arc_theta(cross_arc, phi_half);
    const SphericalPoint half_point{phi_half, theta_half};

    // Central symmetry (phi, theta) -> (phi + pi, -theta) maps Omega- onto Omega+ and the second
    // half turn onto the first, keeping orientation.
    auto build_half = [&](bool second, std::vector<detail::Arc>& arcs, std::vector<double>& grid) {
        auto map = [&](SphericalPoint p) { return second ? SphericalPoint{p.phi + pi, -p.theta} : p; };
        std::vector<SphericalPoint> pts;
        if (!second) {
            for (std::size_t i = 0; i <= cross_k; ++i) pts.push_back(track.points[i]);
            pts.push_back(half_point);
        } else {
            pts.push_back(half_point);
            for (std::size_t i = cross_k + 1; i < n; ++i) pts.push_back(track.points[i]);
        }
        for (auto& p : pts) p = map(p);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const SphericalPoint& a = pts[i].phi < pts[i + 1].phi ? pts[i] : pts[i + 1];
            const SphericalPoint& b = pts[i].phi < pts[i + 1].phi ? pts[i + 1] : pts[i];
            arcs.push_back({pts[i].embed(), pts[i + 1].embed(), a.phi, b.phi, a.theta, b.theta});
        }
        for (const auto& p : pts) grid.push_back(p.phi);
    };

    SurgeryResult res;
    std::vector<SphericalPoint> out;
    for (int half = 0; half < 2; ++half) {
        std::vector<detail::Arc> arcs;
        std::vector<double> grid;
        build_half(half == 1, arcs, grid);
        std::vector<SphericalPoint> env = detail::lower_envelope(arcs, grid, res.slack);
        if (half == 1)
            for (auto& p : env) p = {p.phi - pi, -p.theta};
        if (half == 1) {
            res.slack += std::abs(out.back().theta - env.front().theta);
            env.erase(env.begin());
        }
        out.insert(out.end(), env.begin(), env.end());
    }
    res.slack += std::abs(out.front().theta - track.points.front().theta) +
                 std::abs(out.back().theta - track.points.back().theta);
    out.front() = track.points.front();
    out.back() = track.points.back();
    res.track = track_from_points(out, track.t.front(), track.t.back());
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
        const double l = great_circle_distance(out[i].embed(), out[i + 1].embed());
        res.grid_slack += l * l * l;
    }
    return res;
}

}  // namespace osc3
