#pragma once

// Piecewise Hermite interpolants: cubic on arbitrary increasing nodes (with an optional
// Fritsch-Carlson monotonicity limiter) and quintic on a uniform periodic grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "osc3/error.hpp"

namespace osc3 {

class CubicHermite {
public:
    CubicHermite() = default;

    CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> dy)
        : x_(std::move(x)), y_(std::move(y)), dy_(std::move(dy)) {
        if (x_.size() < 2 || y_.size() != x_.size() || dy_.size() != x_.size())
            throw PreconditionError("CubicHermite: need >= 2 nodes with matching values and slopes");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1])) throw PreconditionError("CubicHermite: nodes must be strictly increasing");
    }

    /// Limits slopes so each piece is monotone wherever the data are (Fritsch-Carlson).
    /// Returns the number of slopes changed.
    std::size_t make_monotone() {
        std::size_t changed = 0;
        for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
            const double secant = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
            if (secant == 0.0) {
                if (dy_[i] != 0.0 || dy_[i + 1] != 0.0) ++changed;
                dy_[i] = dy_[i + 1] = 0.0;
                continue;
            }
            double a = dy_[i] / secant;
            double b = dy_[i + 1] / secant;
            if (a < 0.0) { dy_[i] = 0.0; a = 0.0; ++changed; }
            if (b < 0.0) { dy_[i + 1] = 0.0; b = 0.0; ++changed; }
            const double r2 = a * a + b * b;
            if (r2 > 9.0) {
                const double tau = 3.0 / std::sqrt(r2);
                dy_[i] = tau * a * secant;
                dy_[i + 1] = tau * b * secant;
                ++changed;
            }
        }
        return changed;
    }

    double operator()(double x) const { return eval(x, 0); }
    double derivative(double x) const { return eval(x, 1); }

    /// Evaluates the interpolant (order 0) or its first derivative (order 1). Points at most
    /// 1e-9 of the span outside the nodes use the end piece; farther points throw DomainError.
    double eval(double x, int order) const {
        const std::size_t i = locate(x);
        const double h = x_[i + 1] - x_[i];
        const double s = (x - x_[i]) / h;
        const double p0 = y_[i], p1 = y_[i + 1];
        const double d0 = dy_[i] * h, d1 = dy_[i + 1] * h;
        const double c2 = 3.0 * (p1 - p0) - 2.0 * d0 - d1;
        const double c3 = 2.0 * (p0 - p1) + d0 + d1;
        if (order == 0) return p0 + s * (d0 + s * (c2 + s * c3));
        return (d0 + s * (2.0 * c2 + s * 3.0 * c3)) / h;
    }

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    std::span<const double> nodes() const { return x_; }
    std::span<const double> values() const { return y_; }
    std::span<const double> slopes() const { return dy_; }

private:
    std::size_t locate(double x) const {
        const double slack = 1e-9 * (x_.back() - x_.front());
        if (!(x >= x_.front() - slack && x <= x_.back() + slack))
            throw DomainError("interpolation table queried outside [" + std::to_string(x_.front()) + ", " +
                              std::to_string(x_.back()) + "] at " + std::to_string(x));
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        return std::min(i, x_.size() - 2);
    }

    std::vector<double> x_, y_, dy_;
};

/// C2 quintic Hermite interpolant of a periodic function sampled on a uniform grid
/// x_k = origin + k*period/N, k = 0..N-1, from values and first two derivatives.
class PeriodicQuinticHermite {
public:
    PeriodicQuinticHermite() = default;

    PeriodicQuinticHermite(double origin, double period, std::span<const double> f, std::span<const double> df,
                           std::span<const double> d2f)
        : origin_(origin), period_(period), n_(f.size()) {
        if (n_ < 2 || df.size() != n_ || d2f.size() != n_ || !(period > 0.0))
            throw PreconditionError("PeriodicQuinticHermite: inconsistent samples");
        h_ = period_ / static_cast<double>(n_);
        coeffs_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j = (i + 1) % n_;
            const double p0 = f[i], p1 = f[j];
            const double d0 = df[i] * h_, d1 = df[j] * h_;
            const double q0 = d2f[i] * h_ * h_, q1 = d2f[j] * h_ * h_;
            const double dp = p1 - p0;
            coeffs_[i] = {p0,
                          d0,
                          0.5 * q0,
                          10.0 * dp - 6.0 * d0 - 4.0 * d1 - 0.5 * (3.0 * q0 - q1),
                          -15.0 * dp + 8.0 * d0 + 7.0 * d1 + 0.5 * (3.0 * q0 - 2.0 * q1),
                          6.0 * dp - 3.0 * d0 - 3.0 * d1 - 0.5 * (q0 - q1)};
        }
    }

    double operator()(double x) const { return eval(x, 0); }

    /// Derivative of order 0, 1 or 2 at x (any real x; wrapped into the period).
    double eval(double x, int order) const {
        double u = (x - origin_) / h_;
        const double nd = static_cast<double>(n_);
        u = std::fmod(u, nd);
        if (u < 0.0) u += nd;
        std::size_t i = static_cast<std::size_t>(u);
        if (i >= n_) i = n_ - 1;
        const double s = u - static_cast<double>(i);
        const auto& c = coeffs_[i];
        switch (order) {
            case 0: return c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
            case 1: return (c[1] + s * (2 * c[2] + s * (3 * c[3] + s * (4 * c[4] + s * 5 * c[5])))) / h_;
            default: return (2 * c[2] + s * (6 * c[3] + s * (12 * c[4] + s * 20 * c[5]))) / (h_ * h_);
        }
    }

    std::size_t size() const { return n_; }
    double spacing() const { return h_; }
    double origin() const { return origin_; }
    double period() const { return period_; }
    double node(std::size_t k) const { return origin_ + static_cast<double>(k) * h_; }

private:
    double origin_ = 0.0, period_ = 1.0, h_ = 1.0;
    std::size_t n_ = 0;
    std::vector<std::array<double, 6>> coeffs_;
};

}  // namespace osc3
