#pragma once

#include <cmath>

namespace osc3 {

/// Phase point (y, y', y'') of a third-order equation, also used as a plain 3-vector.
struct State3 {
    double y = 0.0;
    double dy = 0.0;
    double ddy = 0.0;

    double& operator[](int i) { return i == 0 ? y : (i == 1 ? dy : ddy); }
    double operator[](int i) const { return i == 0 ? y : (i == 1 ? dy : ddy); }

    State3& operator+=(const State3& o) {
        y += o.y;
        dy += o.dy;
        ddy += o.ddy;
        return *this;
    }
    State3& operator-=(const State3& o) {
        y -= o.y;
        dy -= o.dy;
        ddy -= o.ddy;
        return *this;
    }
    State3& operator*=(double s) {
        y *= s;
        dy *= s;
        ddy *= s;
        return *this;
    }

    friend State3 operator+(State3 a, const State3& b) { return a += b; }
    friend State3 operator-(State3 a, const State3& b) { return a -= b; }
    friend State3 operator*(double s, State3 a) { return a *= s; }
    friend State3 operator*(State3 a, double s) { return a *= s; }
    friend State3 operator/(State3 a, double s) { return a *= 1.0 / s; }
    friend State3 operator-(State3 a) { return a *= -1.0; }
    friend bool operator==(const State3&, const State3&) = default;
};

inline double dot(const State3& a, const State3& b) { return a.y * b.y + a.dy * b.dy + a.ddy * b.ddy; }

inline State3 cross(const State3& a, const State3& b) {
    return {a.dy * b.ddy - a.ddy * b.dy, a.ddy * b.y - a.y * b.ddy, a.y * b.dy - a.dy * b.y};
}

inline double norm(const State3& a) { return std::hypot(a.y, a.dy, a.ddy); }

inline State3 normalized(const State3& a) { return a / norm(a); }

inline State3 ldexp(const State3& a, int e) { return {std::ldexp(a.y, e), std::ldexp(a.dy, e), std::ldexp(a.ddy, e)}; }

inline double max_abs_diff(const State3& a, const State3& b) {
    return std::fmax(std::fabs(a.y - b.y), std::fmax(std::fabs(a.dy - b.dy), std::fabs(a.ddy - b.ddy)));
}

}  // namespace osc3
