#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace osc3::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;   // |K15 - G7| summed over the final partition
    std::size_t evaluations = 0;
    bool converged = false;
};

namespace detail {

// Kronrod abscissae on [0,1); odd indices coincide with the Gauss nodes.
inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace detail

/// One 15-point Kronrod rule on [a,b] with the embedded 7-point Gauss estimate.
template <class F>
Result gauss_kronrod15(F&& f, double a, double b) {
    using namespace detail;
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * wgk[7];
    double gauss = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xgk[j];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += wgk[j] * sum;
        if (j % 2 == 1) gauss += wg[j / 2] * sum;
    }
    Result r;
    r.value = kronrod * half;
    r.error = std::abs((kronrod - gauss) * half);
    r.evaluations = 15;
    r.converged = true;
    return r;
}

/// Integrates f over [a,b] until the summed error estimate is below max(abs_tol, rel_tol*|I|),
/// bisecting the worst segment each round.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                 std::size_t max_segments = 20000) {
    Result total;
    if (a == b) {
        total.converged = true;
        return total;
    }
    std::priority_queue<detail::Segment> heap;
    const Result first = gauss_kronrod15(f, a, b);
    heap.push({a, b, first.value, first.error});
    total.value = first.value;
    total.error = first.error;
    total.evaluations = first.evaluations;
    while (total.error > std::max(abs_tol, rel_tol * std::abs(total.value))) {
        if (heap.size() >= max_segments) break;
        const detail::Segment worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;  // no representable split left
        heap.pop();
        const Result left = gauss_kronrod15(f, worst.a, mid);
        const Result right = gauss_kronrod15(f, mid, worst.b);
        total.evaluations += left.evaluations + right.evaluations;
        heap.push({worst.a, mid, left.value, left.error});
        heap.push({mid, worst.b, right.value, right.error});
        total.value += left.value + right.value - worst.value;
        total.error += left.error + right.error - worst.error;
    }
    // Resum to remove incremental drift.
    double value = 0.0, error = 0.0;
    auto copy = heap;
    while (!copy.empty()) {
        value += copy.top().value;
        error += copy.top().error;
        copy.pop();
    }
    total.value = value;
    total.error = error;
    total.converged = total.error <= std::max(abs_tol, rel_tol * std::abs(total.value));
    return total;
}

}  // namespace osc3::quad
