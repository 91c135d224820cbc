#pragma once

// The four front-end commands. Each returns a structured report (config echo, results, checks,
// status), a human-readable summary, and for sweeps the per-item CSV.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "osc3/error.hpp"
#include "osc3/extremal.hpp"
#include "osc3/metrics.hpp"
#include "osc3/ode.hpp"
#include "osc3/report.hpp"
#include "osc3/sphere.hpp"

namespace osc3 {

struct CommandResult {
    Json report;
    std::string text;
    std::string csv;
    bool ok = false;
};

namespace detail {

inline Json tolerances_json(const Tolerances& t) {
    return Json{{"rtol", t.rtol}, {"atol", t.atol}, {"quad_tol", t.quad_tol}};
}

inline Json envelope(const char* command, Json config) {
    Json j;
    j["schema"] = report_schema;
    j["command"] = command;
    j["config"] = std::move(config);
    return j;
}

inline void finish(CommandResult& r, Json result, Json checks) {
    bool ok = true;
    for (auto it = checks.begin(); it != checks.end(); ++it) ok = ok && it.value().get<bool>();
    r.report["result"] = std::move(result);
    r.report["checks"] = std::move(checks);
    r.report["status"] = ok ? "ok" : "fail";
    r.ok = ok;
}

inline std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// constant

struct ConstantConfig {
    std::string method = "both";  // quadrature | polyline | both
    double tol = 1e-10;
    double segments = 1e6;
};

inline CommandResult cmd_constant(const ConstantConfig& cfg) {
    if (cfg.method != "both" && cfg.method != "quadrature" && cfg.method != "polyline")
        throw PreconditionError("constant: method must be quadrature, polyline or both");
    CommandResult r;
    r.report = detail::envelope("constant", Json{{"method", cfg.method}, {"tol", cfg.tol}, {"segments", cfg.segments}});
    const RegionConstant& ref = region_constant();
    Json result, checks;
    std::ostringstream text;
    std::vector<RegionConstant> runs;
    if (cfg.method != "polyline") runs.push_back(boundary_length(LengthMethod::quadrature, cfg.tol));
    if (cfg.method != "quadrature") runs.push_back(boundary_length(LengthMethod::polyline, cfg.segments));
    for (const RegionConstant& rc : runs) {
        result[method_name(rc.method)] = Json{{"value", rc.value},
                                              {"error_estimate", rc.error_estimate},
                                              {"resolution", rc.resolution},
                                              {"over_2pi", rc.value / (2.0 * std::numbers::pi)}};
        text << detail::fmt("%-10s L = %.15f  (error estimate %.3g, %s %.3g)\n", method_name(rc.method), rc.value,
                            rc.error_estimate, rc.method == LengthMethod::quadrature ? "tol" : "segments",
                            rc.resolution);
    }
    if (runs.size() == 2) {
        const double diff = std::abs(runs[0].value - runs[1].value);
        const double combined = runs[0].error_estimate + runs[1].error_estimate;
        result["difference"] = diff;
        result["combined_error"] = combined;
        checks["methods_agree"] = diff <= combined;
        text << detail::fmt("difference %.3g, combined error %.3g\n", diff, combined);
    } else {
        // A single method is checked against the reference value.
        const double diff = std::abs(runs[0].value - ref.value);
        result["reference"] = ref.value;
        result["difference"] = diff;
        checks["within_estimate"] = diff <= runs[0].error_estimate + ref.error_estimate;
        text << detail::fmt("difference from reference %.3g\n", diff);
    }
    result["value"] = runs[0].value;
    result["over_2pi"] = runs[0].value / (2.0 * std::numbers::pi);
    text << detail::fmt("L / (2 pi) = %.15f\n", runs[0].value / (2.0 * std::numbers::pi));
    detail::finish(r, std::move(result), std::move(checks));
    r.text = text.str();
    return r;
}

// ---------------------------------------------------------------------------------------------
// analyze

struct AnalyzeConfig {
    std::string a = "0", b = "0", c = "0";
    State3 init{1.0, 0.0, 0.0};
    double t0 = 0.0;
    double horizon = 10.0;
    double rtol = 1e-9, atol = 1e-12;
    double quad_tol = 1e-10;
};

inline Json config_json(const AnalyzeConfig& c) {
    return Json{{"a", c.a},         {"b", c.b},       {"c", c.c},       {"init", {c.init.y, c.init.dy, c.init.ddy}},
                {"t0", c.t0},       {"horizon", c.horizon}, {"rtol", c.rtol}, {"atol", c.atol},
                {"quad_tol", c.quad_tol}};
}

inline OscillationReport analyze(const CoefficientSpec& spec, const AnalyzeConfig& c) {
    IntegratorOptions opts;
    opts.rtol = c.rtol;
    opts.atol = c.atol;
    const Trajectory traj = integrate(spec, c.init, c.t0, c.t0 + c.horizon, opts);
    return oscillation_report(traj, region_constant(), c.quad_tol);
}

inline Json report_json(const OscillationReport& rep) {
    return Json{{"horizon", rep.horizon},
                {"nu", rep.nu},
                {"nonsimple_zeros", rep.nonsimple},
                {"zeros", rep.zeros},
                {"gamma", rep.gamma},
                {"gamma_error", rep.gamma_error},
                {"L", region_constant().value},
                {"bound", rep.bound},
                {"margin", rep.margin},
                {"phi_drop", rep.phi_drop},
                {"pole_events", rep.pole_events},
                {"tolerances", detail::tolerances_json(rep.tolerances)}};
}

inline CommandResult cmd_analyze(const AnalyzeConfig& cfg) {
    if (!(cfg.horizon > 0.0)) throw PreconditionError("analyze: horizon must be positive");
    CommandResult r;
    r.report = detail::envelope("analyze", config_json(cfg));
    const CoefficientSpec spec = CoefficientSpec::parse(cfg.a, cfg.b, cfg.c);
    const OscillationReport rep = analyze(spec, cfg);
    detail::finish(r, report_json(rep), Json{{"margin_positive", rep.margin > 0.0}});
    r.text = detail::fmt("nu = %ld (%zu non-simple)\ngamma = %.12g (+- %.2g)\nbound (nu - 5) L / 2 = %.12g\nmargin = %.12g\n",
                         rep.nu, rep.nonsimple, rep.gamma, rep.gamma_error, rep.bound, rep.margin);
    return r;
}

// ---------------------------------------------------------------------------------------------
// extremal

struct ExtremalConfig {
    double delta = 0.1;
    int periods = 10;
    double grid_factor = 8.0;
    int refine = 1;
    double rtol = 1e-11, atol = 1e-13;
    double anchor_window = 8.0;
    double anchor_target = 1e-5;
    double track_tolerance = 1e-3;
    bool free_run = true;
    bool self_check = false;
    std::string model_out;  // CSV of the synthesised coefficient tables, if set
};

inline void write_model_csv(const ExtremalModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << "t,phi0,theta0,a,b,c\n";
    const auto t = m.coeffs.A.nodes();
    const auto A = m.coeffs.A.values(), B = m.coeffs.B.values(), C = m.coeffs.C.values();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double p = m.time.phi_nodes[i];
        out << format_double(t[i]) << ',' << format_double(p) << ',' << format_double(m.F(p)) << ','
            << format_double(-C[i]) << ',' << format_double(-B[i]) << ',' << format_double(-A[i]) << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

inline CommandResult cmd_extremal(const ExtremalConfig& cfg) {
    if (cfg.periods < 3) throw PreconditionError("extremal: need at least 3 periods");
    CommandResult r;
    r.report = detail::envelope("extremal", Json{{"delta", cfg.delta},
                                                 {"periods", cfg.periods},
                                                 {"grid_factor", cfg.grid_factor},
                                                 {"refine", cfg.refine},
                                                 {"rtol", cfg.rtol},
                                                 {"atol", cfg.atol},
                                                 {"anchor_window", cfg.anchor_window},
                                                 {"anchor_target", cfg.anchor_target},
                                                 {"track_tolerance", cfg.track_tolerance},
                                                 {"free_run", cfg.free_run},
                                                 {"self_check", cfg.self_check}});
    ExtremalOptions opts;
    opts.curve.grid_factor = cfg.grid_factor;
    opts.refine = cfg.refine;
    opts.integrator.rtol = cfg.rtol;
    opts.integrator.atol = cfg.atol;
    opts.anchor_window = cfg.anchor_window;
    opts.anchor_target = cfg.anchor_target;
    opts.track_tolerance = cfg.track_tolerance;
    opts.free_run = cfg.free_run;
    opts.self_check = cfg.self_check;
    opts.strict = false;
    const ExtremalModel model = build_model(cfg.delta, cfg.periods, opts.curve, opts.refine);
    if (!cfg.model_out.empty()) write_model_csv(model, cfg.model_out);
    const ExtremalReport e = run_extremal_experiment(model, opts);

    Json result{{"period", e.period},
                {"horizon", e.horizon},
                {"nu", e.nu},
                {"nu_expected", e.nu_expected},
                {"gamma", e.gamma},
                {"gamma_first_period", e.gamma_first_period},
                {"mu_est", e.mu_est},
                {"nu_est", e.nu_est},
                {"ratio", e.ratio},
                {"floor", e.floor},
                {"upper", e.upper},
                {"curve", {{"length", e.curve_length},
                           {"w11", e.w11},
                           {"w11_limit", e.w11_limit},
                           {"max_F", e.max_F},
                           {"max_F_limit", e.max_F_limit},
                           {"periodicity_error", e.periodicity_error}}},
                {"track", {{"max_phi_deviation", e.max_phi_deviation},
                           {"max_theta_deviation", e.max_theta_deviation},
                           {"deviation_time", e.deviation_time},
                           {"tolerance", cfg.track_tolerance},
                           {"windows", e.windows},
                           {"rejected_windows", e.rejected_windows},
                           {"max_anchor_jump", e.max_anchor_jump},
                           {"total_anchor_jump", e.total_anchor_jump},
                           {"omega_samples", e.omega_samples}}},
                {"steps", e.steps},
                {"tolerances", detail::tolerances_json(e.tolerances)}};
    result["free_run_divergence"] = e.free_run_divergence ? Json(*e.free_run_divergence) : Json(nullptr);
    result["self_check_ratio"] = e.self_check_ratio ? Json(*e.self_check_ratio) : Json(nullptr);
    result["failures"] = e.failures;
    Json checks{{"nu_equals_2K", e.nu == e.nu_expected},
                {"ratio_above_floor", e.ratio > e.floor},
                {"ratio_below_upper", e.ratio < e.upper},
                {"track_matches", std::max(e.max_phi_deviation, e.max_theta_deviation) <= cfg.track_tolerance},
                {"outside_omega", e.omega_samples == 0}};
    if (cfg.self_check) checks["self_check"] = e.passed();
    detail::finish(r, std::move(result), std::move(checks));
    std::ostringstream text;
    text << detail::fmt("delta = %g, %d periods of T = %.12g\n", cfg.delta, cfg.periods, e.period);
    text << detail::fmt("nu = %ld (expected %ld), gamma = %.12g\n", e.nu, e.nu_expected, e.gamma);
    text << detail::fmt("ratio mu/nu = %.12g in (%.12g, %.12g)\n", e.ratio, e.floor, e.upper);
    text << detail::fmt("track deviation phi %.3g theta %.3g (tolerance %.3g), %zu windows\n", e.max_phi_deviation,
                        e.max_theta_deviation, cfg.track_tolerance, e.windows);
    if (e.free_run_divergence) text << detail::fmt("unanchored run leaves the track at t = %.6g\n", *e.free_run_divergence);
    for (const std::string& f : e.failures) text << "failure: " << f << '\n';
    r.text = text.str();
    return r;
}

// ---------------------------------------------------------------------------------------------
// sweep

struct SweepConfig {
    std::uint64_t seed = 42;
    std::size_t size = 100;
    double horizon = 50.0;
    int degree = 2;
    double radius = 1.0;
    double rtol = 1e-9, atol = 1e-12;
    double quad_tol = 1e-10;
    unsigned threads = 0;  // 0: hardware concurrency
    /// Items that get a c(t) += 1/(t_b - t)^3 term with t_b = horizon / 2.
    std::vector<std::size_t> blowup;
};

struct SweepItem {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    AnalyzeConfig config;
    std::optional<OscillationReport> report;
    std::string status;  // ok | margin_violation | integration_error | domain_error | error
    std::string message;
};

/// p_0 + sum_k p_k cos(k t) + q_k sin(k t), coefficients uniform in [-R, R].
inline std::string random_trig_polynomial(Rng& rng, int degree, double radius) {
    std::string s = format_double(rng.uniform(-radius, radius));
    for (int k = 1; k <= degree; ++k) {
        const double p = rng.uniform(-radius, radius);
        const double q = rng.uniform(-radius, radius);
        s += " + " + format_double(p) + "*cos(" + std::to_string(k) + "*t)";
        s += " + " + format_double(q) + "*sin(" + std::to_string(k) + "*t)";
    }
    return s;
}

/// Deterministic item i: coefficients a, b, c in that order, then the initial direction.
inline AnalyzeConfig sweep_item_config(const SweepConfig& cfg, std::size_t index) {
    Rng rng(item_seed(cfg.seed, index));
    AnalyzeConfig c;
    c.a = random_trig_polynomial(rng, cfg.degree, cfg.radius);
    c.b = random_trig_polynomial(rng, cfg.degree, cfg.radius);
    c.c = random_trig_polynomial(rng, cfg.degree, cfg.radius);
    c.init = rng.unit_vector();
    c.horizon = cfg.horizon;
    c.rtol = cfg.rtol;
    c.atol = cfg.atol;
    c.quad_tol = cfg.quad_tol;
    if (std::find(cfg.blowup.begin(), cfg.blowup.end(), index) != cfg.blowup.end())
        c.c = "(" + c.c + ") + 1/(" + format_double(cfg.horizon / 2.0) + " - t)^3";
    return c;
}

inline SweepItem run_sweep_item(const SweepConfig& cfg, std::size_t index) {
    SweepItem item;
    item.index = index;
    item.seed = item_seed(cfg.seed, index);
    item.config = sweep_item_config(cfg, index);
    try {
        item.report = analyze(CoefficientSpec::parse(item.config.a, item.config.b, item.config.c), item.config);
        item.status = item.report->margin > 0.0 ? "ok" : "margin_violation";
    } catch (const IntegrationError& e) {
        item.status = "integration_error";
        item.message = e.what();
    } catch (const DomainError& e) {
        item.status = "integration_error";
        item.message = e.what();
    } catch (const Error& e) {
        item.status = "error";
        item.message = e.what();
    }
    return item;
}

inline constexpr const char* sweep_csv_header = "index,item_seed,nu,gamma,bound,margin,status";

inline std::string sweep_csv_row(const SweepItem& it) {
    std::string row = std::to_string(it.index) + ',' + std::to_string(it.seed) + ',';
    if (it.report)
        row += std::to_string(it.report->nu) + ',' + format_double(it.report->gamma) + ',' +
               format_double(it.report->bound) + ',' + format_double(it.report->margin);
    else
        row += ",,,";
    return row + ',' + it.status;
}

inline std::vector<SweepItem> run_sweep(const SweepConfig& cfg) {
    std::vector<SweepItem> items(cfg.size);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cfg.size;) items[i] = run_sweep_item(cfg, i);
    };
    unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(cfg.size, 1)));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return items;
}

inline CommandResult cmd_sweep(const SweepConfig& cfg) {
    if (cfg.size == 0) throw PreconditionError("sweep: size must be positive");
    if (!(cfg.horizon > 0.0)) throw PreconditionError("sweep: horizon must be positive");
    if (cfg.degree < 0 || !(cfg.radius >= 0.0)) throw PreconditionError("sweep: degree and radius must be non-negative");
    Json blow = Json::array();
    for (std::size_t b : cfg.blowup) blow.push_back(b);
    CommandResult r;
    r.report = detail::envelope("sweep", Json{{"seed", cfg.seed},
                                              {"size", cfg.size},
                                              {"horizon", cfg.horizon},
                                              {"family", "trigonometric"},
                                              {"degree", cfg.degree},
                                              {"radius", cfg.radius},
                                              {"rtol", cfg.rtol},
                                              {"atol", cfg.atol},
                                              {"quad_tol", cfg.quad_tol},
                                              {"blowup", blow}});
    const std::vector<SweepItem> items = run_sweep(cfg);
    std::size_t ok = 0, violations = 0, integration_errors = 0, other_errors = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    Json rows = Json::array();
    r.csv = std::string(sweep_csv_header) + '\n';
    for (const SweepItem& it : items) {
        r.csv += sweep_csv_row(it) + '\n';
        if (it.status == "ok") ++ok;
        else if (it.status == "margin_violation") ++violations;
        else if (it.status == "integration_error") ++integration_errors;
        else ++other_errors;
        if (it.report) min_margin = std::min(min_margin, it.report->margin);
        Json row{{"index", it.index}, {"item_seed", it.seed}, {"status", it.status}, {"config", config_json(it.config)}};
        if (it.report) {
            row["nu"] = it.report->nu;
            row["gamma"] = it.report->gamma;
            row["bound"] = it.report->bound;
            row["margin"] = it.report->margin;
        } else {
            row["message"] = it.message;
        }
        rows.push_back(std::move(row));
    }
    Json result{{"items", cfg.size},
                {"ok", ok},
                {"margin_violations", violations},
                {"integration_errors", integration_errors},
                {"other_errors", other_errors},
                {"min_margin", std::isfinite(min_margin) ? Json(min_margin) : Json(nullptr)},
                {"tolerances", detail::tolerances_json({cfg.rtol, cfg.atol, cfg.quad_tol})},
                {"rows", std::move(rows)}};
    detail::finish(r, std::move(result),
                   Json{{"no_margin_violations", violations == 0},
                        {"all_items_completed", integration_errors + other_errors == 0}});
    r.text = detail::fmt("%zu items: %zu ok, %zu margin violations, %zu integration errors, %zu other errors\n"
                         "min margin = %.12g\n",
                         cfg.size, ok, violations, integration_errors, other_errors, min_margin);
    return r;
}

}  // namespace osc3
