// osc3: command-line front end for the oscillation toolkit.
//
//   osc3 constant [--method quadrature|polyline|both] [--tol X] [--segments N]
//   osc3 analyze  --a EXPR --b EXPR --c EXPR --init y,dy,ddy --horizon T
//   osc3 extremal --delta D --periods K [--model PATH]
//   osc3 sweep    --seed S --size N --horizon T [--csv PATH]
//
// Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "osc3/commands.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw osc3::Error("cannot open " + path);
    out << content;
    if (!out) throw osc3::Error("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero counts and phase-sphere wandering length of third-order linear ODEs"};
    app.set_config("--config", "", "INI file with one [section] per command; flags override it");
    app.require_subcommand(1);

    std::string out_path, csv_path;
    bool timing = false;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out_path, "Write the JSON report here");
        sub->add_flag("--timing", timing, "Include wall-clock time in the JSON report");
    };

    osc3::ConstantConfig constant;
    auto* c_cmd = app.add_subcommand("constant", "Length L of the boundary of Omega by two methods");
    c_cmd->add_option("--method", constant.method, "quadrature, polyline or both")
        ->check(CLI::IsMember({"quadrature", "polyline", "both"}))
        ->capture_default_str();
    c_cmd->add_option("--tol", constant.tol, "Quadrature tolerance")->capture_default_str();
    c_cmd->add_option("--segments", constant.segments, "Polyline segment count (even)")->capture_default_str();
    common(c_cmd);

    osc3::AnalyzeConfig analyze;
    std::vector<double> init{1.0, 0.0, 0.0};
    auto* a_cmd = app.add_subcommand("analyze", "Integrate one equation and check the length bound");
    a_cmd->add_option("--a", analyze.a, "Coefficient a(t)")->capture_default_str();
    a_cmd->add_option("--b", analyze.b, "Coefficient b(t)")->capture_default_str();
    a_cmd->add_option("--c", analyze.c, "Coefficient c(t)")->capture_default_str();
    a_cmd->add_option("--init", init, "Initial state y,dy,ddy")->expected(3)->delimiter(',');
    a_cmd->add_option("--t0", analyze.t0, "Start time")->capture_default_str();
    a_cmd->add_option("--horizon", analyze.horizon, "Integration length")->capture_default_str();
    a_cmd->add_option("--rtol", analyze.rtol)->capture_default_str();
    a_cmd->add_option("--atol", analyze.atol)->capture_default_str();
    a_cmd->add_option("--quad-tol", analyze.quad_tol, "Tolerance of the length quadrature")->capture_default_str();
    common(a_cmd);

    osc3::ExtremalConfig extremal;
    auto* e_cmd = app.add_subcommand("extremal", "Synthesize the extremal equation and measure its ratio");
    e_cmd->add_option("--delta", extremal.delta)->capture_default_str();
    e_cmd->add_option("--periods", extremal.periods)->capture_default_str();
    e_cmd->add_option("--grid-factor", extremal.grid_factor, "Mollifier half-width over grid spacing")
        ->capture_default_str();
    e_cmd->add_option("--refine", extremal.refine, "Time-table refinement")->capture_default_str();
    e_cmd->add_option("--rtol", extremal.rtol)->capture_default_str();
    e_cmd->add_option("--atol", extremal.atol)->capture_default_str();
    e_cmd->add_option("--anchor-window", extremal.anchor_window, "Longest re-anchoring window")->capture_default_str();
    e_cmd->add_option("--anchor-target", extremal.anchor_target, "Per-window deviation target")->capture_default_str();
    e_cmd->add_option("--track-tolerance", extremal.track_tolerance)->capture_default_str();
    e_cmd->add_flag("--free-run,!--no-free-run", extremal.free_run, "Also integrate without anchoring");
    e_cmd->add_flag("--self-check", extremal.self_check, "Repeat on a grid twice as fine");
    e_cmd->add_option("--model", extremal.model_out, "Write the coefficient tables as CSV");
    common(e_cmd);

    osc3::SweepConfig sweep;
    std::vector<std::size_t> blowup;
    auto* s_cmd = app.add_subcommand("sweep", "Random trigonometric-coefficient ensemble");
    s_cmd->add_option("--seed", sweep.seed)->capture_default_str();
    s_cmd->add_option("--size", sweep.size)->capture_default_str();
    s_cmd->add_option("--horizon", sweep.horizon)->capture_default_str();
    s_cmd->add_option("--degree", sweep.degree, "Trigonometric degree")->capture_default_str();
    s_cmd->add_option("--radius", sweep.radius, "Coefficient bound R")->capture_default_str();
    s_cmd->add_option("--rtol", sweep.rtol)->capture_default_str();
    s_cmd->add_option("--atol", sweep.atol)->capture_default_str();
    s_cmd->add_option("--quad-tol", sweep.quad_tol)->capture_default_str();
    s_cmd->add_option("--threads", sweep.threads, "Worker count, 0 for all cores")->capture_default_str();
    s_cmd->add_option("--blowup", blowup, "Item indices given a singular coefficient")->delimiter(',');
    s_cmd->add_option("--csv", csv_path, "Write one CSV row per item");
    common(s_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto start = std::chrono::steady_clock::now();
        osc3::CommandResult r;
        if (*c_cmd) {
            r = osc3::cmd_constant(constant);
        } else if (*a_cmd) {
            analyze.init = {init[0], init[1], init[2]};
            r = osc3::cmd_analyze(analyze);
        } else if (*e_cmd) {
            r = osc3::cmd_extremal(extremal);
        } else {
            sweep.blowup = blowup;
            r = osc3::cmd_sweep(sweep);
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (timing) r.report["timing_s"] = seconds;
        std::cout << r.text;
        std::printf("status: %s (%.3f s)\n", r.ok ? "ok" : "FAIL", seconds);
        if (!out_path.empty()) write_file(out_path, osc3::to_json_text(r.report));
        if (!csv_path.empty()) write_file(csv_path, r.csv);
        return r.ok ? 0 : 1;
    } catch (const osc3::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
    } catch (const osc3::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
    }
    return 2;
}
