#pragma once

// Structured report output: JSON with every floating-point number printed to 17 significant
// digits, and the seeded generators used by ensemble sweeps.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

#include "json.hpp"
#include "osc3/state.hpp"

namespace osc3 {

using Json = nlohmann::ordered_json;

inline constexpr const char* report_schema = "osc3.report/1";

inline std::string format_double(double v) {
    if (std::isnan(v)) return "\"nan\"";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void write_json(const Json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    const char* nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            out += nl;
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) {
                    out += ',';
                    out += nl;
                }
                first = false;
                out += pad;
                out += Json(it.key()).dump();
                out += indent > 0 ? ": " : ":";
                write_json(it.value(), out, indent, depth + 1);
            }
            out += nl;
            out += close_pad;
            out += '}';
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            // Arrays of scalars stay on one line.
            bool scalars = true;
            for (const auto& v : j) scalars = scalars && !v.is_structured();
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += scalars ? ", " : ",";
                first = false;
                if (!scalars) {
                    out += nl;
                    out += pad;
                }
                write_json(v, out, indent, depth + 1);
            }
            if (!scalars) {
                out += nl;
                out += close_pad;
            }
            out += ']';
            return;
        }
        case Json::value_t::number_float: out += format_double(j.get<double>()); return;
        default: out += j.dump(); return;
    }
}

}  // namespace detail

inline std::string to_json_text(const Json& j, int indent = 2) {
    std::string out;
    detail::write_json(j, out, indent, 0);
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------------------------
// Seeded randomness. Item i of a sweep with seed s uses mt19937_64 seeded with
// splitmix64(s + (i + 1) * 0x9E3779B97F4A7C15); uniforms take the top 53 bits, so the
// sequence is fixed by the standard and the same on every platform.

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t item_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform direction on the unit sphere (rejection from the cube).
    State3 unit_vector() {
        for (;;) {
            const State3 v{uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
            const double n = norm(v);
            if (n > 1e-3 && n <= 1.0) return v / n;
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace osc3
