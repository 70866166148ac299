#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twofold/core.hpp"
#include "twofold/hysteresis.hpp"
#include "twofold/noise_mc.hpp"
#include "twofold/noise_pde.hpp"
#include "twofold/parallel.hpp"
#include "twofold/timedelay.hpp"
#include "twofold/version.hpp"

namespace twofold {

struct SweepAxis {
    double min = 0.25;
    double max = 4.0;
    std::size_t count = 21;
    bool log_spacing = true;

    void validate(const char* name) const {
        if (count < 1) throw std::invalid_argument(std::string(name) + ": count must be >= 1");
        if (!(min > 0.0) || !(max >= min))
            throw std::invalid_argument(std::string(name) + ": need 0 < min <= max");
    }

    double value(std::size_t i) const {
        if (count == 1) return min;
        double t = static_cast<double>(i) / static_cast<double>(count - 1);
        if (log_spacing) return min * std::pow(max / min, t);
        return min + t * (max - min);
    }
};

enum class OutputFormat { Csv, Json };

/// Per-method numeric knobs used by sweep cells and the `rho` command.
struct MethodParams {
    double td_eps = 1e-5;
    std::size_t td_k = 0;  // 0 = automatic window depth
    std::size_t td_depth = 12;
    PdeGrid grid = PdeGrid::defaults();
    McConfig mc;
};

struct SweepSpec {
    SweepAxis a_axis;
    SweepAxis b_axis;
    std::vector<Method> methods{Method::Hysteresis};
    MethodParams params;
    std::uint64_t seed = 1;
    std::string out = "sweep.csv";
    OutputFormat format = OutputFormat::Csv;

    void validate() const {
        a_axis.validate("A axis");
        b_axis.validate("B axis");
        if (methods.empty()) throw std::invalid_argument("SweepSpec: method set is empty");
    }
};

struct SweepCell {
    double A = 1.0, B = 1.0;
    Method method = Method::Hysteresis;
    RhoResult rho;
    bool failed = false;
    std::string error;
};

struct RunManifest {
    std::string tool_version;
    SweepSpec spec;
    double wall_clock_seconds = 0.0;
    std::vector<SweepCell> cells;  // diagnostics only; values live in the data file
};

namespace sweep_detail {

inline std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}  // namespace sweep_detail

/// Evaluates one (A, B, method) cell. Each cell draws from its own RNG
/// stream derived from (seed, cell index), so cells are independent and the
/// sweep parallelises without changing any value.
inline RhoResult evaluate_cell(const TwoFoldParams& p, Method method, const MethodParams& mp,
                               std::uint64_t cell_seed) {
    switch (method) {
        case Method::Hysteresis:
            return rho_hysteresis_closed_form(p);
        case Method::TimeDelay:
            return rho_timedelay(p, mp.td_eps, mp.td_k, mp.td_depth);
        case Method::NoisePde:
            return rho_noise_pde(p, mp.grid);
        case Method::NoiseMc: {
            McConfig mc = mp.mc;
            mc.seed = cell_seed;
            return simulate_reduced_sde(p, mc, 1);
        }
    }
    throw std::logic_error("evaluate_cell: unknown method");
}

inline std::vector<SweepCell> run_sweep(const SweepSpec& spec, unsigned threads = 0) {
    spec.validate();
    std::vector<SweepCell> cells;
    cells.reserve(spec.a_axis.count * spec.b_axis.count * spec.methods.size());
    for (std::size_t ia = 0; ia < spec.a_axis.count; ++ia)
        for (std::size_t ib = 0; ib < spec.b_axis.count; ++ib)
            for (Method m : spec.methods) {
                SweepCell c;
                c.A = spec.a_axis.value(ia);
                c.B = spec.b_axis.value(ib);
                c.method = m;
                cells.push_back(std::move(c));
            }
    parallel_for(
        cells.size(),
        [&](std::size_t i) {
            SweepCell& c = cells[i];
            std::uint64_t cell_seed = spec.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
            try {
                c.rho = evaluate_cell(TwoFoldParams(c.A, c.B), c.method, spec.params, cell_seed);
            } catch (const std::exception& e) {
                c.failed = true;
                c.error = e.what();
            }
        },
        threads);
    return cells;
}

inline const char* csv_header() { return "A,B,method,eps,rho,stderr,converged"; }

inline std::string to_csv(const std::vector<SweepCell>& cells) {
    using sweep_detail::fmt_double;
    using sweep_detail::fmt_opt;
    std::string out(csv_header());
    out += '\n';
    for (const auto& c : cells) {
        out += fmt_double(c.A);
        out += ',';
        out += fmt_double(c.B);
        out += ',';
        out += to_string(c.method);
        out += ',';
        out += fmt_opt(c.rho.eps_used);
        out += ',';
        out += c.failed ? "" : fmt_double(c.rho.value);
        out += ',';
        out += fmt_opt(c.rho.standard_error);
        out += ',';
        out += c.failed ? "0" : (c.rho.converged ? "1" : "0");
        out += '\n';
    }
    return out;
}

inline std::string to_json_rows(const std::vector<SweepCell>& cells) {
    using sweep_detail::fmt_double;
    std::string out = "{\"rows\":[";
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        first = false;
        out += "{\"A\":" + fmt_double(c.A) + ",\"B\":" + fmt_double(c.B) + ",\"method\":\"" +
               to_string(c.method) + "\"";
        if (c.rho.eps_used) out += ",\"eps\":" + fmt_double(*c.rho.eps_used);
        if (!c.failed) out += ",\"rho\":" + fmt_double(c.rho.value);
        if (c.rho.standard_error) out += ",\"stderr\":" + fmt_double(*c.rho.standard_error);
        out += ",\"converged\":";
        out += (c.failed || !c.rho.converged) ? "false" : "true";
        out += '}';
    }
    out += "]}\n";
    return out;
}

inline std::string manifest_json(const RunManifest& m) {
    using sweep_detail::fmt_double;
    std::ostringstream os;
    os << "{\n";
    os << "  \"tool_version\": \"" << m.tool_version << "\",\n";
    os << "  \"seed\": " << m.spec.seed << ",\n";
    os << "  \"wall_clock_seconds\": " << fmt_double(m.wall_clock_seconds) << ",\n";
    os << "  \"config\": {\n";
    os << "    \"A\": {\"min\": " << fmt_double(m.spec.a_axis.min)
       << ", \"max\": " << fmt_double(m.spec.a_axis.max) << ", \"count\": " << m.spec.a_axis.count
       << ", \"log\": " << (m.spec.a_axis.log_spacing ? "true" : "false") << "},\n";
    os << "    \"B\": {\"min\": " << fmt_double(m.spec.b_axis.min)
       << ", \"max\": " << fmt_double(m.spec.b_axis.max) << ", \"count\": " << m.spec.b_axis.count
       << ", \"log\": " << (m.spec.b_axis.log_spacing ? "true" : "false") << "},\n";
    os << "    \"methods\": [";
    for (std::size_t i = 0; i < m.spec.methods.size(); ++i)
        os << (i ? ", " : "") << '"' << to_string(m.spec.methods[i]) << '"';
    os << "],\n";
    os << "    \"td\": {\"eps\": " << fmt_double(m.spec.params.td_eps)
       << ", \"k\": " << m.spec.params.td_k << ", \"depth\": " << m.spec.params.td_depth << "},\n";
    const PdeGrid& g = m.spec.params.grid;
    os << "    \"pde_grid\": {\"u_max\": " << fmt_double(g.u_max)
       << ", \"r_min\": " << fmt_double(g.r_min) << ", \"r_max\": " << fmt_double(g.r_max)
       << ", \"du\": " << fmt_double(g.du) << ", \"dr\": " << fmt_double(g.dr) << "},\n";
    const McConfig& mc = m.spec.params.mc;
    os << "    \"mc\": {\"paths\": " << mc.n_paths << ", \"dt\": " << fmt_double(mc.dt)
       << ", \"s_min\": " << fmt_double(mc.s_min) << ", \"s_max\": " << fmt_double(mc.s_max)
       << "},\n";
    os << "    \"out\": \"" << sweep_detail::json_escape(m.spec.out) << "\",\n";
    os << "    \"format\": \"" << (m.spec.format == OutputFormat::Csv ? "csv" : "json")
       << "\"\n";
    os << "  },\n";
    os << "  \"cells\": [\n";
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        const auto& c = m.cells[i];
        os << "    {\"A\": " << fmt_double(c.A) << ", \"B\": " << fmt_double(c.B)
           << ", \"method\": \"" << to_string(c.method) << "\", \"converged\": "
           << ((c.failed || !c.rho.converged) ? "false" : "true");
        if (c.failed) os << ", \"error\": \"" << sweep_detail::json_escape(c.error) << "\"";
        if (!c.rho.diagnostic.empty())
            os << ", \"diag\": \"" << sweep_detail::json_escape(c.rho.diagnostic) << "\"";
        os << "}" << (i + 1 < m.cells.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    return os.str();
}

/// Runs the sweep, writes the data file plus `<out>.manifest.json`, and
/// returns the cells. The data file bytes depend only on spec and seed; the
/// manifest additionally records wall-clock time.
inline std::vector<SweepCell> run_sweep_to_files(const SweepSpec& spec, unsigned threads = 0) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<SweepCell> cells = run_sweep(spec, threads);
    auto t1 = std::chrono::steady_clock::now();

    std::ofstream data(spec.out, std::ios::binary);
    if (!data) throw std::runtime_error("cannot open output file: " + spec.out);
    data << (spec.format == OutputFormat::Csv ? to_csv(cells) : to_json_rows(cells));
    data.close();

    RunManifest manifest;
    manifest.tool_version = version_string();
    manifest.spec = spec;
    manifest.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();
    manifest.cells = cells;
    std::ofstream mf(spec.out + ".manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot open manifest file");
    mf << manifest_json(manifest);
    return cells;
}

}  // namespace twofold
