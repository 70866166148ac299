// Command-line front end: single rho queries, (A,B) sweeps, orbit traces,
// cross-method comparison and the acceptance self-test.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twofold/core.hpp"
#include "twofold/hysteresis.hpp"
#include "twofold/noise_mc.hpp"
#include "twofold/noise_pde.hpp"
#include "twofold/selftest.hpp"
#include "twofold/sweep.hpp"
#include "twofold/timedelay.hpp"
#include "twofold/version.hpp"

namespace {

using namespace twofold;

Method parse_method(const std::string& s) {
    if (s == "hy") return Method::Hysteresis;
    if (s == "td") return Method::TimeDelay;
    if (s == "no-pde") return Method::NoisePde;
    if (s == "no-mc") return Method::NoiseMc;
    throw CLI::ValidationError("--method", "unknown method '" + s + "'");
}

struct CommonOpts {
    double A = 1.0, B = 1.0;
    std::string method = "hy";
    double eps = 1e-5;
    std::size_t k = 0;
    std::size_t depth = 12;
    double grid_du = 0.01, grid_dr = 0.005, u_max = 12.0, r_min = -8.0, r_max = 12.0;
    std::size_t paths = 100'000;
    double dt = 5e-4;
    std::uint64_t seed = 1;
};

void add_method_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--eps", o.eps, "perturbation size (td default 1e-5)");
    cmd->add_option("--k", o.k, "time-delay window index (odd; 0 = automatic)");
    cmd->add_option("--depth", o.depth, "time-delay alternation depth");
    cmd->add_option("--grid-du", o.grid_du, "PDE grid spacing in u0");
    cmd->add_option("--grid-dr", o.grid_dr, "PDE pseudo-time step");
    cmd->add_option("--u-max", o.u_max, "PDE domain half width");
    cmd->add_option("--r-min", o.r_min, "PDE pseudo-time start");
    cmd->add_option("--r-max", o.r_max, "PDE pseudo-time end");
    cmd->add_option("--paths", o.paths, "Monte Carlo path count");
    cmd->add_option("--dt", o.dt, "Monte Carlo time step");
    cmd->add_option("--seed", o.seed, "random seed");
}

PdeGrid grid_from(const CommonOpts& o) {
    PdeGrid g;
    g.du = o.grid_du;
    g.dr = o.grid_dr;
    g.u_max = o.u_max;
    g.r_min = o.r_min;
    g.r_max = o.r_max;
    return g;
}

RhoResult compute_rho(Method m, const CommonOpts& o) {
    TwoFoldParams p(o.A, o.B);
    switch (m) {
        case Method::Hysteresis:
            return rho_hysteresis_closed_form(p);
        case Method::TimeDelay:
            return rho_timedelay(p, o.eps, o.k, o.depth);
        case Method::NoisePde:
            return rho_noise_pde(p, grid_from(o));
        case Method::NoiseMc: {
            McConfig mc;
            mc.n_paths = o.paths;
            mc.dt = o.dt;
            mc.seed = o.seed;
            return simulate_reduced_sde(p, mc);
        }
    }
    throw std::logic_error("unreachable");
}

std::string rho_line(Method m, const CommonOpts& o, const RhoResult& r) {
    std::string line = std::string(to_string(m)) + "," + sweep_detail::fmt_double(o.A) + "," +
                       sweep_detail::fmt_double(o.B) + "," + sweep_detail::fmt_double(r.value) +
                       ",";
    if (r.standard_error) line += sweep_detail::fmt_double(*r.standard_error);
    line += ",";
    line += r.diagnostic.empty() ? (r.converged ? "ok" : "not-converged") : r.diagnostic;
    return line;
}

void apply_config_file(const std::string& path, SweepSpec& spec) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    nlohmann::json j;
    in >> j;
    auto axis = [](const nlohmann::json& a, SweepAxis& out) {
        if (a.contains("min")) out.min = a["min"].get<double>();
        if (a.contains("max")) out.max = a["max"].get<double>();
        if (a.contains("count")) out.count = a["count"].get<std::size_t>();
        if (a.contains("log")) out.log_spacing = a["log"].get<bool>();
    };
    if (j.contains("A")) axis(j["A"], spec.a_axis);
    if (j.contains("B")) axis(j["B"], spec.b_axis);
    if (j.contains("methods")) {
        spec.methods.clear();
        for (const auto& m : j["methods"]) spec.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("td")) {
        const auto& td = j["td"];
        if (td.contains("eps")) spec.params.td_eps = td["eps"].get<double>();
        if (td.contains("k")) spec.params.td_k = td["k"].get<std::size_t>();
        if (td.contains("depth")) spec.params.td_depth = td["depth"].get<std::size_t>();
    }
    if (j.contains("pde_grid")) {
        const auto& g = j["pde_grid"];
        if (g.contains("u_max")) spec.params.grid.u_max = g["u_max"].get<double>();
        if (g.contains("r_min")) spec.params.grid.r_min = g["r_min"].get<double>();
        if (g.contains("r_max")) spec.params.grid.r_max = g["r_max"].get<double>();
        if (g.contains("du")) spec.params.grid.du = g["du"].get<double>();
        if (g.contains("dr")) spec.params.grid.dr = g["dr"].get<double>();
    }
    if (j.contains("mc")) {
        const auto& mc = j["mc"];
        if (mc.contains("paths")) spec.params.mc.n_paths = mc["paths"].get<std::size_t>();
        if (mc.contains("dt")) spec.params.mc.dt = mc["dt"].get<double>();
        if (mc.contains("s_min")) spec.params.mc.s_min = mc["s_min"].get<double>();
        if (mc.contains("s_max")) spec.params.mc.s_max = mc["s_max"].get<double>();
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) spec.out = j["out"].get<std::string>();
    if (j.contains("format")) spec.format =
        j["format"].get<std::string>() == "json" ? OutputFormat::Json : OutputFormat::Csv;
}

struct CsvTraceSink {
    std::ofstream out;
    const char* kind_name(TraceKind k) const {
        switch (k) {
            case TraceKind::Sample: return "sample";
            case TraceKind::Switch: return "switch";
            case TraceKind::Cross: return "cross";
            case TraceKind::Toggle: return "toggle";
            case TraceKind::Exit: return "exit";
        }
        return "?";
    }
    void operator()(const TracePoint& pt) {
        out << sweep_detail::fmt_double(pt.t) << ',' << sweep_detail::fmt_double(pt.x) << ','
            << sweep_detail::fmt_double(pt.y) << ',' << to_string(pt.side) << ','
            << kind_name(pt.kind) << '\n';
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar two-fold escape fractions via hysteresis, time-delay and noise"};
    app.set_version_flag("--version", twofold::version_string());
    app.require_subcommand(1);

    CommonOpts o;

    auto* rho_cmd = app.add_subcommand("rho", "print one rho estimate as method,A,B,rho,stderr,diag");
    rho_cmd->add_option("-A", o.A, "parameter A")->required();
    rho_cmd->add_option("-B", o.B, "parameter B")->required();
    rho_cmd->add_option("--method", o.method, "hy | td | no-pde | no-mc")->required();
    add_method_flags(rho_cmd, o);

    SweepSpec flag_spec;  // staging area; applied over the config file
    std::string config_path;
    std::string format_str;
    std::vector<std::string> method_list;
    unsigned threads = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate rho over an (A,B) grid");
    sweep_cmd->add_option("--config", config_path, "JSON config mirroring the sweep spec");
    sweep_cmd->add_option("--a-min", flag_spec.a_axis.min, "A axis minimum");
    sweep_cmd->add_option("--a-max", flag_spec.a_axis.max, "A axis maximum");
    sweep_cmd->add_option("--a-count", flag_spec.a_axis.count, "A axis point count");
    sweep_cmd->add_option("--b-min", flag_spec.b_axis.min, "B axis minimum");
    sweep_cmd->add_option("--b-max", flag_spec.b_axis.max, "B axis maximum");
    sweep_cmd->add_option("--b-count", flag_spec.b_axis.count, "B axis point count");
    sweep_cmd->add_flag("--linear", "linear instead of log spacing on both axes");
    sweep_cmd->add_option("--methods", method_list, "methods to run (hy td no-pde no-mc)");
    sweep_cmd->add_option("--out", flag_spec.out, "output path");
    sweep_cmd->add_option("--format", format_str, "csv | json");
    sweep_cmd->add_option("--threads", threads, "worker threads (default: TWOFOLD_THREADS or all)");
    add_method_flags(sweep_cmd, o);

    auto* orbit_cmd = app.add_subcommand("orbit", "dump one orbit trace (t,x,y,side,event)");
    orbit_cmd->add_option("-A", o.A, "parameter A")->required();
    orbit_cmd->add_option("-B", o.B, "parameter B")->required();
    orbit_cmd->add_option("--method", o.method, "hy | td")->required();
    double y0 = -0.3;
    double x_star = 0.05;
    double sample_dt = -1.0;  // default: one sample per delay width
    std::string orbit_out = "orbit.csv";
    orbit_cmd->add_option("--y0", y0, "initial height on the switching line (negative)")
        ->required();
    orbit_cmd->add_option("--eps", o.eps, "perturbation size")->required();
    orbit_cmd->add_option("--x-star", x_star, "escape half-width");
    orbit_cmd->add_option("--sample-dt", sample_dt,
                          "uniform sample spacing (0 = events only; default eps)");
    orbit_cmd->add_option("--out", orbit_out, "trace file path");

    auto* compare_cmd = app.add_subcommand("compare", "all four estimates at one (A,B)");
    compare_cmd->add_option("-A", o.A, "parameter A")->required();
    compare_cmd->add_option("-B", o.B, "parameter B")->required();
    add_method_flags(compare_cmd, o);

    NoiseMatrix dmat;
    double demo_y0 = -0.3;
    double demo_xstar = 0.1;
    auto* demo_cmd = app.add_subcommand(
        "noise-demo", "finite-eps Monte Carlo of the full planar SDE (demonstration)");
    demo_cmd->add_option("-A", o.A, "parameter A")->required();
    demo_cmd->add_option("-B", o.B, "parameter B")->required();
    demo_cmd->add_option("--eps", o.eps, "noise amplitude")->required();
    demo_cmd->add_option("--y0", demo_y0, "start height on the switching line");
    demo_cmd->add_option("--x-star", demo_xstar, "escape half-width");
    demo_cmd->add_option("--paths", o.paths, "path count");
    demo_cmd->add_option("--seed", o.seed, "random seed");
    demo_cmd->add_option("--d11", dmat.d11, "noise direction matrix entries");
    demo_cmd->add_option("--d12", dmat.d12, "");
    demo_cmd->add_option("--d21", dmat.d21, "");
    demo_cmd->add_option("--d22", dmat.d22, "");

    std::vector<std::string> only, except;
    auto* self_cmd = app.add_subcommand("selftest", "run the acceptance suite");
    self_cmd->add_option("--only", only, "run only these criteria ids");
    self_cmd->add_option("--except", except, "skip these criteria ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 2 on invalid flags, 0 for --help/--version
    }

    try {
        if (rho_cmd->parsed()) {
            Method m = parse_method(o.method);
            RhoResult r = compute_rho(m, o);
            std::cout << rho_line(m, o, r) << "\n";
            return r.converged ? 0 : 3;
        }
        if (sweep_cmd->parsed()) {
            SweepSpec spec;
            if (!config_path.empty()) apply_config_file(config_path, spec);
            // explicit flags override the config file
            auto set_if = [&](const char* flag, auto& dst, const auto& src) {
                if (sweep_cmd->count(flag)) dst = src;
            };
            set_if("--a-min", spec.a_axis.min, flag_spec.a_axis.min);
            set_if("--a-max", spec.a_axis.max, flag_spec.a_axis.max);
            set_if("--a-count", spec.a_axis.count, flag_spec.a_axis.count);
            set_if("--b-min", spec.b_axis.min, flag_spec.b_axis.min);
            set_if("--b-max", spec.b_axis.max, flag_spec.b_axis.max);
            set_if("--b-count", spec.b_axis.count, flag_spec.b_axis.count);
            set_if("--out", spec.out, flag_spec.out);
            if (sweep_cmd->count("--linear")) {
                spec.a_axis.log_spacing = false;
                spec.b_axis.log_spacing = false;
            }
            if (!method_list.empty()) {
                spec.methods.clear();
                for (const auto& m : method_list) spec.methods.push_back(parse_method(m));
            }
            if (sweep_cmd->count("--seed")) spec.seed = o.seed;
            if (sweep_cmd->count("--format"))
                spec.format = format_str == "json" ? OutputFormat::Json : OutputFormat::Csv;
            if (sweep_cmd->count("--eps")) spec.params.td_eps = o.eps;
            if (sweep_cmd->count("--k")) spec.params.td_k = o.k;
            if (sweep_cmd->count("--depth")) spec.params.td_depth = o.depth;
            if (sweep_cmd->count("--grid-du")) spec.params.grid.du = o.grid_du;
            if (sweep_cmd->count("--grid-dr")) spec.params.grid.dr = o.grid_dr;
            if (sweep_cmd->count("--u-max")) spec.params.grid.u_max = o.u_max;
            if (sweep_cmd->count("--r-min")) spec.params.grid.r_min = o.r_min;
            if (sweep_cmd->count("--r-max")) spec.params.grid.r_max = o.r_max;
            if (sweep_cmd->count("--paths")) spec.params.mc.n_paths = o.paths;
            if (sweep_cmd->count("--dt")) spec.params.mc.dt = o.dt;
            auto cells = run_sweep_to_files(spec, threads);
            std::size_t failed = 0;
            for (const auto& c : cells) failed += c.failed ? 1 : 0;
            std::cerr << "wrote " << spec.out << " (" << cells.size() << " cells, " << failed
                      << " failed)\n";
            return failed == cells.size() ? 3 : 0;
        }
        if (orbit_cmd->parsed()) {
            TwoFoldParams p(o.A, o.B);
            PerturbationScale scale(o.eps, x_star);
            if (sample_dt < 0.0) sample_dt = o.eps;
            CsvTraceSink sink;
            sink.out.open(orbit_out, std::ios::binary);
            if (!sink.out) throw std::runtime_error("cannot open " + orbit_out);
            sink.out << "t,x,y,side,event\n";
            EscapeOutcome outcome{Exit::HeadsLeft, 0, 0, 0};
            if (o.method == "hy") {
                HystereticOrbitConfig cfg(scale, y0);
                outcome = simulate_hysteretic_orbit(NormalFormField{p}, cfg, sink, sample_dt);
            } else if (o.method == "td") {
                outcome = simulate_delayed_orbit(NormalFormField{p}, scale, y0, IntegratorConfig{},
                                                 sink, sample_dt);
            } else {
                throw CLI::ValidationError("--method", "orbit supports hy or td");
            }
            sink.out << "# outcome=" << (outcome.heads_right() ? "HeadsRight" : "HeadsLeft")
                     << " t=" << sweep_detail::fmt_double(outcome.t)
                     << " x=" << sweep_detail::fmt_double(outcome.x)
                     << " y=" << sweep_detail::fmt_double(outcome.y) << "\n";
            std::cout << (outcome.heads_right() ? "HeadsRight" : "HeadsLeft") << "\n";
            return 0;
        }
        if (compare_cmd->parsed()) {
            std::vector<std::pair<Method, RhoResult>> rows;
            for (Method m : {Method::Hysteresis, Method::TimeDelay, Method::NoisePde,
                             Method::NoiseMc})
                rows.emplace_back(m, compute_rho(m, o));
            std::printf("%-8s %-12s %-12s\n", "method", "rho", "stderr");
            for (const auto& [m, r] : rows)
                std::printf("%-8s %-12.6f %-12s\n", to_string(m), r.value,
                            r.standard_error ? sweep_detail::fmt_double(*r.standard_error).c_str()
                                             : "-");
            std::printf("pairwise differences:\n");
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = i + 1; j < rows.size(); ++j)
                    std::printf("  |%s - %s| = %.6f\n", to_string(rows[i].first),
                                to_string(rows[j].first),
                                std::abs(rows[i].second.value - rows[j].second.value));
            return 0;
        }
        if (demo_cmd->parsed()) {
            TwoFoldParams p(o.A, o.B);
            PerturbationScale scale(o.eps, demo_xstar);
            RhoResult r = simulate_unreduced_sde(p, scale, demo_y0, o.paths, o.seed, dmat);
            std::cout << "unreduced," << sweep_detail::fmt_double(o.A) << ","
                      << sweep_detail::fmt_double(o.B) << ","
                      << sweep_detail::fmt_double(r.value) << ","
                      << sweep_detail::fmt_double(*r.standard_error)
                      << ",eps=" << sweep_detail::fmt_double(o.eps) << "\n";
            return 0;
        }
        if (self_cmd->parsed()) {
            auto results = twofold::selftest::run_acceptance(std::cout, only, except);
            return twofold::selftest::all_passed(results) ? 0 : 1;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
