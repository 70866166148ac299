#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twofold/sweep.hpp"

using namespace twofold;

namespace {

struct RunOut {
    int exit_code;
    std::string out;
};

RunOut run_cli(const std::string& args, const std::string& env_prefix = "") {
    std::string cmd = env_prefix + std::string(TWOFOLD_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("csv schema and exact closed-form surface") {
    SweepSpec spec;
    spec.a_axis = SweepAxis{0.25, 4.0, 5, true};
    spec.b_axis = SweepAxis{0.25, 4.0, 5, true};
    spec.methods = {Method::Hysteresis};
    auto cells = run_sweep(spec, 2);
    std::string csv = to_csv(cells);
    CHECK(csv.rfind("A,B,method,eps,rho,stderr,converged\n", 0) == 0);
    auto rows = parse_csv(csv);
    REQUIRE(rows.size() == 26);  // header + 25 cells
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 7);
        double a = std::strtod(rows[i][0].c_str(), nullptr);
        double b = std::strtod(rows[i][1].c_str(), nullptr);
        double rho = std::strtod(rows[i][4].c_str(), nullptr);
        REQUIRE(rows[i][2] == "hy");
        REQUIRE(rho == a / (a + b));
        REQUIRE(rows[i][6] == "1");
    }
}

TEST_CASE("sweep bytes do not depend on worker count") {
    SweepSpec spec;
    spec.a_axis = SweepAxis{0.5, 2.0, 3, true};
    spec.b_axis = SweepAxis{0.5, 2.0, 3, true};
    spec.methods = {Method::Hysteresis, Method::NoiseMc};
    spec.params.mc.n_paths = 1500;
    spec.params.mc.dt = 2e-3;
    spec.seed = 77;
    std::string a = to_csv(run_sweep(spec, 1));
    std::string b = to_csv(run_sweep(spec, 4));
    CHECK(a == b);
    spec.seed = 78;
    CHECK(to_csv(run_sweep(spec, 2)) != a);
}

TEST_CASE("json rows parse and mirror the csv") {
    SweepSpec spec;
    spec.a_axis = SweepAxis{1.0, 2.0, 2, false};
    spec.b_axis = SweepAxis{1.0, 1.0, 1, false};
    spec.methods = {Method::Hysteresis};
    auto cells = run_sweep(spec, 1);
    auto j = nlohmann::json::parse(to_json_rows(cells));
    REQUIRE(j["rows"].size() == 2);
    CHECK(j["rows"][0]["method"] == "hy");
    CHECK(j["rows"][0]["converged"] == true);
    CHECK(j["rows"][0]["rho"].get<double>() == 0.5);
}

TEST_CASE("sweep routes pde grid parameters into the cells") {
    SweepSpec spec;
    spec.a_axis = SweepAxis{0.5, 2.0, 3, true};  // 0.5, 1, 2
    spec.b_axis = SweepAxis{1.0, 1.0, 1, false};
    spec.methods = {Method::NoisePde};
    spec.params.grid.du = 0.04;
    spec.params.grid.dr = 0.02;
    auto cells = run_sweep(spec, 2);
    for (const auto& c : cells) {
        REQUIRE_FALSE(c.failed);
        // B = 1 sits on the rho = 1/2 line for every A
        CHECK(std::abs(c.rho.value - 0.5) <= 0.01);
    }
}

TEST_CASE("per-cell failures are recorded, not fatal") {
    SweepSpec spec;
    spec.a_axis = SweepAxis{1.0, 1.0, 1, false};
    spec.b_axis = SweepAxis{1.0, 1.0, 1, false};
    spec.methods = {Method::Hysteresis, Method::NoisePde};
    spec.params.grid.u_max = 12.0037;  // invalid: not a du multiple
    auto cells = run_sweep(spec, 2);
    REQUIRE(cells.size() == 2);
    CHECK_FALSE(cells[0].failed);
    CHECK(cells[1].failed);
    CHECK_FALSE(cells[1].error.empty());
    std::string csv = to_csv(cells);
    auto rows = parse_csv(csv);
    REQUIRE(rows.size() == 3);
    CHECK(rows[2][6] == "0");
}

TEST_CASE("manifest carries version, config echo and cell diagnostics") {
    RunManifest m;
    m.tool_version = version_string();
    m.spec.methods = {Method::TimeDelay};
    m.spec.out = "odd \"path\"\n";
    m.wall_clock_seconds = 0.25;
    m.cells.push_back(SweepCell{1.0, 2.0, Method::TimeDelay, RhoResult{}, true, "boom \"quoted\""});
    auto j = nlohmann::json::parse(manifest_json(m));
    CHECK(j["tool_version"] == version_string());
    CHECK(j["config"]["methods"][0] == "td");
    CHECK(j["config"]["out"] == "odd \"path\"\n");
    CHECK(j["cells"][0]["error"] == "boom \"quoted\"");
}

TEST_CASE("cli rho lines and exit codes") {
    auto hy = run_cli("rho --method hy -A 2 -B 4");
    CHECK(hy.exit_code == 0);
    CHECK(hy.out.rfind("hy,2,4,0.3333333333333333", 0) == 0);

    auto td = run_cli("rho --method td -A 1 -B 1 --eps 1e-4");
    CHECK(td.exit_code == 0);
    double v = std::strtod(td.out.substr(td.out.find(",1,1,") + 5).c_str(), nullptr);
    CHECK(std::abs(v - 0.5) < 0.01);

    CHECK(run_cli("rho --method hy -B 4").exit_code == 2);          // missing -A
    CHECK(run_cli("rho --method nope -A 1 -B 1").exit_code == 2);   // bad method
    CHECK(run_cli("rho --method hy -A -3 -B 4").exit_code == 2);    // invalid parameter
    CHECK(run_cli("bogus-subcommand").exit_code == 2);

    // a run whose diagnostics flag non-convergence exits 3
    auto nc = run_cli(
        "rho --method no-pde -A 1 -B 2 --r-min -1 --r-max 0.5 --grid-du 0.04 --grid-dr 0.02");
    CHECK(nc.exit_code == 3);
}

TEST_CASE("cli compare shows the hy/no-pde coincidence at B = A^2") {
    auto r = run_cli("compare -A 2 -B 4 --paths 4000 --dt 0.001 --eps 1e-5");
    REQUIRE(r.exit_code == 0);
    double hy = 0, td = 0, no_pde = 0;
    std::istringstream is(r.out);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string name;
        double v;
        if (ls >> name >> v) {
            if (name == "hy") hy = v;
            if (name == "td") td = v;
            if (name == "no-pde") no_pde = v;
        }
    }
    CHECK(hy == Catch::Approx(1.0 / 3.0).margin(1e-6));
    CHECK(no_pde == Catch::Approx(1.0 / 3.0).margin(1e-3));
    CHECK(std::abs(td - hy) > 0.2);  // the methods genuinely disagree here
}

TEST_CASE("cli orbit traces") {
    std::string hy_path = "test_orbit_hy.csv";
    auto hy = run_cli("orbit --method hy -A 1 -B 1 --eps 1e-3 --y0 -0.3 --out " + hy_path);
    REQUIRE(hy.exit_code == 0);
    std::string trace = slurp(hy_path);
    CHECK(trace.rfind("t,x,y,side,event\n", 0) == 0);
    CHECK(trace.find("# outcome=Heads") != std::string::npos);
    auto rows = parse_csv(trace);
    double max_switch_x = 0.0;
    std::vector<double> switch_times;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][4] == "switch") {
            max_switch_x = std::max(max_switch_x, std::abs(std::strtod(rows[i][1].c_str(), nullptr)));
            switch_times.push_back(std::strtod(rows[i][0].c_str(), nullptr));
        }
    }
    REQUIRE(switch_times.size() > 20);
    CHECK(max_switch_x <= 1e-3 * (1.0 + 1e-9));  // chatter stays inside the band
    // the band is crossed at speed |y|, so switch gaps lengthen as the orbit
    // climbs toward the two-fold
    double first_gap = switch_times[1] - switch_times[0];
    std::size_t m = switch_times.size() / 2;
    double mid_gap = switch_times[m + 1] - switch_times[m];
    CHECK(mid_gap > first_gap);

    std::string td_path = "test_orbit_td.csv";
    auto td = run_cli("orbit --method td -A 1 -B 1 --eps 1e-3 --y0 -0.3 --out " + td_path);
    REQUIRE(td.exit_code == 0);
    auto td_rows = parse_csv(slurp(td_path));
    std::vector<double> crosses, toggles;
    for (std::size_t i = 1; i < td_rows.size(); ++i) {
        if (td_rows[i][4] == "cross") crosses.push_back(std::strtod(td_rows[i][0].c_str(), nullptr));
        if (td_rows[i][4] == "toggle") toggles.push_back(std::strtod(td_rows[i][0].c_str(), nullptr));
    }
    REQUIRE(toggles.size() >= 5);
    for (std::size_t i = 0; i < toggles.size(); ++i)
        REQUIRE(toggles[i] == crosses[i] + 1e-3);  // exact after %.17g round-trip
    std::remove(hy_path.c_str());
    std::remove(td_path.c_str());
}

TEST_CASE("cli sweep with config file, override and determinism across workers") {
    std::string cfg_path = "test_sweep_cfg.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"A":{"min":0.5,"max":2.0,"count":3,"log":true},
                   "B":{"min":0.5,"max":2.0,"count":2,"log":true},
                   "methods":["hy","no-mc"],
                   "mc":{"paths":800,"dt":0.002},
                   "seed": 12, "out":"unused.csv"})";
    }
    auto r1 = run_cli("sweep --config " + cfg_path +
                      " --out test_sweep_a.csv --threads 1");
    REQUIRE(r1.exit_code == 0);
    auto r2 = run_cli("sweep --config " + cfg_path +
                      " --out test_sweep_b.csv --threads 2");
    REQUIRE(r2.exit_code == 0);
    std::string a = slurp("test_sweep_a.csv");
    std::string b = slurp("test_sweep_b.csv");
    CHECK(a == b);
    CHECK(parse_csv(a).size() == 1 + 3 * 2 * 2);
    // manifest written alongside
    auto mj = nlohmann::json::parse(slurp("test_sweep_a.csv.manifest.json"));
    CHECK(mj["seed"] == 12);
    CHECK(mj["cells"].size() == 12);
    // a flag override changes the output
    auto r3 = run_cli("sweep --config " + cfg_path +
                      " --out test_sweep_c.csv --seed 13 --threads 2");
    REQUIRE(r3.exit_code == 0);
    CHECK(slurp("test_sweep_c.csv") != a);
    // worker count can also come from the environment
    auto r4 = run_cli("sweep --config " + cfg_path + " --out test_sweep_d.csv",
                      "TWOFOLD_THREADS=2 ");
    REQUIRE(r4.exit_code == 0);
    CHECK(slurp("test_sweep_d.csv") == a);
    std::remove("test_sweep_d.csv");
    std::remove("test_sweep_d.csv.manifest.json");
    for (const char* f : {"test_sweep_a.csv", "test_sweep_b.csv", "test_sweep_c.csv",
                          "test_sweep_a.csv.manifest.json", "test_sweep_b.csv.manifest.json",
                          "test_sweep_c.csv.manifest.json", "test_sweep_cfg.json"})
        std::remove(f);
}

TEST_CASE("cli selftest runs a single criterion") {
    auto r = run_cli("selftest --only 1");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("[PASS] criterion 1") != std::string::npos);
}

TEST_CASE("cli compare prints all four methods") {
    auto r = run_cli("compare -A 1 -B 1 --paths 3000 --dt 0.002 --grid-du 0.04 --grid-dr 0.02");
    REQUIRE(r.exit_code == 0);
    for (const char* m : {"hy", "td", "no-pde", "no-mc"})
        CHECK(r.out.find(m) != std::string::npos);
    CHECK(r.out.find("pairwise") != std::string::npos);
}
