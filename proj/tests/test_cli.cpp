#include <catch2/catch_amalgamated.hpp>

#include <spiralmdo/scenario.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace spiralmdo;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string cli_bin() {
    const char* bin = std::getenv("SPIRALMDO_CLI_BIN");
    REQUIRE(bin != nullptr);
    return bin;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd =
        env + (env.empty() ? "" : " ") + cli_bin() + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp("cli_stdout.txt");
    r.err = slurp("cli_stderr.txt");
    std::remove("cli_stdout.txt");
    std::remove("cli_stderr.txt");
    return r;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<double> fields_of(const std::string& line) {
    std::vector<double> out;
    std::istringstream in(line);
    for (std::string cell; std::getline(in, cell, ',');) {
        if (cell.empty()) break;
        out.push_back(std::stod(cell));
    }
    return out;
}

/// Fresh scratch directory with the desk preset saved as desk.json.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_config(desk_scale(), (dir / "desk.json").string());
    return dir;
}

}  // namespace

TEST_CASE("help documents every subcommand and flag", "[cli]") {
    const CliResult r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* sub :
         {"guess", "solve", "propagate", "compare", "defect-study", "sweep-area"})
        CHECK(r.out.find(sub) != std::string::npos);

    const CliResult solve_help = run_cli("solve --help");
    CHECK(solve_help.code == 0);
    for (const char* flag : {"--config", "--set", "--out"})
        CHECK(solve_help.out.find(flag) != std::string::npos);
    const CliResult study_help = run_cli("defect-study --help");
    CHECK(study_help.out.find("--segments") != std::string::npos);
    const CliResult sweep_help = run_cli("sweep-area --help");
    CHECK(sweep_help.out.find("--areas") != std::string::npos);
}

TEST_CASE("bad invocations exit with the config-error code", "[cli]") {
    CHECK(run_cli("nonsense").code == 2);
    CHECK(run_cli("propagate").code == 2);        // missing required --run
    CHECK(run_cli("solve --config does_not_exist.json").code == 2);

    const fs::path dir = scratch("badset");
    const CliResult bogus =
        run_cli("guess --config " + (dir / "desk.json").string() + " --set power.bogus=1 --out " +
                (dir / "g").string());
    CHECK(bogus.code == 2);
    CHECK(bogus.err.find("power.bogus") != std::string::npos);

    const CliResult bad_mode =
        run_cli("guess --config " + (dir / "desk.json").string() + " --set mode=hybrid --out " +
                (dir / "g").string());
    CHECK(bad_mode.code == 2);
    CHECK(bad_mode.err.find("mode") != std::string::npos);
}

TEST_CASE("guess persists the resolved config beside the seed", "[cli]") {
    const fs::path dir = scratch("guess");
    const CliResult r = run_cli("guess --config " + (dir / "desk.json").string() +
                                " --set orbits.rf=260e3 --set grid.segments=6 --out " +
                                (dir / "g").string());
    REQUIRE(r.code == 0);

    const ScenarioConfig cfg = load_config((dir / "g" / "config.json").string());
    CHECK(cfg.orbits.r0 == 300e3);
    CHECK(cfg.orbits.rf == 260e3);  // the override is part of the record
    CHECK(cfg.grid.n_segments == 6);

    const auto rows = lines_of(slurp(dir / "g" / "solution.csv"));
    REQUIRE(rows.size() == static_cast<std::size_t>(6 * cfg.grid.nodes_per_segment) + 1);
    CHECK(rows[0] == "node,t,r,theta,v_r,v_theta,m,P_E,alpha");
    const auto defect_rows = lines_of(slurp(dir / "g" / "defects.csv"));
    CHECK(defect_rows.size() == 7);

    // Relative --out resolves under the documented environment root.
    const CliResult rooted =
        run_cli("guess --config " + (dir / "desk.json").string() + " --out sub",
                "SPIRALMDO_OUT_ROOT=" + (dir / "root").string());
    REQUIRE(rooted.code == 0);
    CHECK(fs::exists(dir / "root" / "sub" / "config.json"));
}

TEST_CASE("solve, compare, and propagate chain through run directories", "[cli]") {
    const fs::path dir = scratch("chain");
    const std::string desk = (dir / "desk.json").string();

    const CliResult base = run_cli("solve --config " + desk + " --set mode=baseline --out " +
                                   (dir / "base").string());
    REQUIRE(base.code == 0);
    const CliResult coup =
        run_cli("solve --config " + desk + " --out " + (dir / "coup").string());
    REQUIRE(coup.code == 0);

    for (const char* name : {"config.json", "solution.csv", "defects.csv", "iterations.csv",
                             "solution.json", "summary.json", "trajectory.csv"}) {
        CHECK(fs::exists(dir / "base" / name));
        CHECK(fs::exists(dir / "coup" / name));
    }

    nlohmann::json summary;
    std::ifstream(dir / "base" / "summary.json") >> summary;
    CHECK(summary.at("status").get<std::string>() == "converged");
    CHECK(summary.at("mode").get<std::string>() == "baseline");
    CHECK(summary.at("propagated").get<bool>());

    // Figure data: the polar file's x/y columns are exactly r cos/sin theta,
    // the node-marker file has one row per collocation node, and a converged
    // run never commands more power than the chain provides.
    const auto xy = lines_of(slurp(dir / "base" / "plots" / "trajectory_xy.csv"));
    REQUIRE(xy.size() > 2);
    CHECK(xy[0] == "t,r,theta,x,y");
    for (std::size_t i = 1; i < xy.size(); i += 97) {
        const auto row = fields_of(xy[i]);
        REQUIRE(row.size() == 5);
        CHECK(row[3] == Approx(row[1] * std::cos(row[2])).margin(1e-9));
        CHECK(row[4] == Approx(row[1] * std::sin(row[2])).margin(1e-9));
    }
    const auto nodes = lines_of(slurp(dir / "base" / "plots" / "nodes.csv"));
    const ScenarioConfig cfg = load_config((dir / "base" / "config.json").string());
    REQUIRE(nodes.size() ==
            static_cast<std::size_t>(cfg.grid.n_segments * cfg.grid.nodes_per_segment) + 1);
    CHECK(nodes[0] == "node,t,r,theta,x,y,m,P_E,alpha,P_avail");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const auto row = fields_of(nodes[i]);
        REQUIRE(row.size() == 10);
        // At collocation nodes the ceiling is a solved path constraint.
        CHECK(row[7] <= row[9] + 1e-2);
    }
    const auto controls = lines_of(slurp(dir / "base" / "plots" / "controls.csv"));
    REQUIRE(controls.size() > 2);
    CHECK(controls[0] == "t,alpha,P_E,P_avail");
    for (std::size_t i = 1; i < controls.size(); ++i) {
        const auto row = fields_of(controls[i]);
        REQUIRE(row.size() == 4);
        // Between nodes the command is polynomial interpolation, which may
        // overshoot a ceiling it rides; a few percent is its natural scale.
        CHECK(row[2] <= row[3] * 1.03 + 1e-6);
    }

    const CliResult cmp = run_cli("compare --baseline " + (dir / "base").string() +
                                  " --coupled " + (dir / "coup").string() + " --out " +
                                  (dir / "cmp").string());
    REQUIRE(cmp.code == 0);
    CHECK(cmp.out.find("t_f_s") != std::string::npos);
    const auto cmp_rows = lines_of(slurp(dir / "cmp" / "comparison.csv"));
    REQUIRE(cmp_rows.size() == 7);
    CHECK(cmp_rows[0] == "quantity,baseline,coupled,pct");
    // Row 1 is t_f: freeing the array shortens (or at worst matches) it.
    std::istringstream tf_row(cmp_rows[1]);
    std::string cell;
    std::getline(tf_row, cell, ',');
    CHECK(cell == "t_f_s");
    std::getline(tf_row, cell, ',');
    const double tf_base = std::stod(cell);
    std::getline(tf_row, cell, ',');
    const double tf_coup = std::stod(cell);
    CHECK(tf_coup <= tf_base * (1.0 + 1e-3));
    CHECK(fs::exists(dir / "cmp" / "comparison.json"));

    // A run compared with itself is legal and reports zero deltas.
    const CliResult self = run_cli("compare --baseline " + (dir / "base").string() +
                                   " --coupled " + (dir / "base").string() + " --out " +
                                   (dir / "self").string());
    CHECK(self.code == 0);
    const auto self_rows = lines_of(slurp(dir / "self" / "comparison.csv"));
    REQUIRE(self_rows.size() == 7);
    for (std::size_t i = 1; i + 1 < self_rows.size(); ++i) {
        const auto row = fields_of(self_rows[i].substr(self_rows[i].find(',') + 1));
        REQUIRE(row.size() == 3);
        CHECK(row[2] == 0.0);
    }

    // Mismatched missions refuse to compare.
    fs::create_directories(dir / "clash");
    {
        nlohmann::json j;
        std::ifstream(dir / "base" / "solution.json") >> j;
        j["config"]["orbits"]["rf"] = 150e3;
        std::ofstream(dir / "clash" / "solution.json") << j.dump(2);
    }
    const CliResult clash = run_cli("compare --baseline " + (dir / "base").string() +
                                    " --coupled " + (dir / "clash").string());
    CHECK(clash.code == 2);
    CHECK(clash.err.find("compare") != std::string::npos);

    const CliResult prop = run_cli("propagate --run " + (dir / "base").string() + " --out " +
                                   (dir / "reflight").string());
    REQUIRE(prop.code == 0);
    const auto traj = lines_of(slurp(dir / "reflight" / "trajectory.csv"));
    REQUIRE(traj.size() > 2);
    CHECK(traj[0] == "t,r,theta,v_r,v_theta,m,P_E,alpha,T,mdot,P_SA,P_avail");
}

TEST_CASE("defect study tabulates divergence against grid size", "[cli]") {
    const fs::path dir = scratch("study");
    // Stationarity is relaxed for the sweep: the study compares propagated
    // divergence of feasible solutions, and the coarse grids plateau above
    // the preset's KKT tolerance while fully feasible.
    const CliResult r = run_cli("defect-study --config " + (dir / "desk.json").string() +
                                " --segments 4,8 --set solver.optimality_tol=1e-2 --out " +
                                (dir / "study").string());
    REQUIRE((r.code == 0 || r.code == 3));
    const auto rows = lines_of(slurp(dir / "study" / "defect_study.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "segments,t_f_s,max_violation,max_radius_divergence_m,converged");
    const auto coarse = fields_of(rows[1]);
    const auto fine = fields_of(rows[2]);
    REQUIRE(coarse.size() == 5);
    REQUIRE(fine.size() == 5);
    CHECK(coarse[0] == 4.0);
    CHECK(fine[0] == 8.0);
    if (coarse[4] == 1.0 && fine[4] == 1.0) {
        CHECK(r.code == 0);
        // Halving the segment width must not worsen the flown-path agreement.
        CHECK(coarse[3] > fine[3]);
    }
}

TEST_CASE("area sweep records one solved design per area", "[cli]") {
    const fs::path dir = scratch("sweep");
    const CliResult r = run_cli("sweep-area --config " + (dir / "desk.json").string() +
                                " --areas 49 --set grid.segments=10" +
                                " --set solver.optimality_tol=1e-2 --out " +
                                (dir / "sweep").string());
    REQUIRE((r.code == 0 || r.code == 3));
    const auto rows = lines_of(slurp(dir / "sweep" / "sweep_area.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "A_SA_m2,t_f_s,propellant_kg,max_violation,converged");
    const auto row = fields_of(rows[1]);
    REQUIRE(row.size() == 5);
    CHECK(row[0] == 49.0);
    CHECK(row[1] > 0.0);
    CHECK((row[4] == 1.0) == (r.code == 0));
}
