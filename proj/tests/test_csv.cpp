#include <catch2/catch_amalgamated.hpp>

#include <spiralmdo/propagate.hpp>
#include <spiralmdo/scenario.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace spiralmdo;
using Catch::Approx;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<double> fields_of(const std::string& line) {
    std::vector<double> out;
    std::istringstream in(line);
    for (std::string cell; std::getline(in, cell, ',');) out.push_back(std::stod(cell));
    return out;
}

/// Two-revolution circular coast on a coarse grid: cheap to build, and every
/// table row has a known closed-form value.
struct CoastProblem {
    ScenarioConfig cfg;
    GridSpec grid;
    TranscriptionGuess guess;
    double v_circ = 0.0, t_f = 0.0, m0 = 0.0;
};

CoastProblem coast() {
    CoastProblem c;
    c.cfg.body.mu = 1.601e9;
    c.cfg.orbits.r0 = 300e3;
    c.cfg.orbits.rf = 300e3;
    c.cfg.mode = DesignMode::kBaseline;
    c.cfg.propulsion.table = ThrottleTable({{100.0, 1e-30, 1e-30, 1000.0, 0.5}});
    c.grid.n_segments = 4;
    c.grid.nodes_per_segment = 3;
    c.m0 = baseline_initial_mass(c.cfg);
    c.v_circ = std::sqrt(c.cfg.body.mu / c.cfg.orbits.r0);
    const double omega = c.v_circ / c.cfg.orbits.r0;
    c.t_f = 2.0 * 2.0 * std::numbers::pi / omega;
    c.guess.t_f = c.t_f;
    c.guess.area = c.cfg.power.area;
    for (double s : collocation_times(c.grid)) {
        NodeGuess ng;
        ng.t = s * c.t_f;
        ng.state = {c.cfg.orbits.r0, omega * ng.t, 0.0, c.v_circ, c.m0};
        ng.alpha = std::numbers::pi;
        ng.p_e = 100.0;
        c.guess.nodes.push_back(ng);
    }
    return c;
}

}  // namespace

TEST_CASE("trajectory table round-trips through text at full precision", "[csv]") {
    const auto c = coast();
    TranscribedProblem prob(c.grid, c.cfg, c.guess);
    const PropagationResult res = propagate(prob, prob.initial_guess());

    std::ostringstream os;
    write_trajectory_csv(res, os);
    const auto lines = lines_of(os.str());
    REQUIRE(lines.size() == res.history.size() + 1);
    CHECK(lines[0] == "t,r,theta,v_r,v_theta,m,P_E,alpha,T,mdot,P_SA,P_avail");

    double prev_t = -1.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = fields_of(lines[i]);
        REQUIRE(row.size() == 12);
        CHECK(row[0] > prev_t);
        prev_t = row[0];
        // Text must reproduce the stored doubles bit for bit.
        const auto& pt = res.history[i - 1];
        CHECK(row[0] == pt.t);
        CHECK(row[1] == pt.state.r);
        CHECK(row[5] == pt.state.m);
        CHECK(row[6] == pt.p_e);
        CHECK(row[11] == pt.p_avail);
    }
}

TEST_CASE("defect table lists one row per segment with its start time", "[csv]") {
    const auto c = coast();
    TranscribedProblem prob(c.grid, c.cfg, c.guess);
    const DefectReport rep = prob.defect_report(prob.initial_guess());

    std::ostringstream os;
    write_defect_csv(rep, os);
    const auto lines = lines_of(os.str());
    REQUIRE(lines.size() == static_cast<std::size_t>(c.grid.n_segments) + 1);
    CHECK(lines[0] ==
          "segment,start_time_s,defect_r,defect_theta,defect_v_r,defect_v_theta,defect_m");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = fields_of(lines[i]);
        REQUIRE(row.size() == 7);
        CHECK(row[0] == static_cast<double>(i - 1));
        CHECK(row[1] == Approx(rep.segment_start[i - 1]));
        // A node-seeded circular coast is the exact solution: every defect
        // norm is numerical noise.
        for (int cidx = 2; cidx < 7; ++cidx) CHECK(std::abs(row[cidx]) < 1e-10);
    }
}

TEST_CASE("iteration trace serializes every accepted iterate", "[csv]") {
    SolveResult result;
    for (int k = 1; k <= 3; ++k) {
        IterationRecord rec;
        rec.iteration = k;
        rec.objective = 1.0 / (3.0 * k);  // not representable in decimal
        rec.max_violation = std::pow(10.0, -k);
        rec.step_norm = std::sqrt(2.0) / k;
        rec.penalty = 10.0 * k;
        result.iterations.push_back(rec);
    }

    std::ostringstream os;
    write_iterations_csv(result, os);
    const auto lines = lines_of(os.str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "iteration,objective,max_violation,step_norm,penalty");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto row = fields_of(lines[i]);
        REQUIRE(row.size() == 5);
        const auto& rec = result.iterations[i - 1];
        CHECK(row[0] == static_cast<double>(rec.iteration));
        CHECK(row[1] == rec.objective);
        CHECK(row[2] == rec.max_violation);
        CHECK(row[3] == rec.step_norm);
        CHECK(row[4] == rec.penalty);
    }
}

TEST_CASE("throttle table file loader tolerates a missing final newline", "[csv]") {
    const char* path = "csv_no_trailing_newline.csv";
    {
        std::ofstream out(path);
        out << "mode,power_w,thrust_mn,mdot_mg_s,isp_s,efficiency\n"
               "1,4839,252.2,24.4,2053.6,0.52\n"
               "2,1126,60.6,5.7,1076.0,0.28";  // no final newline
    }
    const auto table = ThrottleTable::from_csv(path);
    std::remove(path);
    REQUIRE(table.size() == 2);
    CHECK(table[0].power_w == 4839.0);
    CHECK(table[1].power_w == 1126.0);
    CHECK(table[1].isp_s == 1076.0);
}
