#include <CLI11.hpp>

#include <spiralmdo/spiralmdo.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace spiralmdo;

namespace {

// Process exit codes, kept stable for scripting.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNotConverged = 3;
constexpr int kNumericalFailure = 4;

/// Raw config tree from a path: absent path or blank file is an empty tree
/// (all defaults), anything else must parse as JSON.
nlohmann::json raw_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return nlohmann::json::object();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

/// Apply one `dotted.path=value` override onto the config tree. Values parse
/// as JSON when possible (numbers, booleans, arrays) and fall back to plain
/// strings, so `--set mode=baseline` and `--set power.A_SA=60` both read
/// naturally. Key validity is enforced later by the schema pass.
void apply_override(nlohmann::json& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override: expected key=value, got '" + spec + "'");
    const std::string path = spec.substr(0, eq);
    const std::string text = spec.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    nlohmann::json* node = &root;
    std::istringstream keys(path);
    std::string key, next;
    std::getline(keys, key, '.');
    while (std::getline(keys, next, '.')) {
        node = &(*node)[key];
        if (!node->is_object() && !node->is_null())
            throw std::invalid_argument("override: " + path + " descends into a non-object");
        key = next;
    }
    (*node)[key] = value;
}

ScenarioConfig resolve_config(const std::string& path, const std::vector<std::string>& sets) {
    nlohmann::json root = raw_config(path);
    for (const auto& s : sets) apply_override(root, s);
    return config_from_json(root);
}

fs::path resolve_out(const std::string& out) {
    fs::path p = out.empty() ? fs::path(".") : fs::path(out);
    if (const char* root = std::getenv("SPIRALMDO_OUT_ROOT"); root && *root && p.is_relative())
        p = fs::path(root) / p;
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Node-level solution table: the discrete answer the solver produced, one
/// row per collocation node, all SI.
void write_solution_csv(const TranscribedProblem& problem, const Eigen::VectorXd& x,
                        std::ostream& os) {
    os << "node,t,r,theta,v_r,v_theta,m,P_E,alpha\n";
    os << std::setprecision(17);
    const double t_f = x(problem.index_tf()) * problem.scales().time;
    for (int g = 0; g < problem.num_nodes(); ++g) {
        const double s = problem.node_time_normalized(g);
        const SpacecraftState st = problem.node_state(x, g);
        const ControlSample u = problem.controls_at(x, s);
        os << g << ',' << s * t_f << ',' << st.r << ',' << st.theta << ',' << st.v_r << ','
           << st.v_theta << ',' << st.m << ',' << u.p_e << ',' << u.alpha << '\n';
    }
}

/// Figure-ready data files under <dir>/plots: polar track, radius and mass
/// histories, control histories, and the collocation-node markers.
void emit_plot_data(const TranscribedProblem& problem, const Eigen::VectorXd& x,
                    const PropagationResult& res, const fs::path& dir) {
    fs::create_directories(dir / "plots");
    {
        std::ofstream os(dir / "plots" / "trajectory_xy.csv");
        os << "t,r,theta,x,y\n" << std::setprecision(17);
        for (const auto& pt : res.history)
            os << pt.t << ',' << pt.state.r << ',' << pt.state.theta << ','
               << pt.state.r * std::cos(pt.state.theta) << ','
               << pt.state.r * std::sin(pt.state.theta) << '\n';
    }
    {
        std::ofstream os(dir / "plots" / "radius_time.csv");
        os << "t,r\n" << std::setprecision(17);
        for (const auto& pt : res.history) os << pt.t << ',' << pt.state.r << '\n';
    }
    {
        std::ofstream os(dir / "plots" / "controls.csv");
        os << "t,alpha,P_E,P_avail\n" << std::setprecision(17);
        for (const auto& pt : res.history)
            os << pt.t << ',' << pt.alpha << ',' << pt.p_e << ',' << pt.p_avail << '\n';
    }
    {
        std::ofstream os(dir / "plots" / "mass_time.csv");
        os << "t,m\n" << std::setprecision(17);
        for (const auto& pt : res.history) os << pt.t << ',' << pt.state.m << '\n';
    }
    {
        std::ofstream os(dir / "plots" / "nodes.csv");
        os << "node,t,r,theta,x,y,m,P_E,alpha,P_avail\n" << std::setprecision(17);
        const ScenarioConfig& cfg = problem.config();
        const double t_f = x(problem.index_tf()) * problem.scales().time;
        const double area = problem.coupled() ? x(problem.index_area()) * problem.area_scale()
                                              : cfg.power.area;
        for (int g = 0; g < problem.num_nodes(); ++g) {
            const double s = problem.node_time_normalized(g);
            const double t = s * t_f;
            const SpacecraftState st = problem.node_state(x, g);
            const ControlSample u = problem.controls_at(x, s);
            os << g << ',' << t << ',' << st.r << ',' << st.theta << ','
               << st.r * std::cos(st.theta) << ',' << st.r * std::sin(st.theta) << ',' << st.m
               << ',' << u.p_e << ',' << u.alpha << ','
               << power_partials(cfg.power, t, area).p_avail << '\n';
        }
    }
}

/// Everything a finished run leaves behind; the resolved config makes the
/// directory self-describing.
void write_run_artifacts(const ScenarioRun& run, const TranscribedProblem& problem,
                         const fs::path& dir) {
    write_text(dir / "config.json", config_to_json(run.solution.config).dump(2) + "\n");
    {
        std::ofstream os(dir / "solution.csv");
        write_solution_csv(problem, run.solution.result.x, os);
    }
    {
        std::ofstream os(dir / "defects.csv");
        write_defect_csv(run.defects, os);
    }
    {
        std::ofstream os(dir / "iterations.csv");
        write_iterations_csv(run.solution.result, os);
    }
    write_text(dir / "solution.json", solution_to_json(run.solution).dump(2) + "\n");
    write_text(dir / "summary.json", summary_json(run).dump(2) + "\n");
    if (run.propagated) {
        std::ofstream os(dir / "trajectory.csv");
        write_trajectory_csv(run.propagation, os);
        emit_plot_data(problem, run.solution.result.x, run.propagation, dir);
    }
}

int exit_code_for(SolveStatus status) {
    switch (status) {
        case SolveStatus::kConverged: return kOk;
        case SolveStatus::kNumericalFailure: return kNumericalFailure;
        default: return kNotConverged;
    }
}

int cmd_guess(const std::string& config, const std::vector<std::string>& sets,
              const std::string& out) {
    const ScenarioConfig cfg = resolve_config(config, sets);
    const fs::path dir = resolve_out(out);
    TranscribedProblem problem(cfg.grid, cfg, build_guess(cfg));
    const Eigen::VectorXd x0 = problem.initial_guess();
    write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
    {
        std::ofstream os(dir / "solution.csv");
        write_solution_csv(problem, x0, os);
    }
    {
        std::ofstream os(dir / "defects.csv");
        write_defect_csv(problem.defect_report(x0), os);
    }
    const double t_f = x0(problem.index_tf()) * problem.scales().time;
    std::cout << "guess: " << problem.num_nodes() << " nodes, t_f = " << t_f << " s -> "
              << dir.string() << "\n";
    return kOk;
}

int cmd_solve(const std::string& config, const std::vector<std::string>& sets,
              const std::string& out) {
    const ScenarioConfig cfg = resolve_config(config, sets);
    const fs::path dir = resolve_out(out);
    const ScenarioRun run = run_scenario(cfg);
    TranscribedProblem problem(cfg.grid, cfg, build_guess(cfg));
    write_run_artifacts(run, problem, dir);
    const Solution& s = run.solution;
    std::cout << "solve: " << to_string(s.result.status) << ", t_f = " << s.t_f
              << " s, A_SA = " << s.area << " m^2, propellant = " << s.propellant_kg
              << " kg -> " << dir.string() << "\n";
    if (!run.note.empty()) std::cerr << "note: " << run.note << "\n";
    return exit_code_for(s.result.status);
}

int cmd_propagate(const std::string& run_dir, const std::string& out) {
    const fs::path src(run_dir);
    std::ifstream in(src / "solution.json");
    if (!in) throw std::invalid_argument("config: cannot open " + (src / "solution.json").string());
    nlohmann::json j;
    in >> j;
    const Solution s = solution_from_json(j);
    const fs::path dir = resolve_out(out.empty() ? run_dir : out);

    TranscribedProblem problem(s.config.grid, s.config, build_guess(s.config));
    const PropagationResult res = propagate(problem, s.result.x, s.config.propagation);
    const MassAudit audit = mass_audit(res, problem, s.result.x);
    {
        std::ofstream os(dir / "trajectory.csv");
        write_trajectory_csv(res, os);
    }
    emit_plot_data(problem, s.result.x, res, dir);
    std::cout << "propagate: " << res.history.size() << " points, max radius divergence = "
              << res.max_divergence(0) << " m, mass audit residual = " << audit.residual
              << " kg -> " << dir.string() << "\n";
    return kOk;
}

Solution load_solution(const std::string& run_dir) {
    const fs::path path = fs::path(run_dir) / "solution.json";
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return solution_from_json(j);
}

int cmd_compare(const std::string& baseline_dir, const std::string& coupled_dir,
                const std::string& out) {
    const Solution base = load_solution(baseline_dir);
    const Solution coup = load_solution(coupled_dir);
    const ComparisonReport rep = compare(base, coup);
    const fs::path dir = resolve_out(out);

    std::ostringstream table;
    table << std::setprecision(10);
    table << "quantity,baseline,coupled,pct\n"
          << "t_f_s," << rep.t_f_s.baseline << ',' << rep.t_f_s.coupled << ','
          << rep.t_f_s.pct << '\n'
          << "initial_mass_kg," << rep.initial_mass_kg.baseline << ','
          << rep.initial_mass_kg.coupled << ',' << rep.initial_mass_kg.pct << '\n'
          << "final_mass_kg," << rep.final_mass_kg.baseline << ',' << rep.final_mass_kg.coupled
          << ',' << rep.final_mass_kg.pct << '\n'
          << "propellant_kg," << rep.propellant_kg.baseline << ',' << rep.propellant_kg.coupled
          << ',' << rep.propellant_kg.pct << '\n'
          << "max_defect," << rep.max_defect.baseline << ',' << rep.max_defect.coupled << ','
          << rep.max_defect.pct << '\n'
          << "A_SA_m2," << rep.baseline_area_m2 << ',' << rep.coupled_area_m2 << ",\n";
    write_text(dir / "comparison.csv", table.str());
    write_text(dir / "comparison.json", comparison_to_json(rep).dump(2) + "\n");
    std::cout << table.str();
    return kOk;
}

int cmd_defect_study(const std::string& config, const std::vector<std::string>& sets,
                     const std::string& segments, const std::string& out) {
    const fs::path dir = resolve_out(out);
    std::vector<int> counts;
    std::istringstream in(segments);
    for (std::string tok; std::getline(in, tok, ',');) {
        const int k = std::stoi(tok);
        if (k < 1) throw std::invalid_argument("config: --segments entries must be >= 1");
        counts.push_back(k);
    }
    if (counts.empty()) throw std::invalid_argument("config: --segments is empty");

    std::ostringstream table;
    table << "segments,t_f_s,max_violation,max_radius_divergence_m,converged\n"
          << std::setprecision(10);
    bool all_ok = true;
    for (int k : counts) {
        ScenarioConfig cfg = resolve_config(config, sets);
        cfg.grid.n_segments = k;
        const ScenarioRun run = run_scenario(cfg);
        const bool ok = run.solution.converged() && run.propagated;
        all_ok = all_ok && ok;
        const double div = run.propagated ? run.propagation.max_divergence(0)
                                          : std::numeric_limits<double>::quiet_NaN();
        table << k << ',' << run.solution.t_f << ',' << run.solution.result.max_violation << ','
              << div << ',' << (ok ? 1 : 0) << '\n';
        std::cout << "segments " << k << ": " << to_string(run.solution.result.status)
                  << ", max radius divergence = " << div << " m\n";
    }
    write_text(dir / "defect_study.csv", table.str());
    return all_ok ? kOk : kNotConverged;
}

int cmd_sweep_area(const std::string& config, const std::vector<std::string>& sets,
                   const std::string& areas, const std::string& out) {
    const fs::path dir = resolve_out(out);
    std::vector<double> values;
    std::istringstream in(areas);
    for (std::string tok; std::getline(in, tok, ',');) values.push_back(std::stod(tok));
    if (values.empty()) throw std::invalid_argument("config: --areas is empty");

    std::ostringstream table;
    table << "A_SA_m2,t_f_s,propellant_kg,max_violation,converged\n" << std::setprecision(10);
    bool all_ok = true;
    for (double a : values) {
        ScenarioConfig cfg = resolve_config(config, sets);
        cfg.mode = DesignMode::kBaseline;  // the sweep IS the area study
        cfg.power.area = a;
        const ScenarioRun run = run_scenario(cfg);
        all_ok = all_ok && run.solution.converged();
        table << a << ',' << run.solution.t_f << ',' << run.solution.propellant_kg << ','
              << run.solution.result.max_violation << ','
              << (run.solution.converged() ? 1 : 0) << '\n';
        std::cout << "A_SA " << a << ": " << to_string(run.solution.result.status)
                  << ", t_f = " << run.solution.t_f << " s\n";
    }
    write_text(dir / "sweep_area.csv", table.str());
    return all_ok ? kOk : kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Low-thrust spiral transfer design around 16 Psyche: shape-based seeding,\n"
        "Radau collocation, and coupled trajectory/solar-array optimization."};
    app.require_subcommand(1);

    std::string config, out, baseline_dir, coupled_dir, run_dir;
    std::string segments = "10,20,40";
    std::string areas = "40,50,60";
    std::vector<std::string> sets;

    const std::string config_help = "Configuration file (JSON); empty or absent means the "
                                    "stock full-scale mission";
    const std::string set_help = "Override a config key, e.g. --set power.A_SA=60 "
                                 "--set mode=baseline (repeatable)";
    const std::string out_help = "Output directory (created if missing; relative paths resolve "
                                 "under $SPIRALMDO_OUT_ROOT when set)";

    auto* guess = app.add_subcommand("guess", "Build and write the shape-based seed without solving");
    guess->add_option("--config", config, config_help);
    guess->add_option("--set", sets, set_help);
    guess->add_option("--out", out, out_help);

    auto* solve = app.add_subcommand("solve", "Run the full pipeline and write all artifacts");
    solve->add_option("--config", config, config_help);
    solve->add_option("--set", sets, set_help);
    solve->add_option("--out", out, out_help);

    auto* propagate_cmd = app.add_subcommand(
        "propagate", "Re-fly a saved run with the adaptive integrator and write the trajectory");
    propagate_cmd->add_option("--run", run_dir, "Run directory holding solution.json")
        ->required();
    propagate_cmd->add_option("--out", out, "Output directory (defaults to the run directory)");

    auto* cmp = app.add_subcommand("compare",
                                   "Join a baseline run and a coupled run into one table");
    cmp->add_option("--baseline", baseline_dir, "Baseline run directory")->required();
    cmp->add_option("--coupled", coupled_dir, "Coupled run directory")->required();
    cmp->add_option("--out", out, out_help);

    auto* study = app.add_subcommand(
        "defect-study", "Solve at several grid sizes and tabulate propagated divergence");
    study->add_option("--config", config, config_help);
    study->add_option("--set", sets, set_help);
    study->add_option("--segments", segments, "Comma-separated segment counts (default 10,20,40)");
    study->add_option("--out", out, out_help);

    auto* sweep = app.add_subcommand(
        "sweep-area", "Solve the baseline design across fixed array areas");
    sweep->add_option("--config", config, config_help);
    sweep->add_option("--set", sets, set_help);
    sweep->add_option("--areas", areas, "Comma-separated areas in m^2 (default 40,50,60)");
    sweep->add_option("--out", out, out_help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (app.got_subcommand(guess)) return cmd_guess(config, sets, out);
        if (app.got_subcommand(solve)) return cmd_solve(config, sets, out);
        if (app.got_subcommand(propagate_cmd)) return cmd_propagate(run_dir, out);
        if (app.got_subcommand(cmp)) return cmd_compare(baseline_dir, coupled_dir, out);
        if (app.got_subcommand(study)) return cmd_defect_study(config, sets, segments, out);
        if (app.got_subcommand(sweep)) return cmd_sweep_area(config, sets, areas, out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const PropagationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalFailure;
    }
    return kConfigError;  // unreachable: a subcommand is required
}
