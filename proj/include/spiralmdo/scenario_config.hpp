#pragma once

#include <spiralmdo/dynamics.hpp>
#include <spiralmdo/nlp.hpp>
#include <spiralmdo/power.hpp>
#include <spiralmdo/propulsion.hpp>
#include <spiralmdo/sizing.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace spiralmdo {

/**
 * Collocation grid: the normalized time axis split into segments, each
 * carrying `nodes_per_segment` Radau collocation nodes. Widths are optional
 * fractions of the axis (empty = uniform) and must sum to one.
 */
struct GridSpec {
    int n_segments = 50;         // [-]
    int nodes_per_segment = 3;   // Radau order [-]
    std::vector<double> widths;  // per-segment fraction of [0,1]; empty = uniform

    void validate() const {
        if (n_segments < 1) throw std::invalid_argument("grid.segments must be >= 1");
        if (nodes_per_segment < 2) throw std::invalid_argument("grid.order must be >= 2");
        if (!widths.empty()) {
            if (static_cast<int>(widths.size()) != n_segments)
                throw std::invalid_argument("grid.widths length must equal grid.segments");
            double sum = 0.0;
            for (double w : widths) {
                if (!(w > 0.0)) throw std::invalid_argument("grid.widths must be positive");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("grid.widths must sum to 1");
        }
    }

    /// Width of segment s as a fraction of the normalized axis.
    double width(int s) const {
        return widths.empty() ? 1.0 / n_segments : widths[static_cast<std::size_t>(s)];
    }
};

/// Baseline freezes the array area and the wet mass; coupled exposes the
/// area as a static design variable feeding both power and initial mass.
enum class DesignMode { kBaseline, kCoupled };

inline const char* to_string(DesignMode m) {
    return m == DesignMode::kBaseline ? "baseline" : "coupled";
}

struct OrbitConfig {
    double r0 = 750e3;  // initial circular radius [m]
    double rf = 200e3;  // final circular radius [m]
};

/// Shape-fit seed controls. Zeros pick the transfer heuristics.
struct GuessConfig {
    int n_terms = 10;  // harmonics per coordinate [-]
    int revs = 0;      // imposed revolution count; 0 = heuristic [-]
    double t_f = 0.0;  // duration seed [s]; 0 = heuristic
};

struct PropagationConfig {
    double abs_tol = 1e-10;  // scaled-state absolute tolerance [-]
    double rel_tol = 1e-10;  // relative tolerance [-]
};

/**
 * Everything a run needs. `power.area` doubles as the frozen baseline area
 * and as the coupled-mode starting point; `mass` carries the dry/propellant
 * bookkeeping and the area bounds.
 */
struct ScenarioConfig {
    BodyParameters body;
    OrbitConfig orbits;
    PowerConfig power;
    SizingConfig mass;
    EngineCluster propulsion;
    GridSpec grid;
    SolverOptions solver;
    std::string solver_name = "auglag";  // see make_solver
    GuessConfig guess;
    PropagationConfig propagation;
    DesignMode mode = DesignMode::kCoupled;
    bool scaled = true;          // canonical units; off reproduces the raw-SI stiffness
    bool table3_compat = false;  // book the baseline wet stack as a fixed 418.00 kg

    void validate() const {
        if (!(body.mu > 0.0)) throw std::invalid_argument("body.mu must be positive");
        if (!(orbits.r0 > 0.0) || !(orbits.rf > 0.0))
            throw std::invalid_argument("orbits radii must be positive");
        if (orbits.r0 == orbits.rf)
            throw std::invalid_argument("orbits.r0 must differ from orbits.rf");
        if (!(power.area > 0.0)) throw std::invalid_argument("power.A_SA must be positive");
        if (!(mass.area_min > 0.0) || mass.area_max < mass.area_min)
            throw std::invalid_argument("mass area bounds must satisfy 0 < A_min <= A_max");
        if (guess.n_terms < 3) throw std::invalid_argument("guess.n_terms must be >= 3");
        if (guess.t_f < 0.0) throw std::invalid_argument("guess.t_f must be >= 0");
        if (guess.revs < 0) throw std::invalid_argument("guess.revs must be >= 0");
        if (!(propagation.abs_tol > 0.0) || !(propagation.rel_tol > 0.0))
            throw std::invalid_argument("propagation tolerances must be positive");
        power.validate();
        mass.validate();
        grid.validate();
        propulsion.validate();
    }
};

/// Wet mass at departure for the frozen-area stack.
inline double baseline_initial_mass(const ScenarioConfig& cfg) {
    if (cfg.table3_compat) return 418.00;
    return initial_mass(cfg.mass, cfg.propulsion.num_engines, cfg.power.area);
}

}  // namespace spiralmdo
