#pragma once

#include <stdexcept>

namespace spiralmdo {

/// Mass budget: fixed bus, per-engine allocation, and array mass growing
/// linearly with area. Wet mass adds the propellant load on top.
struct SizingConfig {
    double bus_mass = 200.0;          // m_bus [kg]
    double engine_mass = 4.5;         // m_eng per thruster [kg]
    double array_density = 2.0;       // rho_SA [kg/m^2]
    double propellant_mass = 100.0;   // m_propellant [kg]
    double area_min = 5.0;            // A_SA lower bound [m^2]
    double area_max = 200.0;          // A_SA upper bound [m^2]

    void validate() const {
        if (bus_mass < 0.0) throw std::invalid_argument("mass.m_bus must be >= 0");
        if (engine_mass < 0.0) throw std::invalid_argument("mass.m_eng must be >= 0");
        if (array_density < 0.0) throw std::invalid_argument("mass.rho_SA must be >= 0");
        if (propellant_mass < 0.0) throw std::invalid_argument("mass.m_propellant must be >= 0");
        if (!(area_min > 0.0) || !(area_max >= area_min))
            throw std::invalid_argument("sizing.A_min/A_max invalid");
    }
};

inline double dry_mass(const SizingConfig& cfg, int num_engines, double area) {
    if (num_engines < 1) throw std::invalid_argument("sizing: num_engines must be >= 1");
    if (!(area >= 0.0)) throw std::invalid_argument("sizing: area must be >= 0");
    return cfg.bus_mass + num_engines * cfg.engine_mass + cfg.array_density * area;
}

inline double initial_mass(const SizingConfig& cfg, int num_engines, double area) {
    return dry_mass(cfg, num_engines, area) + cfg.propellant_mass;
}

/// d(dry)/d(area) = d(initial)/d(area); the budget is affine in area.
inline double mass_area_slope(const SizingConfig& cfg) { return cfg.array_density; }

}  // namespace spiralmdo
