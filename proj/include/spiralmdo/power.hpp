#pragma once

#include <cmath>
#include <stdexcept>

#include "spiralmdo/constants.hpp"

namespace spiralmdo {

/**
 * Solar array and power-budget model.
 *
 * Array output scales with area, efficiency and inverse-square heliocentric
 * distance, corrected by a rational polynomial in r_s and a linear annual
 * degradation factor. Propulsion power is the array output minus the bus
 * reserve, saturated at the PPU cap through a smooth switch so the whole
 * chain stays differentiable.
 */
struct PowerConfig {
    double area = 50.0;                 // A_SA, solar array area [m^2]
    double array_efficiency = 0.3;      // eta_SA
    double solar_constant = kSolarConstant;  // S0 [W/m^2]
    double heliocentric_au = 2.9;       // r_s [AU]
    double d1 = 1.0, d2 = 0.0, d3 = 0.0, d4 = 0.0, d5 = 0.0;  // polynomial correction
    double degradation_per_year = 0.03;  // sigma [1/yr]
    double bus_power = 590.0;            // P_bus [W]
    double ppu_max_power = 4863.0;       // P_max [W]
    double distribution_efficiency = 0.95;  // eta_d
    double smoothing_power = 10.0;       // rho_p [W]
    // Keep the saturation switch exactly as published (a smooth max) instead
    // of the min-recovering sign convention. Comparison studies only.
    bool literal_smoothing = false;

    /// Rational correction factor evaluated at the configured distance.
    double polynomial_factor() const {
        const double rs = heliocentric_au;
        const double den = 1.0 + d4 * rs + d5 * rs * rs;
        return (d1 + d2 / rs + d3 / (rs * rs)) / den;
    }

    void validate() const {
        if (!(area > 0.0)) throw std::invalid_argument("power.A_SA must be > 0");
        if (!(array_efficiency > 0.0 && array_efficiency <= 1.0))
            throw std::invalid_argument("power.eta_SA must be in (0, 1]");
        if (!(distribution_efficiency > 0.0 && distribution_efficiency <= 1.0))
            throw std::invalid_argument("power.eta_d must be in (0, 1]");
        if (!(heliocentric_au > 0.0)) throw std::invalid_argument("power.r_s must be > 0");
        if (degradation_per_year < 0.0) throw std::invalid_argument("power.sigma must be >= 0");
        if (!(smoothing_power > 0.0)) throw std::invalid_argument("power.rho_p must be > 0");
        if (!(ppu_max_power > 0.0)) throw std::invalid_argument("power.P_max must be > 0");
        if (bus_power < 0.0) throw std::invalid_argument("power.P_bus must be >= 0");
        const double rs = heliocentric_au;
        if (std::abs(1.0 + d4 * rs + d5 * rs * rs) < 1e-12)
            throw std::invalid_argument("power polynomial denominator vanishes at r_s");
    }
};

namespace detail {

/// 0..1 switch: 1/2 (1 + z / sqrt(z^2 + rho^2)).
inline double smooth_switch(double z, double rho) {
    return 0.5 * (1.0 + z / std::sqrt(z * z + rho * rho));
}

inline double smooth_switch_deriv(double z, double rho) {
    const double w = std::sqrt(z * z + rho * rho);
    return 0.5 * rho * rho / (w * w * w);
}

}  // namespace detail

/// Array output at elapsed mission time t [s], optionally overriding the
/// configured area (the transcription varies area as a design variable).
inline double solar_array_power(const PowerConfig& cfg, double t, double area) {
    if (t < 0.0) throw std::domain_error("solar_array_power: negative time");
    const double t_years = t / kSecondsPerYear;
    const double degradation = 1.0 - cfg.degradation_per_year * t_years;
    if (degradation <= 0.0) {
        throw std::domain_error("solar_array_power: degradation factor nonpositive at requested time");
    }
    const double rs = cfg.heliocentric_au;
    return area * cfg.array_efficiency * cfg.solar_constant / (rs * rs) *
           cfg.polynomial_factor() * degradation;
}

inline double solar_array_power(const PowerConfig& cfg, double t) {
    return solar_array_power(cfg, t, cfg.area);
}

/**
 * Power available to the thruster given array output P_SA.
 *
 * The hard rule is eta_d * min(P_max, P_SA - P_bus), floored at zero when the
 * bus reserve exceeds the array output. Both selections are replaced by the
 * smooth switch above with constant rho_p, so the result tracks the hard rule
 * within eta_d * rho_p everywhere and has bounded curvature at the corners.
 */
inline double available_power(const PowerConfig& cfg, double p_sa) {
    const double rho = cfg.smoothing_power;
    const double margin = p_sa - cfg.bus_power;
    if (cfg.literal_smoothing) {
        const double chi = detail::smooth_switch(cfg.ppu_max_power - margin, rho);
        return cfg.distribution_efficiency * (chi * cfg.ppu_max_power + (1.0 - chi) * margin);
    }
    const double excess = margin - cfg.ppu_max_power;
    const double chi = detail::smooth_switch(excess, rho);
    const double inner = chi * cfg.ppu_max_power + (1.0 - chi) * margin;
    // Smooth floor at zero: weight the inner value by its own switch.
    const double floored = detail::smooth_switch(inner, rho) * inner;
    return cfg.distribution_efficiency * floored;
}

/// d(available)/d(P_SA), matching available_power.
inline double available_power_deriv(const PowerConfig& cfg, double p_sa) {
    const double rho = cfg.smoothing_power;
    const double margin = p_sa - cfg.bus_power;
    if (cfg.literal_smoothing) {
        const double g = cfg.ppu_max_power - margin;
        const double chi = detail::smooth_switch(g, rho);
        const double dchi = -detail::smooth_switch_deriv(g, rho);  // dg/dmargin = -1
        return cfg.distribution_efficiency *
               (dchi * cfg.ppu_max_power + (1.0 - chi) - dchi * margin);
    }
    const double excess = margin - cfg.ppu_max_power;
    const double chi = detail::smooth_switch(excess, rho);
    const double dchi = detail::smooth_switch_deriv(excess, rho);
    const double inner = chi * cfg.ppu_max_power + (1.0 - chi) * margin;
    const double dinner = dchi * cfg.ppu_max_power + (1.0 - chi) - dchi * margin;
    const double chi0 = detail::smooth_switch(inner, rho);
    const double dfloored = (chi0 + inner * detail::smooth_switch_deriv(inner, rho)) * dinner;
    return cfg.distribution_efficiency * dfloored;
}

/**
 * Full evaluation with analytic sensitivities to array area and elapsed time,
 * assembled by the chain rule through the array and saturation stages.
 */
struct PowerEval {
    double p_sa = 0.0;       // array output [W]
    double p_avail = 0.0;    // propulsion power bound [W]
    double dpsa_darea = 0.0;
    double dpsa_dt = 0.0;
    double davail_dpsa = 0.0;
    double davail_darea = 0.0;
    double davail_dt = 0.0;
};

inline PowerEval power_partials(const PowerConfig& cfg, double t, double area) {
    PowerEval ev;
    ev.p_sa = solar_array_power(cfg, t, area);
    ev.p_avail = available_power(cfg, ev.p_sa);
    ev.dpsa_darea = ev.p_sa / area;
    // P_SA = K * area * (1 - sigma t / year) => dP_SA/dt = -K * area * sigma / year.
    const double t_years = t / kSecondsPerYear;
    const double degradation = 1.0 - cfg.degradation_per_year * t_years;
    ev.dpsa_dt = -ev.p_sa / degradation * cfg.degradation_per_year / kSecondsPerYear;
    ev.davail_dpsa = available_power_deriv(cfg, ev.p_sa);
    ev.davail_darea = ev.davail_dpsa * ev.dpsa_darea;
    ev.davail_dt = ev.davail_dpsa * ev.dpsa_dt;
    return ev;
}

inline PowerEval power_partials(const PowerConfig& cfg, double t) {
    return power_partials(cfg, t, cfg.area);
}

}  // namespace spiralmdo
