#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spiralmdo/constants.hpp"

namespace spiralmdo {

/// One operating point of the thruster. Values as published by the vendor:
/// input power in W, thrust in mN, mass flow in mg/s, Isp in s.
struct ThrottleMode {
    double power_w = 0.0;
    double thrust_mn = 0.0;
    double mdot_mg_s = 0.0;
    double isp_s = 0.0;
    double efficiency = 0.0;
};

/// Discrete throttle table for one thruster, sorted by descending power on
/// construction. The blending below treats the rows as samples of a smooth
/// power-to-thrust map.
class ThrottleTable {
  public:
    ThrottleTable() = default;
    explicit ThrottleTable(std::vector<ThrottleMode> modes) : modes_(std::move(modes)) {
        if (modes_.empty()) throw std::invalid_argument("propulsion.table: no modes");
        for (const auto& m : modes_) {
            if (!(m.power_w > 0.0) || !(m.thrust_mn > 0.0) || !(m.mdot_mg_s > 0.0))
                throw std::invalid_argument("propulsion.table: nonpositive entry");
        }
        std::sort(modes_.begin(), modes_.end(),
                  [](const ThrottleMode& a, const ThrottleMode& b) { return a.power_w > b.power_w; });
    }

    const std::vector<ThrottleMode>& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    const ThrottleMode& operator[](std::size_t i) const { return modes_[i]; }

    double min_power() const { return modes_.back().power_w; }
    double max_power() const { return modes_.front().power_w; }

    /// SPT-140 Hall thruster, 21 operating points.
    static ThrottleTable spt140();

    /// Header must be exactly: mode,power_w,thrust_mn,mdot_mg_s,isp_s,efficiency
    static ThrottleTable from_csv(const std::string& path);

  private:
    std::vector<ThrottleMode> modes_;
};

inline ThrottleTable ThrottleTable::spt140() {
    return ThrottleTable({
        {4989.0, 263.0, 13.9, 1929.0, 0.50},
        {4620.0, 270.0, 16.5, 1670.0, 0.48},
        {4589.0, 287.0, 17.8, 1647.0, 0.50},
        {4561.0, 264.0, 16.4, 1645.0, 0.47},
        {4502.0, 260.0, 16.2, 1641.0, 0.46},
        {4375.0, 246.0, 14.0, 1790.0, 0.49},
        {3937.0, 251.0, 17.5, 1461.0, 0.46},
        {3894.0, 251.0, 17.5, 1464.0, 0.46},
        {3850.0, 251.0, 17.5, 1464.0, 0.47},
        {3758.0, 217.0, 13.9, 1597.0, 0.45},
        {3752.0, 221.0, 13.9, 1617.0, 0.47},
        {3750.0, 215.0, 13.6, 1614.0, 0.45},
        {3460.0, 184.0, 17.1, 1099.0, 0.29},
        {3446.0, 185.0, 20.4, 925.0, 0.24},
        {3402.0, 189.0, 16.3, 1181.0, 0.32},
        {3377.0, 201.0, 15.8, 1302.0, 0.38},
        {3376.0, 175.0, 18.2, 979.0, 0.25},
        {3360.0, 198.0, 14.7, 1371.0, 0.40},
        {3142.0, 191.0, 13.8, 1409.0, 0.42},
        {3008.0, 177.0, 11.4, 1579.0, 0.46},
        {1514.0, 87.0, 6.1, 1449.0, 0.41},
    });
}

inline ThrottleTable ThrottleTable::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("propulsion.table_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("propulsion.table_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "mode,power_w,thrust_mn,mdot_mg_s,isp_s,efficiency")
        throw std::runtime_error("propulsion.table_csv: unexpected header '" + line + "'");
    std::vector<ThrottleMode> modes;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        double vals[6];
        for (int i = 0; i < 6; ++i) {
            if (!std::getline(row, field, ',')) throw std::runtime_error("propulsion.table_csv: short row '" + line + "'");
            vals[i] = std::stod(field);
        }
        modes.push_back({vals[1], vals[2], vals[3], vals[4], vals[5]});
    }
    return ThrottleTable(std::move(modes));
}

/// Kernel used to turn the distance |P - P_i| into a blending weight.
enum class BlendKernel {
    kGaussian,   // exp(-(P-P_i)^2 / 2s^2)
    kLogistic,   // sech-squared style density, heavier tails
};

/// A cluster of identical thrusters fed the same commanded power each.
struct EngineCluster {
    ThrottleTable table = ThrottleTable::spt140();
    int num_engines = 1;             // N_eng
    double bandwidth = 100.0;        // s, blending width [W]
    BlendKernel kernel = BlendKernel::kGaussian;

    void validate() const {
        if (num_engines < 1) throw std::invalid_argument("propulsion.N_eng must be >= 1");
        if (!(bandwidth > 0.0)) throw std::invalid_argument("propulsion.bandwidth must be > 0");
    }

    double min_power() const { return table.min_power(); }
    double max_power() const { return table.max_power(); }
};

namespace detail {

/// Normalized blending weights and their derivatives w.r.t. commanded power.
/// Exponents are shifted by their maximum before exponentiation so the
/// normalization never under- or overflows regardless of bandwidth.
inline void blend_weights(const ThrottleTable& table, double p_e, double s, BlendKernel kernel,
                          std::vector<double>& w, std::vector<double>& dw) {
    const std::size_t n = table.size();
    w.assign(n, 0.0);
    dw.assign(n, 0.0);
    std::vector<double> expo(n), dexpo(n);
    double max_expo = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = p_e - table[i].power_w;
        if (kernel == BlendKernel::kGaussian) {
            expo[i] = -d * d / (2.0 * s * s);
            dexpo[i] = -d / (s * s);
        } else {
            // log of sech^2(d / 2s): same quadratic core near zero, linear tails.
            const double u = d / (2.0 * s);
            expo[i] = 2.0 * (std::log(2.0) - u - std::log1p(std::exp(-2.0 * u)));
            dexpo[i] = -std::tanh(u) / s;
        }
        max_expo = std::max(max_expo, expo[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(expo[i] - max_expo);
        sum += w[i];
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] /= sum;
        dot += w[i] * dexpo[i];
    }
    for (std::size_t i = 0; i < n; ++i) dw[i] = w[i] * (dexpo[i] - dot);
}

}  // namespace detail

/// Blended thrust [N] and mass flow [kg/s] for the whole cluster at commanded
/// per-engine power p_e [W], with derivatives w.r.t. p_e.
struct PropulsionEval {
    double thrust = 0.0;       // [N]
    double mdot = 0.0;         // [kg/s]
    double dthrust_dpe = 0.0;  // [N/W]
    double dmdot_dpe = 0.0;    // [kg/s/W]
};

inline PropulsionEval propulsion_partials(const EngineCluster& cluster, double p_e) {
    std::vector<double> w, dw;
    detail::blend_weights(cluster.table, p_e, cluster.bandwidth, cluster.kernel, w, dw);
    PropulsionEval ev;
    const double n = static_cast<double>(cluster.num_engines);
    for (std::size_t i = 0; i < cluster.table.size(); ++i) {
        const auto& m = cluster.table[i];
        ev.thrust += w[i] * m.thrust_mn;
        ev.mdot += w[i] * m.mdot_mg_s;
        ev.dthrust_dpe += dw[i] * m.thrust_mn;
        ev.dmdot_dpe += dw[i] * m.mdot_mg_s;
    }
    ev.thrust *= n * 1e-3;        // mN -> N
    ev.mdot *= n * 1e-6;          // mg/s -> kg/s
    ev.dthrust_dpe *= n * 1e-3;
    ev.dmdot_dpe *= n * 1e-6;
    return ev;
}

inline double cluster_thrust(const EngineCluster& cluster, double p_e) {
    return propulsion_partials(cluster, p_e).thrust;
}

inline double cluster_mdot(const EngineCluster& cluster, double p_e) {
    return propulsion_partials(cluster, p_e).mdot;
}

/// Effective specific impulse [s] of the blend at p_e.
inline double blended_isp(const EngineCluster& cluster, double p_e) {
    const auto ev = propulsion_partials(cluster, p_e);
    return ev.thrust / (ev.mdot * kStandardGravity);
}

}  // namespace spiralmdo
