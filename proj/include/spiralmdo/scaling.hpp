#pragma once

#include <cmath>
#include <stdexcept>

namespace spiralmdo {

/**
 * Reference quantities for nondimensionalizing states, controls and rates.
 *
 * The canonical choice (length_ref = r0, time_ref = sqrt(r0^3/mu),
 * mass_ref = initial wet mass) makes the scaled gravitational parameter and
 * the scaled circular speed at r = 1 both equal to 1, which keeps every
 * decision variable of the transcribed problem near unit magnitude.
 * identity() reproduces the raw-SI (unscaled) regime.
 */
struct ScaleSet {
    double length = 1.0;  // [m]
    double time = 1.0;    // [s]
    double mass = 1.0;    // [kg]

    static ScaleSet identity() { return {}; }

    /// Canonical units for a transfer starting at radius r0 around a body
    /// with gravitational parameter mu, flown by a spacecraft of wet mass m0.
    static ScaleSet canonical(double r0, double mu, double m0) {
        if (r0 <= 0.0 || mu <= 0.0 || m0 <= 0.0) {
            throw std::invalid_argument("ScaleSet::canonical: r0, mu, m0 must be positive");
        }
        ScaleSet s;
        s.length = r0;
        s.time = std::sqrt(r0 * r0 * r0 / mu);
        s.mass = m0;
        return s;
    }

    bool valid() const { return length > 0.0 && time > 0.0 && mass > 0.0; }

    // Derived references.
    double velocity() const { return length / time; }
    double acceleration() const { return length / (time * time); }
    double force() const { return mass * length / (time * time); }
    double power() const { return force() * velocity(); }
    double mass_rate() const { return mass / time; }
    double gravitational_parameter() const { return length * length * length / (time * time); }
};

}  // namespace spiralmdo
