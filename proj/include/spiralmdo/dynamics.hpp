#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

#include "spiralmdo/scaling.hpp"

namespace spiralmdo {

using StateVec = Eigen::Matrix<double, 5, 1>;

/**
 * Planar polar spacecraft state: radius, angle, radial velocity, tangential
 * velocity, instantaneous mass. The angle is stored unwrapped (no modulo) so
 * multi-revolution histories and steering-rate constraints stay meaningful.
 */
struct SpacecraftState {
    double r = 0.0;        // radial distance from body center [m]
    double theta = 0.0;    // angular position [rad], unwrapped
    double v_r = 0.0;      // radial velocity [m/s]
    double v_theta = 0.0;  // tangential velocity [m/s]
    double m = 0.0;        // instantaneous mass [kg]

    StateVec vec() const {
        StateVec x;
        x << r, theta, v_r, v_theta, m;
        return x;
    }
    static SpacecraftState from_vec(const StateVec& x) {
        return {x[0], x[1], x[2], x[3], x[4]};
    }
};

struct BodyParameters {
    double mu = 1.601e9;  // gravitational parameter [m^3/s^2]
    double r_min = 1.0;   // guard radius: r below this is a domain error [m]
};

/**
 * Thrust command expressed as magnitude, steering angle from the local
 * tangential direction, and propellant mass flow. The angle is unwrapped;
 * cos(alpha) < 0 is a retrograde (orbit-lowering) burn.
 */
struct ControlInput {
    double thrust = 0.0;  // [N]
    double alpha = 0.0;   // [rad]
    double mdot = 0.0;    // propellant mass flow [kg/s]
};

/// Time derivative of the five state components, ordered as SpacecraftState.
inline StateVec eom(const SpacecraftState& x, const ControlInput& u, const BodyParameters& body) {
    if (!(x.r > 0.0) || x.r < body.r_min) {
        throw std::domain_error("eom: radius at or below guard r_min");
    }
    if (!(x.m > 0.0)) {
        throw std::domain_error("eom: nonpositive mass");
    }
    const double sin_a = std::sin(u.alpha);
    const double cos_a = std::cos(u.alpha);
    const double acc = u.thrust / x.m;
    StateVec dx;
    dx[0] = x.v_r;
    dx[1] = x.v_theta / x.r;
    dx[2] = x.v_theta * x.v_theta / x.r - body.mu / (x.r * x.r) + acc * sin_a;
    dx[3] = -x.v_r * x.v_theta / x.r + acc * cos_a;
    dx[4] = -u.mdot;
    return dx;
}

/**
 * Analytic partials of the state rate.
 * wrt_state columns follow (r, theta, v_r, v_theta, m); wrt_control columns
 * follow (thrust, alpha, mdot). Rows follow the state-rate ordering.
 */
struct EomJacobian {
    Eigen::Matrix<double, 5, 5> wrt_state = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 3> wrt_control = Eigen::Matrix<double, 5, 3>::Zero();
};

inline EomJacobian eom_partials(const SpacecraftState& x, const ControlInput& u,
                                const BodyParameters& body) {
    if (!(x.r > 0.0) || x.r < body.r_min) {
        throw std::domain_error("eom_partials: radius at or below guard r_min");
    }
    if (!(x.m > 0.0)) {
        throw std::domain_error("eom_partials: nonpositive mass");
    }
    const double r = x.r;
    const double vr = x.v_r;
    const double vt = x.v_theta;
    const double m = x.m;
    const double sin_a = std::sin(u.alpha);
    const double cos_a = std::cos(u.alpha);
    const double acc = u.thrust / m;

    EomJacobian jac;
    auto& A = jac.wrt_state;
    auto& B = jac.wrt_control;

    // d(r dot)
    A(0, 2) = 1.0;
    // d(theta dot)
    A(1, 0) = -vt / (r * r);
    A(1, 3) = 1.0 / r;
    // d(v_r dot)
    A(2, 0) = -vt * vt / (r * r) + 2.0 * body.mu / (r * r * r);
    A(2, 3) = 2.0 * vt / r;
    A(2, 4) = -acc * sin_a / m;
    B(2, 0) = sin_a / m;
    B(2, 1) = acc * cos_a;
    // d(v_theta dot)
    A(3, 0) = vr * vt / (r * r);
    A(3, 2) = -vt / r;
    A(3, 3) = -vr / r;
    A(3, 4) = -acc * cos_a / m;
    B(3, 0) = cos_a / m;
    B(3, 1) = -acc * sin_a;
    // d(m dot)
    B(4, 2) = -1.0;
    return jac;
}

// --- nondimensionalization -------------------------------------------------

inline SpacecraftState nondimensionalize(const SpacecraftState& x, const ScaleSet& s) {
    return {x.r / s.length, x.theta, x.v_r / s.velocity(), x.v_theta / s.velocity(), x.m / s.mass};
}

inline SpacecraftState redimensionalize(const SpacecraftState& x, const ScaleSet& s) {
    return {x.r * s.length, x.theta, x.v_r * s.velocity(), x.v_theta * s.velocity(), x.m * s.mass};
}

inline ControlInput nondimensionalize(const ControlInput& u, const ScaleSet& s) {
    return {u.thrust / s.force(), u.alpha, u.mdot / s.mass_rate()};
}

inline ControlInput redimensionalize(const ControlInput& u, const ScaleSet& s) {
    return {u.thrust * s.force(), u.alpha, u.mdot * s.mass_rate()};
}

inline BodyParameters nondimensionalize(const BodyParameters& b, const ScaleSet& s) {
    return {b.mu / s.gravitational_parameter(), b.r_min / s.length};
}

/// State rates scale like state / time.
inline StateVec nondimensionalize_rate(const StateVec& dx, const ScaleSet& s) {
    StateVec out;
    out[0] = dx[0] / s.velocity();
    out[1] = dx[1] * s.time;
    out[2] = dx[2] / s.acceleration();
    out[3] = dx[3] / s.acceleration();
    out[4] = dx[4] / s.mass_rate();
    return out;
}

inline StateVec redimensionalize_rate(const StateVec& dx, const ScaleSet& s) {
    StateVec out;
    out[0] = dx[0] * s.velocity();
    out[1] = dx[1] / s.time;
    out[2] = dx[2] * s.acceleration();
    out[3] = dx[3] * s.acceleration();
    out[4] = dx[4] * s.mass_rate();
    return out;
}

}  // namespace spiralmdo
