#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "spiralmdo/dynamics.hpp"
#include "spiralmdo/propulsion.hpp"

namespace spiralmdo {

/**
 * Finite Fourier series with a secular term over normalized time
 * tau in [0, 1]:
 *
 *   f(tau) = a0 + c*tau + sum_k [ a_k cos(k pi tau) + b_k sin(k pi tau) ]
 *
 * Coefficient layout: [a0, c, a_1..a_n, b_1..b_n]. The tau column carries the
 * non-periodic part of the shape (the angular coordinate climbs by
 * 2*pi*revs), leaving the harmonics a periodic-friendly residual to fit.
 */
struct FourierSeries {
    int n_terms = 0;
    Eigen::VectorXd coeff;  // size 2*n_terms + 2

    double value(double tau) const {
        double f = coeff(0) + coeff(1) * tau;
        for (int k = 1; k <= n_terms; ++k) {
            const double w = k * std::numbers::pi * tau;
            f += coeff(1 + k) * std::cos(w) + coeff(1 + n_terms + k) * std::sin(w);
        }
        return f;
    }
    double deriv(double tau) const {  // d/dtau
        double f = coeff(1);
        for (int k = 1; k <= n_terms; ++k) {
            const double kp = k * std::numbers::pi;
            const double w = kp * tau;
            f += kp * (-coeff(1 + k) * std::sin(w) + coeff(1 + n_terms + k) * std::cos(w));
        }
        return f;
    }
    double deriv2(double tau) const {  // d^2/dtau^2
        double f = 0.0;
        for (int k = 1; k <= n_terms; ++k) {
            const double kp = k * std::numbers::pi;
            const double w = kp * tau;
            f -= kp * kp * (coeff(1 + k) * std::cos(w) + coeff(1 + n_terms + k) * std::sin(w));
        }
        return f;
    }
};

/**
 * Shape-based approximation of the spiral transfer: independent series for
 * r(tau) [m] and theta(tau) [rad, unwrapped], plus the guessed time of
 * flight that maps tau to physical time.
 */
struct FourierShape {
    int n_terms = 10;       // harmonics per coordinate [-]
    FourierSeries radius;   // r(tau) [m]
    FourierSeries angle;    // theta(tau) [rad]
    double t_f_guess = 0.0; // [s]
    double mu = 0.0;        // [m^3/s^2]
    int revs = 1;           // imposed revolution count [-]
    // Angle the force-balanced reference sweeps before the revolution-count
    // correction [rad]. When 2*pi*revs strays from this, the correction costs
    // radial thrust the guess must invent; it scales linearly with t_f_guess.
    double natural_angle = 0.0;
};

/// Linear mass profile m(t) = m_initial - mdot * t used by inverse dynamics.
struct MassProfile {
    double m_initial = 0.0;  // [kg]
    double mdot = 0.0;       // constant reference flow [kg/s]
};

struct GuessPoint {
    double tau = 0.0;  // normalized time [-]
    double t = 0.0;    // physical time [s]
    SpacecraftState state;
    double thrust = 0.0;  // required magnitude [N]
    double alpha = 0.0;   // steering angle [rad], unwrapped
    double mdot = 0.0;    // profile flow rate [kg/s]
};

struct DenseGuess {
    std::vector<GuessPoint> points;
    double t_f = 0.0;  // [s]
    // Raised when the required thrust exceeds the cluster's table maximum
    // anywhere. The guess stays usable: the NLP enforces the true bounds.
    bool thrust_exceeds_table = false;
    double max_thrust_ratio = 0.0;  // max required / cluster max [-]
};

/// State, steering angle, and commanded power at one transcription node.
struct NodeGuess {
    double t = 0.0;  // [s]
    SpacecraftState state;
    double alpha = 0.0;  // [rad]
    double p_e = 0.0;    // commanded electrical power [W]
};

// --- transfer heuristics -----------------------------------------------------

/// Midpoint of the table's thrust range, scaled by the cluster size [N].
inline double reference_thrust(const EngineCluster& cluster) {
    double lo = cluster.table[0].thrust_mn, hi = lo;
    for (std::size_t i = 1; i < cluster.table.size(); ++i) {
        lo = std::min(lo, cluster.table[i].thrust_mn);
        hi = std::max(hi, cluster.table[i].thrust_mn);
    }
    return 0.5 * (lo + hi) * 1e-3 * cluster.num_engines;
}

/// Circular-to-circular velocity change |sqrt(mu/rf) - sqrt(mu/r0)| [m/s].
inline double edelbaum_delta_v(double mu, double r0, double rf) {
    if (!(mu > 0.0) || !(r0 > 0.0) || !(rf > 0.0))
        throw std::invalid_argument("edelbaum_delta_v: mu, r0, rf must be positive");
    return std::abs(std::sqrt(mu / rf) - std::sqrt(mu / r0));
}

/// Time-of-flight estimate delta_v * m_initial / T_ref [s]. Degenerate
/// transfers (r0 == rf) fall back to one circular period so downstream
/// consumers always see a positive duration.
inline double tf_heuristic(double mu, double r0, double rf, double m_initial,
                           const EngineCluster& cluster) {
    const double dv = edelbaum_delta_v(mu, r0, rf);
    const double t_ref = dv * m_initial / reference_thrust(cluster);
    const double period = 2.0 * std::numbers::pi * std::sqrt(r0 * r0 * r0 / mu);
    return t_ref > 0.0 ? t_ref : period;
}

/// Revolution count: transfer duration over the mean circular period,
/// rounded up and floored at one.
inline int revs_heuristic(double mu, double r0, double rf, double t_f) {
    const double r_bar = 0.5 * (r0 + rf);
    const double period = 2.0 * std::numbers::pi * std::sqrt(r_bar * r_bar * r_bar / mu);
    return std::max(1, static_cast<int>(std::ceil(t_f / period)));
}

/// Linear mass profile from the table mode nearest the reference thrust.
inline MassProfile mass_profile_guess(const EngineCluster& cluster, double m_initial) {
    if (!(m_initial > 0.0))
        throw std::invalid_argument("mass_profile_guess: m_initial must be positive");
    const double t_ref_mn = reference_thrust(cluster) / cluster.num_engines * 1e3;
    std::size_t best = 0;
    for (std::size_t i = 1; i < cluster.table.size(); ++i) {
        if (std::abs(cluster.table[i].thrust_mn - t_ref_mn) <
            std::abs(cluster.table[best].thrust_mn - t_ref_mn))
            best = i;
    }
    return {m_initial, cluster.table[best].mdot_mg_s * 1e-6 * cluster.num_engines};
}

// --- shape fitting -----------------------------------------------------------

namespace detail {

inline Eigen::RowVectorXd ffs_value_row(int n, double tau) {
    Eigen::RowVectorXd row(2 * n + 2);
    row(0) = 1.0;
    row(1) = tau;
    for (int k = 1; k <= n; ++k) {
        const double w = k * std::numbers::pi * tau;
        row(1 + k) = std::cos(w);
        row(1 + n + k) = std::sin(w);
    }
    return row;
}

inline Eigen::RowVectorXd ffs_deriv_row(int n, double tau) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(2 * n + 2);
    row(1) = 1.0;
    for (int k = 1; k <= n; ++k) {
        const double kp = k * std::numbers::pi;
        const double w = kp * tau;
        row(1 + k) = -kp * std::sin(w);
        row(1 + n + k) = kp * std::cos(w);
    }
    return row;
}

constexpr int kFitSamples = 201;  // uniform LSQ sample count on [0, 1]

/// Least squares of basis coefficients against kFitSamples uniform targets,
/// subject to the four linear boundary conditions C x = d.
inline Eigen::VectorXd constrained_fit(int n, const Eigen::MatrixXd& C, const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& targets) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    if (lu.rank() < C.rows()) {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
        const auto& sv = svd.singularValues();
        const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                    : std::numeric_limits<double>::infinity();
        throw std::runtime_error(
            "fit_shape: boundary-condition system is singular (condition number " +
            std::to_string(cond) + ")");
    }
    const Eigen::MatrixXd kernel = lu.kernel();
    const Eigen::VectorXd particular = C.completeOrthogonalDecomposition().solve(d);

    Eigen::MatrixXd A(kFitSamples, 2 * n + 2);
    for (int i = 0; i < kFitSamples; ++i)
        A.row(i) = ffs_value_row(n, static_cast<double>(i) / (kFitSamples - 1));
    const Eigen::VectorXd rhs = targets - A * particular;
    const Eigen::MatrixXd AN = A * kernel;
    const Eigen::VectorXd z = AN.colPivHouseholderQr().solve(rhs);
    return particular + kernel * z;
}

/// 6 tau^5 - 15 tau^4 + 10 tau^3: zero first and second derivatives at both
/// ends, monotone in between.
inline double smoothstep5(double tau) { return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau)); }

}  // namespace detail

/**
 * Fits the shape series to monotone reference curves under the transfer's
 * boundary conditions: circular endpoints for r (zero radial rate) and
 * circular angular rates for theta, which climbs from 0 to 2*pi*revs.
 */
inline FourierShape fit_shape(double mu, double r0, double rf, int revs, double t_f_guess,
                              int n_terms = 10) {
    if (!(mu > 0.0)) throw std::invalid_argument("fit_shape: mu must be positive");
    if (!(r0 > 0.0) || !(rf > 0.0))
        throw std::invalid_argument("fit_shape: r0 and rf must be positive");
    if (revs < 1) throw std::invalid_argument("fit_shape: revs must be >= 1");
    if (n_terms < 3) throw std::invalid_argument("fit_shape: n_terms must be >= 3");
    if (!(t_f_guess > 0.0)) throw std::invalid_argument("fit_shape: t_f_guess must be positive");

    const int n = n_terms;
    Eigen::MatrixXd C(4, 2 * n + 2);
    C.row(0) = detail::ffs_value_row(n, 0.0);
    C.row(1) = detail::ffs_value_row(n, 1.0);
    C.row(2) = detail::ffs_deriv_row(n, 0.0);
    C.row(3) = detail::ffs_deriv_row(n, 1.0);

    FourierShape shape;
    shape.n_terms = n;
    shape.t_f_guess = t_f_guess;
    shape.mu = mu;
    shape.revs = revs;

    // Radius reference: constant-tangential-thrust spiral (1/sqrt(r) linear
    // in warped time) composed with a quintic ease so the endpoint radial
    // rates and accelerations vanish. A plain blend between the radii would
    // demand large radial thrust components that a spiral never uses.
    const double inv_a = 1.0 / std::sqrt(r0);
    const double inv_b = 1.0 / std::sqrt(rf) - inv_a;
    const auto r_ref = [&](double tau) {
        const double u = inv_a + inv_b * detail::smoothstep5(tau);
        return 1.0 / (u * u);
    };
    const auto r_ref_dd = [&](double tau) {  // d^2 r / dtau^2
        const double w = detail::smoothstep5(tau);
        const double wp = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
        const double wpp = 60.0 * tau - 180.0 * tau * tau + 120.0 * tau * tau * tau;
        const double u = inv_a + inv_b * w;
        const double drdw = -2.0 * inv_b / (u * u * u);
        const double d2rdw2 = 6.0 * inv_b * inv_b / (u * u * u * u);
        return d2rdw2 * wp * wp + drdw * wpp;
    };
    Eigen::VectorXd targets(detail::kFitSamples);
    for (int i = 0; i < detail::kFitSamples; ++i)
        targets(i) = r_ref(static_cast<double>(i) / (detail::kFitSamples - 1));
    Eigen::VectorXd d(4);
    d << r0, rf, 0.0, 0.0;
    shape.radius.n_terms = n;
    shape.radius.coeff = detail::constrained_fit(n, C, d, targets);

    // Angular reference: the rate that balances radial forces with zero
    // radial thrust along the radius reference (circular at the ends where
    // the radial acceleration dies), integrated over tau, plus a smoothstep
    // correction that steers the total to the imposed revolution count
    // without touching endpoint values or rates.
    const auto omega_tau = [&](double tau) {
        const double rr = r_ref(tau);
        const double base = mu / (rr * rr * rr);
        const double balance = base + r_ref_dd(tau) / (t_f_guess * t_f_guess) / rr;
        return std::sqrt(std::max(balance, 0.01 * base)) * t_f_guess;  // dtheta/dtau
    };
    const double theta_total = 2.0 * std::numbers::pi * revs;
    Eigen::VectorXd theta_raw(detail::kFitSamples);
    theta_raw(0) = 0.0;
    const double h = 1.0 / (detail::kFitSamples - 1);
    for (int i = 1; i < detail::kFitSamples; ++i) {
        const double a = (i - 1) * h;
        double seg = 0.0;  // Simpson on four substeps
        for (int j = 0; j < 4; ++j) {
            const double lo = a + j * h / 4.0;
            seg += h / 24.0 * (omega_tau(lo) + 4.0 * omega_tau(lo + h / 8.0) +
                               omega_tau(lo + h / 4.0));
        }
        theta_raw(i) = theta_raw(i - 1) + seg;
    }
    shape.natural_angle = theta_raw(detail::kFitSamples - 1);
    const double deficit = theta_total - shape.natural_angle;
    for (int i = 0; i < detail::kFitSamples; ++i)
        targets(i) = theta_raw(i) + deficit * detail::smoothstep5(i * h);

    const double om0 = omega_tau(0.0);  // dtheta/dtau at 0
    const double om1 = omega_tau(1.0);  // dtheta/dtau at 1
    d << 0.0, theta_total, om0, om1;
    shape.angle.n_terms = n;
    shape.angle.coeff = detail::constrained_fit(n, C, d, targets);

    for (int i = 0; i <= 1000; ++i) {  // invariant: positive radius on [0, 1]
        if (!(shape.radius.value(i / 1000.0) > 0.0))
            throw std::runtime_error("fit_shape: fitted radius is not positive on [0, 1]");
    }
    return shape;
}

// --- inverse dynamics --------------------------------------------------------

/**
 * Recovers the thrust magnitude and steering angle that make the shape
 * satisfy the kinematic equations of motion exactly, sampling on a uniform
 * dense grid. The steering angle is unwrapped for continuity; the mass row
 * follows the linear profile (its flow-rate error is the NLP's to absorb).
 */
inline DenseGuess inverse_controls(const FourierShape& shape, const MassProfile& profile,
                                   const EngineCluster& cluster, int n_dense = 401) {
    if (n_dense < 2) throw std::invalid_argument("inverse_controls: n_dense must be >= 2");
    if (!(profile.m_initial > 0.0))
        throw std::invalid_argument("inverse_controls: mass profile must start positive");
    const double tf = shape.t_f_guess;
    double t_max_n = 0.0;
    for (std::size_t i = 0; i < cluster.table.size(); ++i)
        t_max_n = std::max(t_max_n, cluster.table[i].thrust_mn);
    t_max_n *= 1e-3 * cluster.num_engines;

    DenseGuess out;
    out.t_f = tf;
    out.points.resize(n_dense);
    double prev_alpha = 0.0;
    for (int i = 0; i < n_dense; ++i) {
        const double tau = static_cast<double>(i) / (n_dense - 1);
        GuessPoint& p = out.points[i];
        p.tau = tau;
        p.t = tau * tf;

        const double r = shape.radius.value(tau);
        if (!(r > 0.0)) throw std::domain_error("inverse_controls: nonpositive radius");
        const double rp = shape.radius.deriv(tau);
        const double rpp = shape.radius.deriv2(tau);
        const double hp = shape.angle.deriv(tau);
        const double hpp = shape.angle.deriv2(tau);

        const double theta_dot = hp / tf;
        p.state.r = r;
        p.state.theta = shape.angle.value(tau);
        p.state.v_r = rp / tf;
        p.state.v_theta = r * theta_dot;
        p.state.m = std::max(profile.m_initial - profile.mdot * p.t, 0.05 * profile.m_initial);
        p.mdot = profile.mdot;

        // T sin(alpha)/m = vdot_r - v_theta^2/r + mu/r^2,
        // T cos(alpha)/m = vdot_theta + v_r v_theta / r.
        const double a_r = rpp / (tf * tf) - r * theta_dot * theta_dot +
                           shape.mu / (r * r);
        const double a_t = (2.0 * rp * hp + r * hpp) / (tf * tf);
        p.thrust = p.state.m * std::hypot(a_r, a_t);

        double alpha = std::atan2(a_r, a_t);
        if (i == 0) {
            if (alpha < -0.5 * std::numbers::pi) alpha += 2.0 * std::numbers::pi;
        } else {
            while (alpha - prev_alpha > std::numbers::pi) alpha -= 2.0 * std::numbers::pi;
            while (prev_alpha - alpha > std::numbers::pi) alpha += 2.0 * std::numbers::pi;
        }
        prev_alpha = alpha;
        p.alpha = alpha;

        out.max_thrust_ratio = std::max(out.max_thrust_ratio, p.thrust / t_max_n);
    }
    out.thrust_exceeds_table = out.max_thrust_ratio > 1.0;
    return out;
}

// --- resampling --------------------------------------------------------------

namespace detail {

/// Catmull-Rom value at query t over uniformly spaced samples: cubic Hermite
/// with central-difference tangents, one-sided at the ends. Reproduces knots.
inline double catmull_rom(const std::vector<double>& ts, const std::vector<double>& ys,
                          double t) {
    const std::size_t n = ts.size();
    if (t <= ts.front()) return ys.front();
    if (t >= ts.back()) return ys.back();
    std::size_t i = static_cast<std::size_t>((std::upper_bound(ts.begin(), ts.end(), t) -
                                              ts.begin())) - 1;
    i = std::min(i, n - 2);
    const double h = ts[i + 1] - ts[i];
    const double u = (t - ts[i]) / h;
    const double m0 = i == 0 ? (ys[1] - ys[0]) : 0.5 * (ys[i + 1] - ys[i - 1]);
    const double m1 = i + 2 >= n ? (ys[n - 1] - ys[n - 2]) : 0.5 * (ys[i + 2] - ys[i]);
    const double u2 = u * u, u3 = u2 * u;
    return (2.0 * u3 - 3.0 * u2 + 1.0) * ys[i] + (u3 - 2.0 * u2 + u) * m0 +
           (-2.0 * u3 + 3.0 * u2) * ys[i + 1] + (u3 - u2) * m1;
}

}  // namespace detail

/**
 * Commanded power whose blended cluster thrust comes nearest the requested
 * magnitude, clamped to the table's power range. The table is not
 * thrust-monotone in power (neighboring modes trade thrust for efficiency),
 * so the blend wiggles: a dense scan locates the globally nearest bracket
 * and golden-section refinement polishes it.
 */
inline double power_for_thrust(const EngineCluster& cluster, double thrust_n) {
    const double p_lo = cluster.min_power();
    const double p_hi = cluster.max_power();
    constexpr int kScan = 1024;
    const auto miss = [&](double p) { return std::abs(cluster_thrust(cluster, p) - thrust_n); };

    int best = 0;
    double best_miss = miss(p_lo);
    for (int i = 1; i <= kScan; ++i) {
        const double p = p_lo + (p_hi - p_lo) * i / kScan;
        const double d = miss(p);
        if (d < best_miss) {
            best_miss = d;
            best = i;
        }
    }
    double a = p_lo + (p_hi - p_lo) * std::max(0, best - 1) / kScan;
    double b = p_lo + (p_hi - p_lo) * std::min(kScan, best + 1) / kScan;
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double f1 = miss(x1), f2 = miss(x2);
    for (int it = 0; it < 80 && b - a > 1e-9 * p_hi; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = miss(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = miss(x2);
        }
    }
    return 0.5 * (a + b);
}

/**
 * Interpolates the dense guess onto transcription node times (piecewise
 * cubic); the commanded power at each node inverts the blended thrust curve
 * for the nearest achievable thrust. Times are clamped into [0, t_f].
 */
inline std::vector<NodeGuess> resample_to_grid(const DenseGuess& dense,
                                               const EngineCluster& cluster,
                                               const std::vector<double>& times) {
    if (dense.points.size() < 2)
        throw std::invalid_argument("resample_to_grid: dense guess needs >= 2 points");
    const std::size_t n = dense.points.size();
    std::vector<double> ts(n), r(n), th(n), vr(n), vt(n), m(n), tr(n), al(n);
    for (std::size_t i = 0; i < n; ++i) {
        const GuessPoint& p = dense.points[i];
        ts[i] = p.t;
        r[i] = p.state.r;
        th[i] = p.state.theta;
        vr[i] = p.state.v_r;
        vt[i] = p.state.v_theta;
        m[i] = p.state.m;
        tr[i] = p.thrust;
        al[i] = p.alpha;
    }
    std::vector<NodeGuess> out;
    out.reserve(times.size());
    for (double t_raw : times) {
        const double t = std::clamp(t_raw, 0.0, dense.t_f);
        NodeGuess g;
        g.t = t;
        g.state.r = detail::catmull_rom(ts, r, t);
        g.state.theta = detail::catmull_rom(ts, th, t);
        g.state.v_r = detail::catmull_rom(ts, vr, t);
        g.state.v_theta = detail::catmull_rom(ts, vt, t);
        g.state.m = detail::catmull_rom(ts, m, t);
        g.alpha = detail::catmull_rom(ts, al, t);
        g.p_e = power_for_thrust(cluster, detail::catmull_rom(ts, tr, t));
        out.push_back(g);
    }
    return out;
}

}  // namespace spiralmdo
