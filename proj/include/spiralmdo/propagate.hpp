#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spiralmdo/dynamics.hpp"
#include "spiralmdo/power.hpp"
#include "spiralmdo/propulsion.hpp"
#include "spiralmdo/scaling.hpp"
#include "spiralmdo/scenario_config.hpp"
#include "spiralmdo/transcription.hpp"

namespace spiralmdo {

/**
 * One dense output sample along the flown trajectory: the propagated state
 * plus the commanded controls and the power chain evaluated at that instant.
 * All fields are SI.
 */
struct TrajectoryPoint {
    double t = 0.0;         // elapsed time [s]
    SpacecraftState state;  // propagated state
    double p_e = 0.0;       // commanded per-engine power [W]
    double alpha = 0.0;     // steering angle [rad]
    double thrust = 0.0;    // cluster thrust [N]
    double mdot = 0.0;      // cluster mass flow [kg/s]
    double p_sa = 0.0;      // array output [W]
    double p_avail = 0.0;   // propulsion power bound [W]
};

/**
 * Integration failure: the step controller underflowed, either because the
 * error estimate would not settle or because every retry re-entered a state
 * the dynamics reject (radius guard, nonpositive mass). Carries the physical
 * time at which the integration gave up.
 */
class PropagationError : public std::runtime_error {
  public:
    PropagationError(const std::string& reason, double t_fail_s)
        : std::runtime_error(reason + " at t = " + std::to_string(t_fail_s) + " s"),
          t_fail_(t_fail_s) {}
    double failure_time() const { return t_fail_; }

  private:
    double t_fail_;  // [s]
};

/**
 * Explicitly propagated trajectory and its mismatch against the collocation
 * nodes it was flown from. The history is the accepted-step sequence (time
 * strictly increasing, first entry the imposed departure state) and every
 * collocation node time is hit exactly, so the divergence metrics need no
 * interpolation. Divergence rows are signed propagated-minus-node values in
 * SI state units, ordered (r, theta, v_r, v_theta, m).
 */
struct PropagationResult {
    std::vector<TrajectoryPoint> history;
    double t_f = 0.0;                 // [s]
    Eigen::MatrixXd node_divergence;  // num_nodes x 5
    Eigen::Matrix<double, 5, 1> max_divergence = Eigen::Matrix<double, 5, 1>::Zero();
    Eigen::Matrix<double, 5, 1> rms_divergence = Eigen::Matrix<double, 5, 1>::Zero();
    long accepted_steps = 0;
    long rejected_steps = 0;
};

namespace detail {

/// Dormand-Prince 5(4) pair; the last stage row doubles as the 5th-order
/// weights (FSAL), and `e` holds the embedded error weights b5 - b4.
struct Dp54 {
    static constexpr int kStages = 7;
    static constexpr double c[kStages] = {0.0,       1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0,
                                          8.0 / 9.0, 1.0,       1.0};
    static constexpr double a[kStages][kStages - 1] = {
        {},
        {1.0 / 5.0},
        {3.0 / 40.0, 9.0 / 40.0},
        {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
        {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
        {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
        {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0}};
    static constexpr double e[kStages] = {71.0 / 57600.0,      0.0,          -71.0 / 16695.0,
                                          71.0 / 1920.0,       -17253.0 / 339200.0,
                                          22.0 / 525.0,        -1.0 / 40.0};
};

/// Classic recursive Simpson refinement with Richardson acceptance.
template <class F>
double adaptive_simpson_half(const F& f, double a, double fa, double b, double fb, double m,
                             double fm, double whole, double eps, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adaptive_simpson_half(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson_half(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_half(f, a, fa, b, fb, m, fm, whole, eps, depth);
}

}  // namespace detail

/**
 * Explicit adaptive verification of a transcription point: fly the commanded
 * control history (the transcription's own segment-wise interpolation of the
 * P_E and alpha variables) from the imposed departure state with an embedded
 * Dormand-Prince 5(4) pair, and measure how far the flown path drifts from
 * the collocation node states. The integration runs on the scaled state so
 * the tolerances mean the same thing at desk and asteroid scale.
 *
 * Throws PropagationError (with the failure time) on step underflow, which is
 * also how an unflyable command history surfaces: repeated rejections against
 * the dynamics guards shrink the step until it dies.
 */
inline PropagationResult propagate(const TranscribedProblem& problem, const Eigen::VectorXd& x,
                                   const PropagationConfig& rk = {}) {
    if (!(rk.abs_tol > 0.0) || !(rk.rel_tol > 0.0))
        throw std::invalid_argument("propagate: tolerances must be positive");
    if (x.size() != problem.num_variables())
        throw std::invalid_argument("propagate: decision vector has " +
                                    std::to_string(x.size()) + " entries, expected " +
                                    std::to_string(problem.num_variables()));

    const ScenarioConfig& cfg = problem.config();
    const ScaleSet& sc = problem.scales();
    const double that_f = x(problem.index_tf());
    if (!(that_f > 0.0)) throw std::invalid_argument("propagate: nonpositive flight time");
    const double area = (problem.coupled() ? x(problem.index_area())
                                           : cfg.power.area / problem.area_scale()) *
                        problem.area_scale();

    using Vec5 = Eigen::Matrix<double, 5, 1>;
    const auto rhs = [&](double that, const Vec5& yhat) -> Vec5 {
        const SpacecraftState st = redimensionalize(SpacecraftState::from_vec(yhat), sc);
        const ControlSample u = problem.controls_at(x, that / that_f);
        const auto pr = propulsion_partials(cfg.propulsion, u.p_e);
        return nondimensionalize_rate(eom(st, ControlInput{pr.thrust, u.alpha, pr.mdot}, cfg.body),
                                      sc);
    };
    const auto record = [&](double that, const Vec5& yhat) -> TrajectoryPoint {
        TrajectoryPoint pt;
        pt.t = that * sc.time;
        pt.state = redimensionalize(SpacecraftState::from_vec(yhat), sc);
        const ControlSample u = problem.controls_at(x, that / that_f);
        pt.p_e = u.p_e;
        pt.alpha = u.alpha;
        const auto pr = propulsion_partials(cfg.propulsion, u.p_e);
        pt.thrust = pr.thrust;
        pt.mdot = pr.mdot;
        const auto pw = power_partials(cfg.power, pt.t, area);
        pt.p_sa = pw.p_sa;
        pt.p_avail = pw.p_avail;
        return pt;
    };

    const int n_nodes = problem.num_nodes();
    PropagationResult out;
    out.t_f = that_f * sc.time;
    out.node_divergence.setZero(n_nodes, 5);

    Vec5 y = nondimensionalize(problem.departure_state(x), sc).vec();
    double t = 0.0;
    out.history.push_back(record(t, y));

    using Tab = detail::Dp54;
    Vec5 k[Tab::kStages];
    bool have_first_stage = false;
    // The controller's unconstrained preference; actual steps also clip to the
    // next node time so every node is hit exactly.
    double h_ctrl = 1e-3 * that_f;
    const double h_floor = 64.0 * std::numeric_limits<double>::epsilon() * that_f;
    int next_node = 0;
    const long max_steps = 5'000'000;

    while (next_node < n_nodes) {
        const double target = problem.node_time_normalized(next_node) * that_f;
        double h = target - t;
        bool clipped = true;  // ties land on the node so it gets recorded
        if (h > h_ctrl) {
            h = h_ctrl;
            clipped = false;
        }
        if (out.accepted_steps + out.rejected_steps >= max_steps)
            throw PropagationError("propagate: step budget exhausted", t * sc.time);
        if (!clipped && !(t + h > t))  // too small to advance the clock
            throw PropagationError("propagate: step size underflow", t * sc.time);

        double err = std::numeric_limits<double>::infinity();
        Vec5 y_new = y;
        try {
            if (!have_first_stage) {
                k[0] = rhs(t, y);
                have_first_stage = true;
            }
            for (int s = 1; s < Tab::kStages; ++s) {
                Vec5 ys = y;
                for (int j = 0; j < s; ++j) ys += h * Tab::a[s][j] * k[j];
                k[s] = rhs(t + Tab::c[s] * h, ys);
            }
            // Stage 7 is evaluated at the 5th-order endpoint, so its success
            // also vouches for y_new sitting inside the dynamics' domain.
            y_new = y;
            for (int j = 0; j < Tab::kStages - 1; ++j) y_new += h * Tab::a[6][j] * k[j];
            double sum_sq = 0.0;
            for (int c = 0; c < 5; ++c) {
                double e = 0.0;
                for (int j = 0; j < Tab::kStages; ++j) e += Tab::e[j] * k[j](c);
                e *= h;
                const double scale =
                    rk.abs_tol + rk.rel_tol * std::max(std::abs(y(c)), std::abs(y_new(c)));
                sum_sq += (e / scale) * (e / scale);
            }
            err = std::sqrt(sum_sq / 5.0);
        } catch (const std::domain_error&) {
            err = std::numeric_limits<double>::infinity();  // reject and shrink
        }

        if (err <= 1.0) {
            t = clipped ? target : t + h;
            y = y_new;
            k[0] = k[6];  // first-same-as-last
            const TrajectoryPoint pt = record(t, y);
            out.history.push_back(pt);
            ++out.accepted_steps;
            if (clipped) {
                const Vec5 dv = pt.state.vec() - problem.node_state(x, next_node).vec();
                out.node_divergence.row(next_node) = dv.transpose();
                ++next_node;
            }
            const double factor =
                err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
            h_ctrl = clipped ? std::max(h_ctrl, h * factor) : h * factor;
        } else {
            ++out.rejected_steps;
            const double factor =
                std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
            h_ctrl = h * factor;
            if (h_ctrl < h_floor)
                throw PropagationError("propagate: step size underflow", t * sc.time);
        }
    }

    for (int c = 0; c < 5; ++c) {
        out.max_divergence(c) = out.node_divergence.col(c).cwiseAbs().maxCoeff();
        out.rms_divergence(c) =
            std::sqrt(out.node_divergence.col(c).squaredNorm() / static_cast<double>(n_nodes));
    }
    return out;
}

/**
 * Propellant bookkeeping: the mass drop across the propagated history checked
 * against an independent quadrature of the commanded flow rate. The residual
 * is the verifier's verifier — it bounds how much of the reported consumption
 * is integrator artifact rather than commanded flow.
 */
struct MassAudit {
    double consumed = 0.0;    // m(0) - m(t_f) along the flown path [kg]
    double quadrature = 0.0;  // integral of the commanded mdot [kg]
    double residual = 0.0;    // |consumed - quadrature| [kg]
};

inline MassAudit mass_audit(const PropagationResult& result, const TranscribedProblem& problem,
                            const Eigen::VectorXd& x) {
    if (result.history.size() < 2)
        throw std::invalid_argument("mass_audit: history holds fewer than two points");
    MassAudit audit;
    audit.consumed = result.history.front().state.m - result.history.back().state.m;
    // Segment-wise quadrature in normalized time: the commanded flow is smooth
    // inside a segment but only C0 across boundaries, so integrate per segment.
    const auto flow = [&](double s) {
        return cluster_mdot(problem.config().propulsion, problem.controls_at(x, s).p_e);
    };
    const int q = problem.order();
    double total = 0.0;
    double left = 0.0;
    for (int seg = 0; seg < problem.num_segments(); ++seg) {
        const double right = problem.node_time_normalized((seg + 1) * q - 1);
        total += detail::adaptive_simpson(flow, left, right, 1e-14, 40);
        left = right;
    }
    audit.quadrature = total * result.t_f;
    audit.residual = std::abs(audit.consumed - audit.quadrature);
    return audit;
}

/// Dense trajectory table, one row per accepted step, SI units throughout.
inline void write_trajectory_csv(const PropagationResult& result, std::ostream& os) {
    os << "t,r,theta,v_r,v_theta,m,P_E,alpha,T,mdot,P_SA,P_avail\n";
    os << std::setprecision(17);
    for (const auto& p : result.history) {
        os << p.t << ',' << p.state.r << ',' << p.state.theta << ',' << p.state.v_r << ','
           << p.state.v_theta << ',' << p.state.m << ',' << p.p_e << ',' << p.alpha << ','
           << p.thrust << ',' << p.mdot << ',' << p.p_sa << ',' << p.p_avail << '\n';
    }
}

}  // namespace spiralmdo
