#pragma once

#include <spiralmdo/dynamics.hpp>
#include <spiralmdo/fourier_guess.hpp>
#include <spiralmdo/nlp.hpp>
#include <spiralmdo/power.hpp>
#include <spiralmdo/propulsion.hpp>
#include <spiralmdo/radau.hpp>
#include <spiralmdo/scaling.hpp>
#include <spiralmdo/scenario_config.hpp>
#include <spiralmdo/sizing.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spiralmdo {

namespace detail {

/**
 * Flipped Legendre-Gauss-Radau points on (-1, 1]: the reflected roots of
 * P_{q-1} + P_q. The right endpoint is always a node, so every segment owns
 * its exit state and the terminal state is a plain decision variable.
 */
inline std::vector<double> radau_points_flipped(int q) {
    if (q < 2) throw std::invalid_argument("radau_points_flipped: order must be >= 2");
    const auto residual = [q](double x) {
        double pa, dpa, pb, dpb;
        legendre(q - 1, x, pa, dpa);
        legendre(q, x, pb, dpb);
        return pa + pb;
    };
    // x = -1 is always a root; the q-1 interior roots are simple, so a fine
    // scan brackets each one and bisection pins it down.
    std::vector<double> roots{-1.0};
    const int kScan = 200 * q;
    double prev_x = -1.0 + 1e-9, prev_f = residual(prev_x);
    for (int i = 1; i <= kScan; ++i) {
        const double x = -1.0 + 1e-9 + (2.0 - 2e-9) * i / kScan;
        const double f = residual(x);
        if (prev_f == 0.0) roots.push_back(prev_x);
        else if (prev_f * f < 0.0) {
            double lo = prev_x, hi = x, flo = prev_f;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = residual(mid);
                if (flo * fm <= 0.0) hi = mid;
                else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = f;
    }
    if (static_cast<int>(roots.size()) != q)
        throw std::logic_error("radau_points_flipped: root count mismatch");
    std::vector<double> flipped(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i)
        flipped[i] = -roots[roots.size() - 1 - i];
    flipped.back() = 1.0;  // exact by construction
    return flipped;
}

/// Weights w_j = 1 / prod_{k != j}(eta_j - eta_k) of the Lagrange basis.
inline std::vector<double> barycentric_weights(const std::vector<double>& eta) {
    const std::size_t n = eta.size();
    std::vector<double> w(n, 1.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            if (k != j) w[j] /= (eta[j] - eta[k]);
    return w;
}

/// Basis values ell_j(z); exact unit vector when z coincides with a point.
inline std::vector<double> lagrange_values(const std::vector<double>& eta, double z) {
    const std::size_t n = eta.size();
    std::vector<double> vals(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(z - eta[j]) < 1e-13) {
            vals[j] = 1.0;
            return vals;
        }
    }
    const auto w = barycentric_weights(eta);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        vals[j] = w[j] / (z - eta[j]);
        sum += vals[j];
    }
    for (auto& v : vals) v /= sum;
    return vals;
}

/// Basis derivatives ell_j'(z) for z on or off the point set.
inline std::vector<double> lagrange_derivs(const std::vector<double>& eta, double z) {
    const std::size_t n = eta.size();
    const auto w = barycentric_weights(eta);
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(z - eta[i]) < 1e-13) {
            // z is point i: standard node-derivative formulas.
            double diag = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                d[j] = (w[j] / w[i]) / (eta[i] - eta[j]);
                diag -= d[j];
            }
            d[i] = diag;
            return d;
        }
    }
    // Off the point set: ell_j(z) = L(z) w_j / (z - eta_j) with the node
    // polynomial L; differentiate the product form directly.
    double L = 1.0, dL = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        dL = dL * (z - eta[k]) + L;
        L *= (z - eta[k]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double dz = z - eta[j];
        d[j] = w[j] * (dL * dz - L) / (dz * dz);
    }
    return d;
}

}  // namespace detail

/// Physical control values interpolated at one normalized time.
struct ControlSample {
    double p_e = 0.0;    // per-engine electrical power [W]
    double alpha = 0.0;  // steering angle [rad]
};

/// Node-aligned starting point for the solver.
struct TranscriptionGuess {
    std::vector<NodeGuess> nodes;  // one per collocation node, in node order
    double t_f = 0.0;              // [s]
    double area = 0.0;             // [m^2]; 0 falls back to the config area
};

/// Collocation residual summary for diagnostics and convergence gating.
struct DefectReport {
    Eigen::MatrixXd segment_norms;      // n_segments x 5, l2 per state [-]
    std::vector<double> segment_start;  // physical segment start times [s]
    Eigen::VectorXd violations;         // per-row constraint violation [-]
    double max_defect = 0.0;            // [-]
    double rms_defect = 0.0;            // [-]
    double max_violation = 0.0;         // [-]
};

/// Normalized collocation node positions on [0, 1] for a grid (node-major).
inline std::vector<double> collocation_times(const GridSpec& grid) {
    grid.validate();
    const auto xi = detail::radau_points_flipped(grid.nodes_per_segment);
    std::vector<double> s_nodes;
    s_nodes.reserve(static_cast<std::size_t>(grid.n_segments) * xi.size());
    double start = 0.0;
    for (int s = 0; s < grid.n_segments; ++s) {
        const double w = grid.width(s);
        for (double x : xi) s_nodes.push_back(start + 0.5 * w * (x + 1.0));
        start += w;
    }
    s_nodes.back() = 1.0;  // guard accumulation roundoff
    return s_nodes;
}

/**
 * The transfer as a sparse NLP, built by flipped-Radau collocation.
 *
 * Decision vector (scaled): states at every collocation node, controls
 * (P_E, alpha) at every collocation node, then t_f and A_SA — exactly
 * N_nodes*(5+2)+2 entries. The initial state is not a variable: segment one
 * interpolates from the fixed departure state (whose mass term carries the
 * area coupling), so the initial conditions hold by construction and the
 * right-inclusive nodes make the terminal state an ordinary variable.
 *
 * Constraint vector: 5*N_nodes collocation defects, 3 terminal conditions,
 * 2*N_nodes path rows (power ceiling, dry-mass floor), and 3 per interior
 * boundary for control continuity (alpha value, alpha rate, P_E value).
 * The v_r and alpha path boxes are variable bounds.
 *
 * Immutable after construction; evaluations are pure functions of x.
 */
class TranscribedProblem : public NlpProblem {
  public:
    TranscribedProblem(const GridSpec& grid, const ScenarioConfig& scenario,
                       const TranscriptionGuess& guess)
        : cfg_(scenario), grid_(grid) {
        grid_.validate();
        // Only what the transcription itself needs; full scenario validation
        // (r0 != rf and friends) belongs to configuration loading, and the
        // degenerate circular problem is a legitimate test instance here.
        if (!(cfg_.body.mu > 0.0) || !(cfg_.orbits.r0 > 0.0) || !(cfg_.orbits.rf > 0.0))
            throw std::invalid_argument("transcription: mu and radii must be positive");
        if (!(cfg_.mass.area_min > 0.0) || cfg_.mass.area_max < cfg_.mass.area_min)
            throw std::invalid_argument("transcription: invalid area bounds");
        cfg_.propulsion.validate();
        K_ = grid_.n_segments;
        q_ = grid_.nodes_per_segment;
        N_ = K_ * q_;
        if (static_cast<int>(guess.nodes.size()) != N_)
            throw std::invalid_argument("transcription: guess has " +
                                        std::to_string(guess.nodes.size()) +
                                        " nodes, grid expects " + std::to_string(N_));
        if (!(guess.t_f > 0.0))
            throw std::invalid_argument("transcription: guess t_f must be positive");

        coupled_ = cfg_.mode == DesignMode::kCoupled;
        const double area0 =
            std::clamp(guess.area > 0.0 ? guess.area : cfg_.power.area,
                       cfg_.mass.area_min, cfg_.mass.area_max);
        const double m0 = coupled_
                              ? initial_mass(cfg_.mass, cfg_.propulsion.num_engines, area0)
                              : baseline_initial_mass(cfg_);
        scales_ = cfg_.scaled ? ScaleSet::canonical(cfg_.orbits.r0, cfg_.body.mu, m0)
                              : ScaleSet::identity();
        // Solar arrays of interest span tens of square meters.
        area_scale_ = cfg_.scaled ? 100.0 : 1.0;
        power_scale_ = scales_.power();
        sv_ << scales_.length, 1.0, scales_.velocity(), scales_.velocity(), scales_.mass;

        xi_ = detail::radau_points_flipped(q_);
        std::vector<double> support{-1.0};
        support.insert(support.end(), xi_.begin(), xi_.end());
        D_.resize(q_, q_ + 1);
        for (int i = 0; i < q_; ++i) {
            const auto row = detail::lagrange_derivs(support, xi_[static_cast<std::size_t>(i)]);
            for (int j = 0; j <= q_; ++j) D_(i, j) = row[static_cast<std::size_t>(j)];
        }
        lagm1_ = detail::lagrange_values(xi_, -1.0);
        dlagm1_ = detail::lagrange_derivs(xi_, -1.0);
        dlagp1_ = detail::lagrange_derivs(xi_, 1.0);

        seg_start_.resize(static_cast<std::size_t>(K_) + 1, 0.0);
        for (int s = 0; s < K_; ++s)
            seg_start_[static_cast<std::size_t>(s) + 1] =
                seg_start_[static_cast<std::size_t>(s)] + grid_.width(s);
        seg_start_.back() = 1.0;
        s_node_ = collocation_times(grid_);

        // Fixed departure state; the mass slot is affine in the scaled area.
        entry_state_ << cfg_.orbits.r0 / scales_.length, 0.0, 0.0,
            std::sqrt(cfg_.body.mu / cfg_.orbits.r0) / scales_.velocity(), 0.0;
        if (coupled_) {
            m_entry_const_ =
                initial_mass(cfg_.mass, cfg_.propulsion.num_engines, 0.0) / scales_.mass;
            m_entry_slope_ = mass_area_slope(cfg_.mass) * area_scale_ / scales_.mass;
        } else {
            m_entry_const_ = baseline_initial_mass(cfg_) / scales_.mass;
            m_entry_slope_ = 0.0;
        }

        tf_guess_ = guess.t_f;
        build_initial_guess(guess, area0);
        walk_jacobian(nullptr, [this](int r, int c, double) {
            jrows_.push_back(r);
            jcols_.push_back(c);
        });
    }

    // --- layout ---------------------------------------------------------
    int num_nodes() const { return N_; }
    int num_segments() const { return K_; }
    int order() const { return q_; }
    int state_index(int node, int comp) const { return 5 * node + comp; }
    int control_pe_index(int node) const { return 5 * N_ + 2 * node; }
    int control_alpha_index(int node) const { return 5 * N_ + 2 * node + 1; }
    int index_tf() const { return 7 * N_; }
    int index_area() const { return 7 * N_ + 1; }
    double node_time_normalized(int node) const {
        return s_node_[static_cast<std::size_t>(node)];
    }
    const ScaleSet& scales() const { return scales_; }
    const ScenarioConfig& config() const { return cfg_; }
    double area_scale() const { return area_scale_; }
    bool coupled() const { return coupled_; }

    /// Conventional condition tally: four path conditions per node (power
    /// ceiling, dry-mass floor, v_r box, alpha box) plus seven boundary
    /// conditions; boxes and the substituted departure state count as
    /// conditions here even though they are not residual rows.
    int table_style_constraint_count() const { return 4 * N_ + 7; }

    // --- NlpProblem -------------------------------------------------------
    int num_variables() const override { return 7 * N_ + 2; }
    int num_constraints() const override { return 7 * N_ + 3 * K_; }

    void variable_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
        const int n = num_variables();
        lower.resize(n);
        upper.resize(n);
        const double r_hi = 100.0 * std::max(cfg_.orbits.r0, cfg_.orbits.rf);
        const double v_hi = 100.0 * std::sqrt(cfg_.body.mu / std::min(cfg_.orbits.r0, cfg_.orbits.rf));
        const double m_anchor = m_entry_const_ * scales_.mass +
                                (coupled_ ? mass_area_slope(cfg_.mass) * cfg_.power.area : 0.0);
        for (int g = 0; g < N_; ++g) {
            lower(state_index(g, 0)) = std::max(cfg_.body.r_min, 1e-12) / scales_.length;
            upper(state_index(g, 0)) = r_hi / scales_.length;
            lower(state_index(g, 1)) = -1e3;
            upper(state_index(g, 1)) = 1e3;
            lower(state_index(g, 2)) = -10.0 / scales_.velocity();
            upper(state_index(g, 2)) = 10.0 / scales_.velocity();
            lower(state_index(g, 3)) = -v_hi / scales_.velocity();
            upper(state_index(g, 3)) = v_hi / scales_.velocity();
            lower(state_index(g, 4)) = 0.01 * m_anchor / scales_.mass;
            upper(state_index(g, 4)) = 10.0 * m_anchor / scales_.mass;
            lower(control_pe_index(g)) = cfg_.propulsion.min_power() / power_scale_;
            upper(control_pe_index(g)) = cfg_.propulsion.max_power() / power_scale_;
            lower(control_alpha_index(g)) = 0.5 * std::numbers::pi;
            upper(control_alpha_index(g)) = 1.5 * std::numbers::pi;
        }
        lower(index_tf()) = 0.1 * tf_guess_ / scales_.time;
        upper(index_tf()) = 10.0 * tf_guess_ / scales_.time;
        if (coupled_) {
            lower(index_area()) = cfg_.mass.area_min / area_scale_;
            upper(index_area()) = cfg_.mass.area_max / area_scale_;
        } else {
            lower(index_area()) = cfg_.power.area / area_scale_;
            upper(index_area()) = cfg_.power.area / area_scale_;
        }
    }

    void constraint_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
        const int m = num_constraints();
        lower = Eigen::VectorXd::Zero(m);
        upper = Eigen::VectorXd::Zero(m);
        const double inf = std::numeric_limits<double>::infinity();
        for (int g = 0; g < N_; ++g) {
            lower(path_power_row(g)) = -inf;
            lower(path_mass_row(g)) = -inf;
        }
    }

    double objective(const Eigen::VectorXd& x) const override { return x(index_tf()); }

    Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(num_variables());
        (void)x;
        g(index_tf()) = 1.0;
        return g;
    }

    Eigen::VectorXd constraints(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(num_constraints());
        const double that_f = x(index_tf());
        // A frozen area ignores the pinned slot so the function is genuinely
        // flat along that coordinate.
        const double a_hat = coupled_ ? x(index_area()) : cfg_.power.area / area_scale_;
        const double area_phys = a_hat * area_scale_;

        for (int s = 0; s < K_; ++s) {
            const double tauw = 0.5 * that_f * grid_.width(s);
            Eigen::Matrix<double, 5, 1> entry = entry_state_;
            if (s == 0) {
                entry(4) = m_entry_const_ + m_entry_slope_ * a_hat;
            } else {
                const int prev = s * q_ - 1;
                for (int comp = 0; comp < 5; ++comp) entry(comp) = x(state_index(prev, comp));
            }
            for (int i = 0; i < q_; ++i) {
                const int g = s * q_ + i;
                Eigen::Matrix<double, 5, 1> fhat;
                bool ok = true;
                try {
                    fhat = node_rate(x, g);
                } catch (const std::domain_error&) {
                    ok = false;  // flag the rows; the solver rejects the point
                }
                for (int comp = 0; comp < 5; ++comp) {
                    if (!ok) {
                        c(defect_row(g, comp)) = std::numeric_limits<double>::quiet_NaN();
                        continue;
                    }
                    double acc = D_(i, 0) * entry(comp);
                    for (int j = 1; j <= q_; ++j)
                        acc += D_(i, j) * x(state_index(s * q_ + j - 1, comp));
                    c(defect_row(g, comp)) = acc - tauw * fhat(comp);
                }
            }
        }

        const int last = N_ - 1;
        c(terminal_row(0)) = x(state_index(last, 0)) - cfg_.orbits.rf / scales_.length;
        c(terminal_row(1)) = x(state_index(last, 2));
        c(terminal_row(2)) = x(state_index(last, 3)) -
                             std::sqrt(cfg_.body.mu / cfg_.orbits.rf) / scales_.velocity();

        const double n_eng = static_cast<double>(cfg_.propulsion.num_engines);
        for (int g = 0; g < N_; ++g) {
            const double t_phys = s_node_[static_cast<std::size_t>(g)] * that_f * scales_.time;
            const auto pw = power_partials(cfg_.power, t_phys, area_phys);
            c(path_power_row(g)) = n_eng * x(control_pe_index(g)) - pw.p_avail / power_scale_;
            c(path_mass_row(g)) =
                dry_mass(cfg_.mass, cfg_.propulsion.num_engines, area_phys) / scales_.mass -
                x(state_index(g, 4));
        }

        for (int b = 0; b + 1 < K_; ++b) {
            const int sl = b, sr = b + 1;
            const double wbar = 0.5 * (grid_.width(sl) + grid_.width(sr));
            double aval = -x(control_alpha_index(sl * q_ + q_ - 1));
            double pval = -x(control_pe_index(sl * q_ + q_ - 1));
            double arate = 0.0;
            for (int j = 0; j < q_; ++j) {
                aval += lagm1_[static_cast<std::size_t>(j)] * x(control_alpha_index(sr * q_ + j));
                pval += lagm1_[static_cast<std::size_t>(j)] * x(control_pe_index(sr * q_ + j));
                arate += wbar * dlagp1_[static_cast<std::size_t>(j)] / grid_.width(sl) *
                         x(control_alpha_index(sl * q_ + j));
                arate -= wbar * dlagm1_[static_cast<std::size_t>(j)] / grid_.width(sr) *
                         x(control_alpha_index(sr * q_ + j));
            }
            c(continuity_row(b, 0)) = aval;
            c(continuity_row(b, 1)) = arate;
            c(continuity_row(b, 2)) = pval;
        }
        return c;
    }

    void jacobian_sparsity(std::vector<int>& rows, std::vector<int>& cols) const override {
        rows = jrows_;
        cols = jcols_;
    }

    void jacobian_values(const Eigen::VectorXd& x, std::vector<double>& values) const override {
        values.clear();
        values.reserve(jrows_.size());
        walk_jacobian(&x, [&values](int, int, double v) { values.push_back(v); });
    }

    Eigen::VectorXd initial_guess() const override { return x0_; }

    // --- diagnostics ------------------------------------------------------
    struct ConstraintEval {
        double objective = 0.0;
        Eigen::VectorXd constraints;
    };

    ConstraintEval eval_constraints(const Eigen::VectorXd& x) const {
        return {objective(x), constraints(x)};
    }

    DefectReport defect_report(const Eigen::VectorXd& x) const {
        DefectReport rep;
        const Eigen::VectorXd c = constraints(x);
        Eigen::VectorXd cl, cu;
        constraint_bounds(cl, cu);
        rep.segment_norms = Eigen::MatrixXd::Zero(K_, 5);
        rep.segment_start.resize(static_cast<std::size_t>(K_));
        const double tf_phys = x(index_tf()) * scales_.time;
        double sum_sq = 0.0;
        for (int s = 0; s < K_; ++s) {
            rep.segment_start[static_cast<std::size_t>(s)] =
                seg_start_[static_cast<std::size_t>(s)] * tf_phys;
            for (int i = 0; i < q_; ++i)
                for (int comp = 0; comp < 5; ++comp) {
                    const double d = c(defect_row(s * q_ + i, comp));
                    rep.segment_norms(s, comp) += d * d;
                    rep.max_defect = std::max(rep.max_defect, std::abs(d));
                    sum_sq += d * d;
                }
            for (int comp = 0; comp < 5; ++comp)
                rep.segment_norms(s, comp) = std::sqrt(rep.segment_norms(s, comp));
        }
        rep.rms_defect = std::sqrt(sum_sq / (5.0 * N_));
        rep.violations.resize(num_constraints());
        for (int i = 0; i < num_constraints(); ++i) {
            const double v = std::max({0.0, c(i) - cu(i), cl(i) - c(i)});
            rep.violations(i) = v;
            rep.max_violation = std::max(rep.max_violation, v);
        }
        return rep;
    }

    /// Controls interpolated at normalized time s in [0, 1], physical units.
    /// Uses the same segment-local Lagrange family as the transcription.
    ControlSample controls_at(const Eigen::VectorXd& x, double s) const {
        const double sc = std::clamp(s, 0.0, 1.0);
        // Boundary times belong to the left segment: its right-inclusive exit
        // node carries the stored control value there.
        int seg = K_ - 1;
        for (int k = 0; k < K_; ++k)
            if (sc <= seg_start_[static_cast<std::size_t>(k) + 1] + 1e-15 || k == K_ - 1) {
                seg = k;
                break;
            }
        const double w = grid_.width(seg);
        const double xi = 2.0 * (sc - seg_start_[static_cast<std::size_t>(seg)]) / w - 1.0;
        const auto vals = detail::lagrange_values(xi_, std::clamp(xi, -1.0, 1.0));
        ControlSample out;
        for (int j = 0; j < q_; ++j) {
            out.p_e += vals[static_cast<std::size_t>(j)] * x(control_pe_index(seg * q_ + j));
            out.alpha += vals[static_cast<std::size_t>(j)] * x(control_alpha_index(seg * q_ + j));
        }
        out.p_e *= power_scale_;
        return out;
    }

    /// Physical state stored at one collocation node.
    SpacecraftState node_state(const Eigen::VectorXd& x, int g) const {
        SpacecraftState st;
        st.r = x(state_index(g, 0)) * scales_.length;
        st.theta = x(state_index(g, 1));
        st.v_r = x(state_index(g, 2)) * scales_.velocity();
        st.v_theta = x(state_index(g, 3)) * scales_.velocity();
        st.m = x(state_index(g, 4)) * scales_.mass;
        return st;
    }

    /// Fixed departure state for a given decision vector (mass couples to the
    /// area in coupled mode).
    SpacecraftState departure_state(const Eigen::VectorXd& x) const {
        SpacecraftState st;
        st.r = entry_state_(0) * scales_.length;
        st.theta = 0.0;
        st.v_r = 0.0;
        st.v_theta = entry_state_(3) * scales_.velocity();
        const double a_hat = coupled_ ? x(index_area()) : 0.0;  // slope is zero anyway
        st.m = (m_entry_const_ + m_entry_slope_ * a_hat) * scales_.mass;
        return st;
    }

  private:
    int defect_row(int g, int comp) const { return 5 * g + comp; }
    int terminal_row(int k) const { return 5 * N_ + k; }
    int path_power_row(int g) const { return 5 * N_ + 3 + 2 * g; }
    int path_mass_row(int g) const { return 5 * N_ + 3 + 2 * g + 1; }
    int continuity_row(int b, int k) const { return 7 * N_ + 3 + 3 * b + k; }

    /// Scaled state rate at node g, including the throttle chain.
    Eigen::Matrix<double, 5, 1> node_rate(const Eigen::VectorXd& x, int g) const {
        const SpacecraftState st = node_state(x, g);
        const double pe_phys = x(control_pe_index(g)) * power_scale_;
        const auto pr = propulsion_partials(cfg_.propulsion, pe_phys);
        const ControlInput u{pr.thrust, x(control_alpha_index(g)), pr.mdot};
        return nondimensionalize_rate(eom(st, u, cfg_.body), scales_);
    }

    /// One walker produces both the sparsity pattern (x == nullptr) and the
    /// value array, guaranteeing identical ordering.
    template <class Emit>
    void walk_jacobian(const Eigen::VectorXd* x, Emit&& emit) const {
        const bool pat = x == nullptr;
        const double that_f = pat ? 0.0 : (*x)(index_tf());
        const double area_phys =
            pat ? 0.0 : (coupled_ ? (*x)(index_area()) * area_scale_ : cfg_.power.area);
        const double nan = std::numeric_limits<double>::quiet_NaN();

        for (int s = 0; s < K_; ++s) {
            const double halfw = 0.5 * grid_.width(s);
            const double tauw = that_f * halfw;
            for (int i = 0; i < q_; ++i) {
                const int g = s * q_ + i;
                Eigen::Matrix<double, 5, 1> fhat = Eigen::Matrix<double, 5, 1>::Zero();
                Eigen::Matrix<double, 5, 5> dfs = Eigen::Matrix<double, 5, 5>::Zero();
                Eigen::Matrix<double, 5, 1> dfp = Eigen::Matrix<double, 5, 1>::Zero();
                Eigen::Matrix<double, 5, 1> dfa = Eigen::Matrix<double, 5, 1>::Zero();
                bool ok = true;
                if (!pat) {
                    try {
                        const SpacecraftState st = node_state(*x, g);
                        const double pe_phys = (*x)(control_pe_index(g)) * power_scale_;
                        const auto pr = propulsion_partials(cfg_.propulsion, pe_phys);
                        const ControlInput u{pr.thrust, (*x)(control_alpha_index(g)), pr.mdot};
                        fhat = nondimensionalize_rate(eom(st, u, cfg_.body), scales_);
                        const auto jac = eom_partials(st, u, cfg_.body);
                        for (int c = 0; c < 5; ++c) {
                            const double rate_scale = sv_(c) / scales_.time;
                            for (int c2 = 0; c2 < 5; ++c2)
                                dfs(c, c2) = jac.wrt_state(c, c2) * sv_(c2) / rate_scale;
                            dfp(c) = (jac.wrt_control(c, 0) * pr.dthrust_dpe +
                                      jac.wrt_control(c, 2) * pr.dmdot_dpe) *
                                     power_scale_ / rate_scale;
                            dfa(c) = jac.wrt_control(c, 1) / rate_scale;
                        }
                    } catch (const std::domain_error&) {
                        ok = false;
                    }
                }
                for (int comp = 0; comp < 5; ++comp) {
                    const int row = defect_row(g, comp);
                    for (int j = 1; j <= q_; ++j) {
                        const int node = s * q_ + j - 1;
                        if (node == g) continue;
                        emit(row, state_index(node, comp), ok ? D_(i, j) : nan);
                    }
                    if (s > 0)
                        emit(row, state_index(s * q_ - 1, comp), ok ? D_(i, 0) : nan);
                    else if (comp == 4 && coupled_)
                        emit(row, index_area(), ok ? D_(i, 0) * m_entry_slope_ : nan);
                    for (int c2 = 0; c2 < 5; ++c2) {
                        const double lin = c2 == comp ? D_(i, i + 1) : 0.0;
                        emit(row, state_index(g, c2), ok ? lin - tauw * dfs(comp, c2) : nan);
                    }
                    if (comp == 2 || comp == 3)
                        emit(row, control_alpha_index(g), ok ? -tauw * dfa(comp) : nan);
                    if (comp >= 2)
                        emit(row, control_pe_index(g), ok ? -tauw * dfp(comp) : nan);
                    emit(row, index_tf(), ok ? -halfw * fhat(comp) : nan);
                }
            }
        }

        const int last = N_ - 1;
        emit(terminal_row(0), state_index(last, 0), 1.0);
        emit(terminal_row(1), state_index(last, 2), 1.0);
        emit(terminal_row(2), state_index(last, 3), 1.0);

        const double n_eng = static_cast<double>(cfg_.propulsion.num_engines);
        for (int g = 0; g < N_; ++g) {
            PowerEval pw;
            if (!pat) {
                const double t_phys = s_node_[static_cast<std::size_t>(g)] * that_f * scales_.time;
                pw = power_partials(cfg_.power, t_phys, area_phys);
            }
            emit(path_power_row(g), control_pe_index(g), n_eng);
            emit(path_power_row(g), index_tf(),
                 -pw.davail_dt * s_node_[static_cast<std::size_t>(g)] * scales_.time /
                     power_scale_);
            if (coupled_)
                emit(path_power_row(g), index_area(),
                     -pw.davail_darea * area_scale_ / power_scale_);
            emit(path_mass_row(g), state_index(g, 4), -1.0);
            if (coupled_)
                emit(path_mass_row(g), index_area(),
                     mass_area_slope(cfg_.mass) * area_scale_ / scales_.mass);
        }

        for (int b = 0; b + 1 < K_; ++b) {
            const int sl = b, sr = b + 1;
            const double wbar = 0.5 * (grid_.width(sl) + grid_.width(sr));
            emit(continuity_row(b, 0), control_alpha_index(sl * q_ + q_ - 1), -1.0);
            for (int j = 0; j < q_; ++j)
                emit(continuity_row(b, 0), control_alpha_index(sr * q_ + j),
                     lagm1_[static_cast<std::size_t>(j)]);
            for (int j = 0; j < q_; ++j)
                emit(continuity_row(b, 1), control_alpha_index(sl * q_ + j),
                     wbar * dlagp1_[static_cast<std::size_t>(j)] / grid_.width(sl));
            for (int j = 0; j < q_; ++j)
                emit(continuity_row(b, 1), control_alpha_index(sr * q_ + j),
                     -wbar * dlagm1_[static_cast<std::size_t>(j)] / grid_.width(sr));
            emit(continuity_row(b, 2), control_pe_index(sl * q_ + q_ - 1), -1.0);
            for (int j = 0; j < q_; ++j)
                emit(continuity_row(b, 2), control_pe_index(sr * q_ + j),
                     lagm1_[static_cast<std::size_t>(j)]);
        }
    }

    void build_initial_guess(const TranscriptionGuess& guess, double area0) {
        x0_.resize(num_variables());
        for (int g = 0; g < N_; ++g) {
            const auto& ng = guess.nodes[static_cast<std::size_t>(g)];
            x0_(state_index(g, 0)) = ng.state.r / scales_.length;
            x0_(state_index(g, 1)) = ng.state.theta;
            x0_(state_index(g, 2)) = ng.state.v_r / scales_.velocity();
            x0_(state_index(g, 3)) = ng.state.v_theta / scales_.velocity();
            x0_(state_index(g, 4)) = ng.state.m / scales_.mass;
            x0_(control_pe_index(g)) = ng.p_e / power_scale_;
            x0_(control_alpha_index(g)) = ng.alpha;
        }
        x0_(index_tf()) = guess.t_f / scales_.time;
        x0_(index_area()) = area0 / area_scale_;
        Eigen::VectorXd lb, ub;
        variable_bounds(lb, ub);
        x0_ = x0_.cwiseMax(lb).cwiseMin(ub);
    }

    ScenarioConfig cfg_;
    GridSpec grid_;
    int K_ = 0, q_ = 0, N_ = 0;
    bool coupled_ = true;
    ScaleSet scales_;
    double area_scale_ = 1.0;
    double power_scale_ = 1.0;
    double tf_guess_ = 0.0;
    Eigen::Matrix<double, 5, 1> sv_;
    std::vector<double> xi_;
    Eigen::MatrixXd D_;
    std::vector<double> lagm1_, dlagm1_, dlagp1_;
    std::vector<double> seg_start_, s_node_;
    Eigen::Matrix<double, 5, 1> entry_state_;
    double m_entry_const_ = 0.0, m_entry_slope_ = 0.0;
    Eigen::VectorXd x0_;
    std::vector<int> jrows_, jcols_;
};

/// Diagnostics CSV: one line per segment with the per-state defect norms.
inline void write_defect_csv(const DefectReport& rep, std::ostream& os) {
    os << "segment,start_time_s,defect_r,defect_theta,defect_v_r,defect_v_theta,defect_m\n";
    for (int s = 0; s < rep.segment_norms.rows(); ++s) {
        os << s << ',' << rep.segment_start[static_cast<std::size_t>(s)];
        for (int c = 0; c < 5; ++c) os << ',' << rep.segment_norms(s, c);
        os << '\n';
    }
}

}  // namespace spiralmdo
