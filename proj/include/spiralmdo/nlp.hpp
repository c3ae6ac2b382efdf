#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spiralmdo {

/// Bound value treated as +-infinity, IPOPT convention.
inline constexpr double kNlpInfinity = 1e20;

/**
 * General sparse NLP:
 *
 *   min f(x)   s.t.  cl <= c(x) <= cu,   xl <= x <= xu.
 *
 * Rows with cl == cu are equalities. The Jacobian is exchanged in triplet
 * form: a fixed sparsity pattern plus values at a point, so any solver that
 * understands this contract can be plugged in.
 */
class NlpProblem {
  public:
    virtual ~NlpProblem() = default;

    virtual int num_variables() const = 0;
    virtual int num_constraints() const = 0;
    virtual void variable_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const = 0;
    virtual void constraint_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const = 0;

    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd constraints(const Eigen::VectorXd& x) const = 0;

    /// Pattern is fixed for the lifetime of the problem.
    virtual void jacobian_sparsity(std::vector<int>& rows, std::vector<int>& cols) const = 0;
    virtual void jacobian_values(const Eigen::VectorXd& x, std::vector<double>& values) const = 0;

    virtual Eigen::VectorXd initial_guess() const = 0;
};

enum class SolveStatus {
    kConverged,
    kMaxIterations,
    kInfeasible,
    kNumericalFailure,
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::kConverged: return "converged";
        case SolveStatus::kMaxIterations: return "max_iterations";
        case SolveStatus::kInfeasible: return "infeasible";
        case SolveStatus::kNumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

struct SolverOptions {
    double feasibility_tol = 1e-6;
    double optimality_tol = 1e-5;
    double initial_penalty = 10.0;
    double penalty_growth = 10.0;
    double max_penalty = 1e12;
    int max_outer_iterations = 60;
    int max_inner_iterations = 2000;
    int lbfgs_memory = 15;
    bool verbose = false;
};

/// One accepted outer iterate of the solver.
struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double max_violation = 0.0;
    double step_norm = 0.0;
    double penalty = 0.0;
};

struct SolveResult {
    SolveStatus status = SolveStatus::kNumericalFailure;
    Eigen::VectorXd x;
    double objective = 0.0;
    double max_violation = 0.0;
    double optimality = 0.0;
    Eigen::VectorXd multipliers;  // per row: equality lambda, or upper minus lower
    std::vector<IterationRecord> iterations;
    long objective_evals = 0;
    long gradient_evals = 0;
    long constraint_evals = 0;
    long jacobian_evals = 0;
    std::string message;

    bool converged() const { return status == SolveStatus::kConverged; }
};

class NlpSolver {
  public:
    virtual ~NlpSolver() = default;
    virtual SolveResult solve(NlpProblem& problem, const SolverOptions& options) = 0;
    /// Solve from an explicit starting point instead of the problem's guess.
    virtual SolveResult solve_from(NlpProblem& problem, const SolverOptions& options,
                                   const Eigen::VectorXd& x0) = 0;
};

/**
 * Augmented Lagrangian solver with a projected L-BFGS inner loop.
 *
 * Equalities enter as lambda*e + (mu/2) e^2; each finite inequality side as
 * the Rockafellar term (max(0, lambda + mu s)^2 - lambda^2) / (2 mu) with
 * s the signed violation. Box bounds are handled by projection inside the
 * inner loop, never penalized.
 *
 * Outer acceptance is conservative: an iterate is kept only if its maximum
 * constraint violation does not exceed the previously accepted one, so the
 * recorded violation trace is non-increasing. A rejected iterate rolls back
 * and retries with a stiffer penalty.
 */
class AugLagSolver final : public NlpSolver {
  public:
    SolveResult solve(NlpProblem& p, const SolverOptions& o) override {
        return solve_from(p, o, p.initial_guess());
    }

    SolveResult solve_from(NlpProblem& p, const SolverOptions& o,
                           const Eigen::VectorXd& x0) override {
        const int n = p.num_variables();
        const int m = p.num_constraints();
        if (x0.size() != n) throw std::invalid_argument("solver: initial guess size mismatch");

        Eigen::VectorXd xl(n), xu(n), cl(m), cu(m);
        p.variable_bounds(xl, xu);
        p.constraint_bounds(cl, cu);
        for (int i = 0; i < n; ++i)
            if (xl(i) > xu(i)) throw std::invalid_argument("solver: crossed variable bounds");

        std::vector<int> jrows, jcols;
        p.jacobian_sparsity(jrows, jcols);
        if (jrows.size() != jcols.size())
            throw std::invalid_argument("solver: jacobian pattern size mismatch");

        Work w;
        w.p = &p;
        w.o = o;
        w.xl = std::move(xl);
        w.xu = std::move(xu);
        w.cl = std::move(cl);
        w.cu = std::move(cu);
        w.jrows = std::move(jrows);
        w.jcols = std::move(jcols);
        w.jvals.resize(w.jrows.size());
        w.is_eq.resize(m);
        for (int i = 0; i < m; ++i) w.is_eq[i] = (w.cl(i) == w.cu(i));

        // Row scaling from the initial Jacobian keeps the augmented terms
        // comparably conditioned regardless of constraint units. Violations
        // are still measured and reported unscaled.
        w.cscale = Eigen::VectorXd::Ones(m);
        if (m > 0 && !w.jrows.empty()) {
            const Eigen::VectorXd xp = project(w, x0);
            p.jacobian_values(xp, w.jvals);
            ++w.res.jacobian_evals;
            Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(m);
            for (std::size_t k = 0; k < w.jrows.size(); ++k)
                row_norm(w.jrows[k]) =
                    std::max(row_norm(w.jrows[k]), std::abs(w.jvals[k]));
            for (int i = 0; i < m; ++i)
                if (std::isfinite(row_norm(i)) && row_norm(i) > 1.0)
                    w.cscale(i) = 1.0 / row_norm(i);
        }

        return run(w, x0);
    }

  private:
    struct Work {
        NlpProblem* p = nullptr;
        SolverOptions o;
        Eigen::VectorXd xl, xu, cl, cu;
        std::vector<int> jrows, jcols;
        std::vector<double> jvals;
        std::vector<char> is_eq;
        Eigen::VectorXd cscale;                  // per-row scaling, size m
        Eigen::VectorXd lam_eq, lam_up, lam_lo;  // multipliers in scaled space, size m
        double mu = 0.0;
        SolveResult res;
    };

    static bool finite_lower(double v) { return v > -kNlpInfinity; }
    static bool finite_upper(double v) { return v < kNlpInfinity; }

    static Eigen::VectorXd project(const Work& w, const Eigen::VectorXd& x) {
        return x.cwiseMax(w.xl).cwiseMin(w.xu);
    }

    static double max_violation(const Work& w, const Eigen::VectorXd& c) {
        double v = 0.0;
        for (int i = 0; i < c.size(); ++i) {
            if (finite_lower(w.cl(i))) v = std::max(v, w.cl(i) - c(i));
            if (finite_upper(w.cu(i))) v = std::max(v, c(i) - w.cu(i));
        }
        return v;
    }

    /// Augmented Lagrangian value and the constraint weight vector such that
    /// grad L = grad f + J^T weights.
    static double al_value(Work& w, const Eigen::VectorXd& c, double f,
                           Eigen::VectorXd& weights) {
        const int m = static_cast<int>(c.size());
        weights.setZero(m);
        double val = f;
        for (int i = 0; i < m; ++i) {
            const double s = w.cscale(i);
            if (w.is_eq[i]) {
                const double e = s * (c(i) - w.cl(i));
                val += w.lam_eq(i) * e + 0.5 * w.mu * e * e;
                weights(i) = s * (w.lam_eq(i) + w.mu * e);
                continue;
            }
            if (finite_upper(w.cu(i))) {
                const double t = w.lam_up(i) + w.mu * s * (c(i) - w.cu(i));
                if (t > 0.0) {
                    val += (t * t - w.lam_up(i) * w.lam_up(i)) / (2.0 * w.mu);
                    weights(i) += s * t;
                } else {
                    val -= w.lam_up(i) * w.lam_up(i) / (2.0 * w.mu);
                }
            }
            if (finite_lower(w.cl(i))) {
                const double t = w.lam_lo(i) + w.mu * s * (w.cl(i) - c(i));
                if (t > 0.0) {
                    val += (t * t - w.lam_lo(i) * w.lam_lo(i)) / (2.0 * w.mu);
                    weights(i) -= s * t;
                } else {
                    val -= w.lam_lo(i) * w.lam_lo(i) / (2.0 * w.mu);
                }
            }
        }
        return val;
    }

    struct EvalAL {
        double value = 0.0;
        Eigen::VectorXd gradient;
        double f = 0.0;
        Eigen::VectorXd c;
        bool ok = true;
    };

    EvalAL eval_al(Work& w, const Eigen::VectorXd& x, bool need_gradient) {
        EvalAL ev;
        ev.f = w.p->objective(x);
        ++w.res.objective_evals;
        ev.c = w.p->constraints(x);
        ++w.res.constraint_evals;
        if (!std::isfinite(ev.f) || !ev.c.allFinite()) {
            ev.ok = false;
            return ev;
        }
        Eigen::VectorXd weights;
        ev.value = al_value(w, ev.c, ev.f, weights);
        if (!need_gradient) return ev;

        Eigen::VectorXd g = w.p->objective_gradient(x);
        ++w.res.gradient_evals;
        w.p->jacobian_values(x, w.jvals);
        ++w.res.jacobian_evals;
        // J^T weights accumulated straight from triplets.
        for (std::size_t k = 0; k < w.jrows.size(); ++k)
            g(w.jcols[k]) += w.jvals[k] * weights(w.jrows[k]);
        if (!g.allFinite()) {
            ev.ok = false;
            return ev;
        }
        ev.gradient = std::move(g);
        return ev;
    }

    /// Projected gradient stationarity measure: ||x - P(x - g)||_inf.
    static double pg_norm(const Work& w, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        return (x - project(w, x - g)).cwiseAbs().maxCoeff();
    }

    /// KKT residual for an arbitrary constraint weight vector wv (so that the
    /// Lagrangian gradient is grad f + J^T wv): ||x - P(x - grad L)||_inf.
    double kkt_residual_weights(Work& w, const Eigen::VectorXd& x, const Eigen::VectorXd& wv) {
        Eigen::VectorXd g = w.p->objective_gradient(x);
        ++w.res.gradient_evals;
        if (w.p->num_constraints() > 0) {
            w.p->jacobian_values(x, w.jvals);
            ++w.res.jacobian_evals;
            for (std::size_t k = 0; k < w.jrows.size(); ++k)
                g(w.jcols[k]) += w.jvals[k] * wv(w.jrows[k]);
        }
        if (!g.allFinite()) return 1e300;
        return pg_norm(w, x, g);
    }

    /// First-order KKT residual with the current multiplier estimates and no
    /// penalty contamination: ||x - P(x - grad f - J^T lambda)||_inf. This is
    /// the quantity the convergence test certifies; the augmented gradient
    /// carries an extra mu*c term that never vanishes at finite precision.
    double kkt_residual(Work& w, const Eigen::VectorXd& x) {
        const Eigen::VectorXd lam =
            w.p->num_constraints() > 0
                ? Eigen::VectorXd((w.lam_eq + w.lam_up - w.lam_lo).cwiseProduct(w.cscale))
                : Eigen::VectorXd();
        return kkt_residual_weights(w, x, lam);
    }

    /// Least-squares multiplier refinement at a near-feasible point: fit the
    /// constraint weights minimizing ||grad f + J^T wv|| over the components
    /// of x strictly inside their bounds, with inactive inequalities pinned
    /// at zero and wrong-signed fits clamped. The dual iterate lambda <- c +
    /// mu * violation converges only as fast as the inner solves track it,
    /// which degrades once the penalty is stiff; the least-squares estimate
    /// is penalty-free. Adopted only when it improves the KKT residual, so
    /// it can only sharpen the certificate.
    bool refine_multipliers(Work& w, const Eigen::VectorXd& x) {
        const int n = w.p->num_variables();
        const int m = w.p->num_constraints();
        if (m == 0) return false;

        Eigen::VectorXd c = w.p->constraints(x);
        ++w.res.constraint_evals;
        Eigen::VectorXd g = w.p->objective_gradient(x);
        ++w.res.gradient_evals;
        w.p->jacobian_values(x, w.jvals);
        ++w.res.jacobian_evals;
        if (!c.allFinite() || !g.allFinite()) return false;

        std::vector<int> slot(n, -1);  // variable -> free-row index
        int n_free = 0;
        for (int i = 0; i < n; ++i) {
            const double tiny = 1e-8 * (1.0 + std::abs(x(i)));
            if (x(i) - w.xl(i) > tiny && w.xu(i) - x(i) > tiny) slot[i] = n_free++;
        }
        if (n_free == 0) return false;

        // Active rows: equalities always; inequalities within an activity band
        // of their bound (scaled). sign: 0 free, +1 weight >= 0, -1 weight <= 0.
        const double act_tol = std::max(100.0 * w.o.feasibility_tol, 1e-8);
        std::vector<int> rows, sign;
        std::vector<int> col_of(m, -1);
        for (int i = 0; i < m; ++i) {
            int s = 0;
            if (w.is_eq[i]) {
                s = 0;
            } else if (finite_upper(w.cu(i)) &&
                       w.cscale(i) * std::abs(c(i) - w.cu(i)) <= act_tol) {
                s = +1;
            } else if (finite_lower(w.cl(i)) &&
                       w.cscale(i) * std::abs(c(i) - w.cl(i)) <= act_tol) {
                s = -1;
            } else {
                continue;
            }
            col_of[i] = static_cast<int>(rows.size());
            rows.push_back(i);
            sign.push_back(s);
        }
        if (rows.empty()) return false;
        const int k = static_cast<int>(rows.size());

        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_free, k);
        for (std::size_t t = 0; t < w.jrows.size(); ++t) {
            const int col = col_of[w.jrows[t]];
            const int row = slot[w.jcols[t]];
            if (col >= 0 && row >= 0) A(row, col) += w.jvals[t];
        }
        Eigen::VectorXd rhs(n_free);
        for (int i = 0; i < n; ++i)
            if (slot[i] >= 0) rhs(slot[i]) = -g(i);

        // Column equilibration keeps the QR honest across disparate row norms.
        Eigen::VectorXd colnorm(k);
        for (int j = 0; j < k; ++j) {
            colnorm(j) = A.col(j).norm();
            if (colnorm(j) > 0.0) A.col(j) /= colnorm(j);
        }

        std::vector<bool> keep(k, true);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
        for (int pass = 0; pass < 3; ++pass) {
            std::vector<int> live;
            for (int j = 0; j < k; ++j)
                if (keep[j] && colnorm(j) > 0.0) live.push_back(j);
            if (live.empty()) return false;
            Eigen::MatrixXd As(n_free, static_cast<int>(live.size()));
            for (std::size_t j = 0; j < live.size(); ++j) As.col(j) = A.col(live[j]);
            const Eigen::VectorXd us = As.colPivHouseholderQr().solve(rhs);
            u.setZero();
            bool clean = true;
            for (std::size_t j = 0; j < live.size(); ++j) {
                const int col = live[j];
                const double wj = us(static_cast<Eigen::Index>(j)) / colnorm(col);
                if ((sign[col] > 0 && wj < 0.0) || (sign[col] < 0 && wj > 0.0)) {
                    keep[col] = false;
                    clean = false;
                } else {
                    u(col) = wj;
                }
            }
            if (clean) break;
        }
        if (!u.allFinite()) return false;

        Eigen::VectorXd wv = Eigen::VectorXd::Zero(m);
        for (int j = 0; j < k; ++j) wv(rows[j]) = u(j);
        const double cur = kkt_residual(w, x);
        const double cand = kkt_residual_weights(w, x, wv);
        if (!(cand < cur)) return false;

        w.lam_eq.setZero();
        w.lam_up.setZero();
        w.lam_lo.setZero();
        for (int j = 0; j < k; ++j) {
            const int i = rows[j];
            const double lam_scaled = w.cscale(i) > 0.0 ? u(j) / w.cscale(i) : 0.0;
            if (sign[j] == 0)
                w.lam_eq(i) = lam_scaled;
            else if (sign[j] > 0)
                w.lam_up(i) = std::max(lam_scaled, 0.0);
            else
                w.lam_lo(i) = std::max(-lam_scaled, 0.0);
        }
        return true;
    }

    struct InnerResult {
        Eigen::VectorXd x;
        EvalAL ev;
        double pg = 0.0;
        bool ok = true;
        int iters = 0;
    };

    InnerResult inner_solve(Work& w, Eigen::VectorXd x, double tol) {
        InnerResult out;
        const int mem = std::max(1, w.o.lbfgs_memory);
        std::deque<Eigen::VectorXd> s_hist, y_hist;
        std::deque<double> rho_hist;

        EvalAL ev = eval_al(w, x, true);
        if (!ev.ok) {
            out.ok = false;
            out.x = std::move(x);
            out.ev = std::move(ev);
            return out;
        }

        for (int it = 0; it < w.o.max_inner_iterations; ++it) {
            out.iters = it + 1;
            const double pg = pg_norm(w, x, ev.gradient);
            if (pg <= tol) break;

            // Two-loop recursion for d = -H g.
            Eigen::VectorXd d = -ev.gradient;
            if (!s_hist.empty()) {
                std::vector<double> alpha(s_hist.size());
                for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
                    alpha[i] = rho_hist[i] * s_hist[i].dot(d);
                    d -= alpha[i] * y_hist[i];
                }
                const double gamma =
                    s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
                d *= gamma;
                for (std::size_t i = 0; i < s_hist.size(); ++i) {
                    const double beta = rho_hist[i] * y_hist[i].dot(d);
                    d += (alpha[i] - beta) * s_hist[i];
                }
            }
            if (ev.gradient.dot(d) >= 0.0) {
                // Not a descent direction under the current memory; restart.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                d = -ev.gradient;
            }

            // Armijo backtracking along the projected path. The sufficient
            // decrease test carries a machine-noise allowance so progress
            // smaller than the floating-point resolution of L does not
            // read as failure near the optimum.
            const double c1 = 1e-4;
            const double noise = 1e-14 * (1.0 + std::abs(ev.value));
            double t = 1.0;
            Eigen::VectorXd x_new;
            EvalAL ev_new;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                x_new = project(w, x + t * d);
                const Eigen::VectorXd step = x_new - x;
                if (step.cwiseAbs().maxCoeff() == 0.0) break;
                ev_new = eval_al(w, x_new, false);
                if (!ev_new.ok) {
                    t *= 0.5;
                    continue;
                }
                if (ev_new.value <= ev.value + c1 * ev.gradient.dot(step) + noise) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) {
                if (!s_hist.empty()) {
                    // Retry once from a clean steepest-descent memory.
                    s_hist.clear();
                    y_hist.clear();
                    rho_hist.clear();
                    continue;
                }
                break;  // stationary within line-search resolution
            }

            ev_new = eval_al(w, x_new, true);
            if (!ev_new.ok) {
                out.ok = false;
                break;
            }
            const Eigen::VectorXd s = x_new - x;
            const Eigen::VectorXd y = ev_new.gradient - ev.gradient;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                s_hist.push_back(s);
                y_hist.push_back(y);
                rho_hist.push_back(1.0 / sy);
                if (static_cast<int>(s_hist.size()) > mem) {
                    s_hist.pop_front();
                    y_hist.pop_front();
                    rho_hist.pop_front();
                }
            }
            x = std::move(x_new);
            ev = std::move(ev_new);
        }

        out.x = std::move(x);
        out.pg = out.ok ? pg_norm(w, out.x, ev.gradient) : 1e300;
        out.ev = std::move(ev);
        return out;
    }

    SolveResult run(Work& w, const Eigen::VectorXd& x0) {
        const int m = w.p->num_constraints();
        w.lam_eq.setZero(m);
        w.lam_up.setZero(m);
        w.lam_lo.setZero(m);
        w.mu = w.o.initial_penalty;

        Eigen::VectorXd x = project(w, x0);
        Eigen::VectorXd c = w.p->constraints(x);
        ++w.res.constraint_evals;
        if (!c.allFinite()) {
            w.res.status = SolveStatus::kNumericalFailure;
            w.res.message = "constraints not finite at the initial point";
            w.res.x = x;
            return std::move(w.res);
        }
        double v_acc = max_violation(w, c);  // violation of last accepted iterate
        double f_acc = w.p->objective(x);
        ++w.res.objective_evals;
        double inner_tol = std::max(w.o.optimality_tol, 1e-2);
        double pg_acc = 1e300;
        double v_inner_prev = std::numeric_limits<double>::infinity();

        for (int outer = 1; outer <= w.o.max_outer_iterations; ++outer) {
            InnerResult ir = inner_solve(w, x, inner_tol);
            if (!ir.ok) {
                w.res.status = SolveStatus::kNumericalFailure;
                w.res.message = "non-finite value during inner iteration";
                break;
            }
            const double v_new = max_violation(w, ir.ev.c);
            const double dual_scale =
                m == 0 ? 1.0
                       : std::max({1.0, w.lam_eq.cwiseAbs().maxCoeff(), w.lam_up.maxCoeff(),
                                   w.lam_lo.maxCoeff()});
            const double opt_target = w.o.optimality_tol * std::max(1.0, dual_scale / 100.0);

            // Dual update vs penalty growth: the inner result is a minimizer
            // of the current subproblem whatever we do with the primal trace,
            // so it always informs one of the two. Insufficient feasibility
            // contraction between consecutive inner results means the
            // multipliers alone are not working and the penalty must stiffen.
            const bool sufficient_progress =
                v_new <= w.o.feasibility_tol || v_new <= 0.5 * v_inner_prev;
            if (sufficient_progress) {
                update_multipliers(w, ir.ev.c);
                inner_tol = std::max(0.2 * inner_tol, w.o.optimality_tol);
            } else {
                w.mu = std::min(w.mu * w.o.penalty_growth, w.o.max_penalty);
            }
            v_inner_prev = v_new;

            // The primal trace keeps an iterate only if feasibility does not
            // regress; below the feasibility tolerance, regression is allowed
            // when the objective improves or the point is stationary (a
            // feasible start could otherwise never trade noise-level
            // violations for objective progress).
            const bool accept =
                v_new <= v_acc + 1e-15 ||
                (v_new <= w.o.feasibility_tol &&
                 (ir.pg <= opt_target ||
                  ir.ev.f <= f_acc + 1e-12 * std::max(1.0, std::abs(f_acc))));
            IterationRecord rec;
            rec.iteration = outer;
            rec.penalty = w.mu;
            if (accept) {
                rec.step_norm = (ir.x - x).norm();
                x = ir.x;
                v_acc = std::max(v_new, 0.0);
                f_acc = ir.ev.f;
            } else {
                rec.step_norm = 0.0;
            }
            pg_acc = kkt_residual(w, x);
            double opt_final = opt_target;
            if (v_acc <= std::max(100.0 * w.o.feasibility_tol, 1e-8) && pg_acc > opt_target &&
                refine_multipliers(w, x)) {
                pg_acc = kkt_residual(w, x);
                const double ds =
                    m == 0 ? 1.0
                           : std::max({1.0, w.lam_eq.cwiseAbs().maxCoeff(), w.lam_up.maxCoeff(),
                                       w.lam_lo.maxCoeff()});
                opt_final = w.o.optimality_tol * std::max(1.0, ds / 100.0);
            }
            rec.objective = f_acc;
            rec.max_violation = v_acc;
            w.res.iterations.push_back(rec);

            if (v_acc <= w.o.feasibility_tol && pg_acc <= opt_final) {
                w.res.status = SolveStatus::kConverged;
                w.res.message = "feasibility and stationarity tolerances met";
                break;
            }
            if (w.mu >= w.o.max_penalty && v_acc > w.o.feasibility_tol) {
                w.res.status = SolveStatus::kInfeasible;
                w.res.message = "penalty limit reached without feasibility";
                break;
            }
            if (outer == w.o.max_outer_iterations) {
                w.res.status = SolveStatus::kMaxIterations;
                w.res.message = "outer iteration limit reached";
            }
        }

        w.res.x = x;
        w.res.objective = f_acc;
        w.res.max_violation = v_acc;
        w.res.optimality = pg_acc;
        // Multipliers are maintained in row-scaled space; report them against
        // the user's constraint units.
        w.res.multipliers = (w.lam_eq + w.lam_up - w.lam_lo).cwiseProduct(w.cscale);
        return std::move(w.res);
    }

    static void update_multipliers(Work& w, const Eigen::VectorXd& c) {
        for (int i = 0; i < c.size(); ++i) {
            const double s = w.cscale(i);
            if (w.is_eq[i]) {
                w.lam_eq(i) += w.mu * s * (c(i) - w.cl(i));
                continue;
            }
            if (finite_upper(w.cu(i)))
                w.lam_up(i) = std::max(0.0, w.lam_up(i) + w.mu * s * (c(i) - w.cu(i)));
            if (finite_lower(w.cl(i)))
                w.lam_lo(i) = std::max(0.0, w.lam_lo(i) + w.mu * s * (w.cl(i) - c(i)));
        }
    }
};

/// Named construction so configs can select a solver; unknown names are a
/// configuration error, reported with the offending value.
inline std::unique_ptr<NlpSolver> make_solver(const std::string& name) {
    if (name == "auglag") return std::make_unique<AugLagSolver>();
    throw std::invalid_argument("solver.name: unknown solver '" + name +
                                "' (available: auglag)");
}

/// Outer-iterate trace, one row per accepted iterate.
inline void write_iterations_csv(const SolveResult& result, std::ostream& os) {
    os << "iteration,objective,max_violation,step_norm,penalty\n";
    os << std::setprecision(17);
    for (const auto& it : result.iterations)
        os << it.iteration << ',' << it.objective << ',' << it.max_violation << ','
           << it.step_norm << ',' << it.penalty << '\n';
}

}  // namespace spiralmdo
