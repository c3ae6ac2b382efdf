#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace spiralmdo {

namespace detail {

/// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
inline void legendre(int n, double x, double& p, double& dp) {
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        p = 1.0;
        dp = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p = p1;
    // (1-x^2) P_n' = n (P_{n-1} - x P_n)
    if (std::abs(1.0 - x * x) < 1e-14) {
        dp = 0.5 * n * (n + 1.0) * (x > 0 ? 1.0 : std::pow(-1.0, n - 1));
    } else {
        dp = n * (p0 - x * p1) / (1.0 - x * x);
    }
}

/// R_n(x) = P_{n-1}(x) + P_n(x), whose roots are the left-Radau points.
inline double radau_poly(int n, double x, double& dr) {
    double pa, dpa, pb, dpb;
    legendre(n - 1, x, pa, dpa);
    legendre(n, x, pb, dpb);
    dr = dpa + dpb;
    return pa + pb;
}

}  // namespace detail

/**
 * Legendre-Gauss-Radau collocation points of a given order on [-1, 1).
 *
 * The points are the roots of P_{n-1} + P_n: the left endpoint -1 plus n-1
 * interior points. Interior roots are bracketed by a sign scan and polished
 * with Newton, so any order >= 1 works without tabulated constants.
 */
inline Eigen::VectorXd lgr_points(int order) {
    if (order < 1) throw std::invalid_argument("grid.order must be >= 1");
    Eigen::VectorXd pts(order);
    pts(0) = -1.0;
    if (order == 1) return pts;

    // Sign scan on (-1, 1); R_n has exactly order-1 simple interior roots.
    const int scan = 64 * order;
    std::vector<double> roots;
    double dr;
    double x_prev = -1.0 + 1e-9;
    double f_prev = detail::radau_poly(order, x_prev, dr);
    for (int i = 1; i <= scan; ++i) {
        const double x = -1.0 + 1e-9 + (2.0 - 2e-9) * i / scan;
        const double f = detail::radau_poly(order, x, dr);
        if (f_prev == 0.0) roots.push_back(x_prev);
        else if (f_prev * f < 0.0) {
            double lo = x_prev, hi = x, mid = 0.5 * (lo + hi);
            for (int it = 0; it < 100; ++it) {
                mid = 0.5 * (lo + hi);
                const double fm = detail::radau_poly(order, mid, dr);
                if (fm == 0.0) break;
                ((f_prev < 0.0) == (fm < 0.0) ? lo : hi) = mid;
            }
            // Newton polish from the bisection estimate.
            for (int it = 0; it < 8; ++it) {
                const double fm = detail::radau_poly(order, mid, dr);
                if (dr == 0.0) break;
                const double step = fm / dr;
                mid -= step;
                if (std::abs(step) < 1e-15) break;
            }
            roots.push_back(mid);
        }
        x_prev = x;
        f_prev = f;
    }
    if (static_cast<int>(roots.size()) != order - 1)
        throw std::runtime_error("lgr_points: root scan failed");
    for (int i = 0; i < order - 1; ++i) pts(i + 1) = roots[i];
    return pts;
}

/// Collocation points plus the non-collocated right endpoint +1; the state
/// interpolant lives on these order+1 nodes.
inline Eigen::VectorXd lgr_state_nodes(int order) {
    const Eigen::VectorXd c = lgr_points(order);
    Eigen::VectorXd nodes(order + 1);
    nodes.head(order) = c;
    nodes(order) = 1.0;
    return nodes;
}

/// Barycentric weights for a node set.
inline Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& nodes) {
    const int n = static_cast<int>(nodes.size());
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (k != j) w(j) /= (nodes(j) - nodes(k));
    return w;
}

/// Square differentiation matrix over a node set: (D v)_i is the derivative
/// of the interpolating polynomial of v at node i.
inline Eigen::MatrixXd differentiation_matrix(const Eigen::VectorXd& nodes) {
    const int n = static_cast<int>(nodes.size());
    const Eigen::VectorXd w = barycentric_weights(nodes);
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            d(i, j) = (w(j) / w(i)) / (nodes(i) - nodes(j));
            diag -= d(i, j);
        }
        d(i, i) = diag;
    }
    return d;
}

/// Evaluate the interpolant through (nodes, values) at tau, barycentric form.
inline double lagrange_eval(const Eigen::VectorXd& nodes, const Eigen::VectorXd& values,
                            double tau) {
    const int n = static_cast<int>(nodes.size());
    const Eigen::VectorXd w = barycentric_weights(nodes);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
        const double diff = tau - nodes(j);
        if (std::abs(diff) < 1e-14) return values(j);
        const double c = w(j) / diff;
        num += c * values(j);
        den += c;
    }
    return num / den;
}

/// Derivative of the interpolant at tau (differentiate the barycentric form).
inline double lagrange_deriv(const Eigen::VectorXd& nodes, const Eigen::VectorXd& values,
                             double tau) {
    const int n = static_cast<int>(nodes.size());
    const Eigen::VectorXd w = barycentric_weights(nodes);
    // At a node, use the differentiation-matrix row; elsewhere the rational
    // derivative of the barycentric formula.
    for (int i = 0; i < n; ++i) {
        if (std::abs(tau - nodes(i)) < 1e-14) {
            double acc = 0.0, diag = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double dij = (w(j) / w(i)) / (nodes(i) - nodes(j));
                acc += dij * values(j);
                diag -= dij;
            }
            return acc + diag * values(i);
        }
    }
    double num = 0.0, den = 0.0, dnum = 0.0, dden = 0.0;
    for (int j = 0; j < n; ++j) {
        const double diff = tau - nodes(j);
        const double c = w(j) / diff;
        num += c * values(j);
        den += c;
        dnum -= c / diff * values(j);
        dden -= c / diff;
    }
    return (dnum * den - num * dden) / (den * den);
}

/// Fixed per-segment collocation data reused across all segments of a grid.
struct RadauSegment {
    int order = 3;
    Eigen::VectorXd colloc;   // order points, tau in [-1, 1)
    Eigen::VectorXd nodes;    // order+1 points, adds tau = +1
    Eigen::MatrixXd diff;     // order x (order+1): interpolant slope at colloc
    Eigen::MatrixXd node_diff;  // (order+1) x (order+1), full node set

    static RadauSegment make(int order) {
        RadauSegment s;
        s.order = order;
        s.colloc = lgr_points(order);
        s.nodes = lgr_state_nodes(order);
        s.node_diff = differentiation_matrix(s.nodes);
        s.diff = s.node_diff.topRows(order);
        return s;
    }
};

}  // namespace spiralmdo
