#pragma once

#include <cmath>
#include <functional>
#include <random>

namespace testutil {

/// Central finite difference with a curvature-safe step. Good to ~eps^(2/3)
/// relative accuracy on smooth functions, which is what the analytic
/// Jacobians are checked against.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double scale = 1.0) {
    const double h = std::cbrt(2.2e-16) * std::max(std::abs(x), scale);
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a-b| / max(1, |a|, |b|): absolute near zero, relative elsewhere.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Deterministic per-test RNG. Seed fixed so failures reproduce.
inline std::mt19937& rng() {
    static std::mt19937 gen(0x5eed5eedU);
    return gen;
}

inline double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng());
}

}  // namespace testutil
