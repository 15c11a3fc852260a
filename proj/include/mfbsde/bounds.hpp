#pragma once

#include <cmath>

#include "driver.hpp"
#include "errors.hpp"

namespace mfbsde {

struct BoundsReport {
    // Short-horizon constants.
    double L1 = 0, L2 = 0;
    // One-sided / strictly quadratic class.
    double eps0 = 0, L3 = 0, L4 = 0, L5 = 0, L6 = 0;
    // Lipschitz-quadratic class: sup|Y| <= M1, Z energy <= M2.
    double C_bar = 0, M1 = 0, M2 = 0;
    // Z-law-quadratic class under Picard iteration.
    double C_alpha = 0, M1_tilde = 0, M2_tilde = 0;
    bool gamma0_small = false;
    // N-particle system, uniform in N.
    double particle_y_bound = 0;
};

// Exponential-moment transform used by the Z energy estimate.
inline double energy_transform(double x, double gamma) {
    const double a = std::abs(x);
    return (std::exp(gamma * a) - gamma * a - 1.0) / (gamma * gamma);
}
inline double energy_transform_slope(double x, double gamma) {
    const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    return (std::exp(gamma * std::abs(x)) - 1.0) / gamma * s;
}

inline BoundsReport compute_bounds(const GrowthProfile& p, double T) {
    validate(p);
    require(std::isfinite(T) && T > 0.0, "horizon must be positive");
    BoundsReport r;
    const double g = p.gamma, a = p.alpha;

    r.L1 = 2.0 * (p.K1 + p.K2);
    r.L2 = 2.0 / (g * g) * std::exp(2.0 * g * p.K1) + 4.0 * p.K2 / g * std::exp(2.0 * g * r.L1);

    const double bb = p.beta + p.beta0;
    r.eps0 = 1.0 / (4.0 * (2.0 + bb * T));
    const double e = (1.0 + a) / (1.0 - a);
    const double base = std::pow((1.0 + a) / 2.0, e);
    r.L3 = (1.0 - a) * p.gamma_tilde * r.eps0 / 4.0 * base *
           std::pow(2.0 * p.gamma0 / (p.gamma_tilde * r.eps0), 2.0 / (1.0 - a));
    r.L4 = (1.0 - a) * p.gamma_tilde * r.eps0 / 8.0 * base * std::pow(4.0 * p.gamma0 / p.gamma_tilde, 2.0 / (1.0 - a));
    r.L5 = (2.0 * (p.K1 + p.K2) + 2.0 * r.L3 * T + 4.0 * r.eps0 * p.K2 + 4.0 * r.L4 * T) * std::exp(2.0 * bb * T);
    r.L6 = (2.0 + bb * T) / p.gamma_tilde * (4.0 * r.L5 + 16.0 * r.L4 * T) + 4.0 * p.K2 / p.gamma_tilde;

    r.C_bar = p.K1 * p.K1 + p.K3 + p.K * p.K + 2.0 * p.K + 2.0;
    r.M1 = std::sqrt(r.C_bar * std::exp(r.C_bar * T));
    r.M2 = 2.0 * energy_transform(p.K1, g) +
           2.0 * std::abs(energy_transform_slope(r.M1, g)) * (std::sqrt(p.K3 * T) + 2.0 * p.K * r.M1 * T);

    r.C_alpha = (1.0 - a) / 2.0 * base;
    r.M2_tilde = 2.0 / (g * g) * std::exp(2.0 * g * p.K1);
    const double th = std::pow(T, (1.0 - a) / 2.0);
    r.M1_tilde = p.K1 + p.gamma0 * th * (r.C_alpha + r.M2_tilde);
    const double lhs = 2.0 * p.gamma0 / g * std::exp(2.0 * g * r.M1_tilde) * th * (r.C_alpha + r.M2_tilde);
    r.gamma0_small = lhs <= 0.5 * r.M2_tilde;

    r.particle_y_bound = std::sqrt((p.K1 * p.K1 + p.K3) * std::exp((p.K * p.K + 2.0 * p.K + 2.0) * T));
    return r;
}

} // namespace mfbsde
