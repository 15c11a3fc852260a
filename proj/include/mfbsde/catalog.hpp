#pragma once

// Named drivers and terminals shared by the CLI, the acceptance runner and
// the tests.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bsde.hpp"
#include "driver.hpp"
#include "errors.hpp"
#include "pde.hpp"
#include "rng.hpp"

namespace mfbsde {

using Params = std::map<std::string, double>;

inline double param(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline double z_norm2(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return s;
}

// Keys each named driver accepts.
inline const std::map<std::string, std::vector<std::string>>& driver_catalog() {
    static const std::map<std::string, std::vector<std::string>> c = {
        {"zero", {}},
        {"constant", {"c"}},
        {"pure-quadratic", {"gamma"}},
        {"linear-mean", {"a"}},
        {"mean-plus-y", {}},
        {"affine-mean", {"a", "b", "gamma"}},
        {"w2-of-z", {"gamma0"}},
        {"additive-split", {"gamma", "gamma0"}},
    };
    return c;
}

inline const std::map<std::string, std::vector<std::string>>& terminal_catalog() {
    static const std::map<std::string, std::vector<std::string>> c = {
        {"constant", {"c"}},
        {"indicator", {}},
        {"tanh", {"scale", "shift"}},
        {"cosine", {}},
        {"bump", {"scale"}},
    };
    return c;
}

inline DriverSpec make_driver(const std::string& name, const Params& p, GrowthProfile profile) {
    DriverSpec d;
    d.name = name;
    if (name == "zero") {
        d.g = [](const DriverPoint&) { return 0.0; };
        d.uses_y = false;
    } else if (name == "constant") {
        const double c = param(p, "c", 1.0);
        d.g = [c](const DriverPoint&) { return c; };
        d.uses_y = false;
    } else if (name == "pure-quadratic") {
        const double gam = param(p, "gamma", profile.gamma);
        profile.gamma = gam;
        d.g = [gam](const DriverPoint& pt) { return 0.5 * gam * z_norm2(pt.z); };
        d.uses_y = false;
    } else if (name == "linear-mean" || name == "mean-plus-y" || name == "affine-mean") {
        const double a = param(p, "a", 1.0);
        const double b = name == "mean-plus-y" ? 1.0 : param(p, "b", 0.0);
        const double gam = param(p, "gamma", 0.0);
        if (gam > 0.0) profile.gamma = gam;
        d.g = [a, b, gam](const DriverPoint& pt) {
            return a * pt.y_law->mean0() + b * pt.y + 0.5 * gam * z_norm2(pt.z);
        };
        d.uses_y = b != 0.0;
        d.uses_y_law = true;
        d.nondecreasing_in_y_law = a >= 0.0;
    } else if (name == "w2-of-z") {
        const double g0 = param(p, "gamma0", profile.gamma0);
        profile.gamma0 = g0;
        d.g = [g0](const DriverPoint& pt) { return g0 * pt.z_law->w2_to_dirac0(); };
        d.uses_y = false;
        d.uses_z_law = true;
    } else if (name == "additive-split") {
        const double gam = param(p, "gamma", profile.gamma);
        const double g0 = param(p, "gamma0", profile.gamma0);
        profile.gamma = gam;
        profile.gamma0 = g0;
        SplitDriver sp;
        sp.local = [gam](double, std::span<const double> z) { return 0.5 * gam * z_norm2(z); };
        sp.law_term = [g0](double, const LawView& zl) { return g0 * zl.second_moment; };
        d.g = [sp](const DriverPoint& pt) { return sp.local(pt.t, pt.z) + sp.law_term(pt.t, *pt.z_law); };
        d.split = sp;
        d.uses_y = false;
        d.uses_z_law = true;
    } else {
        throw InvalidArgument("unknown driver '" + name + "'");
    }
    d.profile = profile;
    return d;
}

inline TerminalPayoff make_terminal(const std::string& name, const Params& p) {
    if (name == "constant") {
        const double c = param(p, "c", 1.0);
        return [c](std::span<const double>) { return c; };
    }
    if (name == "indicator") return [](std::span<const double> w) { return w[0] > 0.0 ? 1.0 : 0.0; };
    if (name == "tanh") {
        const double s = param(p, "scale", 1.0), m = param(p, "shift", 0.0);
        return [s, m](std::span<const double> w) { return s * std::tanh(w[0] + m); };
    }
    if (name == "cosine") return [](std::span<const double> w) { return std::cos(w[0]); };
    if (name == "bump") {
        const double s = param(p, "scale", 1.0);
        return [s](std::span<const double> w) { return s * std::exp(-w[0] * w[0]); };
    }
    throw InvalidArgument("unknown terminal '" + name + "'");
}

// Sup of |terminal| over a wide probe of W_T, used to fill in K1.
inline double terminal_sup(const TerminalPayoff& h) {
    double m = 0.0;
    double w[1];
    for (int i = -4000; i <= 4000; ++i) {
        w[0] = i * 0.005;
        m = std::max(m, std::abs(h(w)));
    }
    return m;
}

// Random member of the Lipschitz-quadratic class of `profile`:
//   theta + a y + c gamma/2 |z|^2 + s mean(Y-law) + r sin(W2(Z-law, 0))
// with |a|, |s| <= K, |c| <= 1 and |theta| + |r| within the theta budget.
struct RandomProblem {
    DriverSpec driver;
    TerminalPayoff terminal;
};

inline RandomProblem random_lipschitz_quadratic(std::uint64_t seed, const GrowthProfile& profile, double T) {
    StreamRng rng(seed, 0xB0B);
    const double K = profile.K, gam = profile.gamma;
    const double a = rng.uniform(-1.0, 1.0) * K;
    const double c = rng.uniform(-1.0, 1.0);
    const double s = rng.uniform(-1.0, 1.0) * K;
    const double budget = std::sqrt(profile.K3 / T);
    const double theta = rng.uniform(-0.5, 0.5) * budget;
    const double r = rng.uniform(-0.5, 0.5) * budget;
    const double A = rng.uniform(0.3, 1.0) * profile.K1;
    const double m = rng.uniform(-0.5, 0.5);
    RandomProblem rp;
    rp.driver.name = "random-lipschitz-quadratic";
    rp.driver.profile = profile;
    rp.driver.uses_y = true;
    rp.driver.uses_y_law = true;
    rp.driver.uses_z_law = true;
    rp.driver.g = [=](const DriverPoint& pt) {
        return theta + a * pt.y + c * 0.5 * gam * z_norm2(pt.z) + s * pt.y_law->mean0() +
               r * std::sin(pt.z_law->w2_to_dirac0());
    };
    rp.terminal = [A, m](std::span<const double> w) { return A * std::tanh(w[0] + m); };
    return rp;
}

inline GrowthProfile random_profile(std::uint64_t seed) {
    StreamRng rng(seed, 0xF00D);
    GrowthProfile p;
    p.K1 = rng.uniform(0.5, 1.5);
    p.K3 = rng.uniform(0.05, 0.5);
    p.K2 = std::sqrt(p.K3);  // horizon one
    p.K = rng.uniform(0.2, 1.5);
    p.gamma = rng.uniform(0.5, 2.0);
    return p;
}

// Scalar nonlocal problems with known answers.
inline NonlocalProblem heat_cosine_problem() {
    NonlocalProblem p;
    p.drift = [](double, double, double) { return 0.0; };
    p.diffusion = [](double, double, double) { return 1.0; };
    p.driver = [](double, double, double, double, double, double) { return 0.0; };
    p.terminal = [](double, double x) { return std::cos(x); };
    p.coefficients_reference_free = p.driver_reference_free = p.terminal_reference_free = true;
    p.profile.K1 = 1.0;
    return p;
}

// u(0, x) = log E exp(exp(-(x + W_1)^2)) for the unit-horizon problem.
inline NonlocalProblem quadratic_bump_problem() {
    NonlocalProblem p;
    p.drift = [](double, double, double) { return 0.0; };
    p.diffusion = [](double, double, double) { return 1.0; };
    p.driver = [](double, double, double, double, double, double z) { return 0.5 * z * z; };
    p.terminal = [](double, double x) { return std::exp(-x * x); };
    p.coefficients_reference_free = p.driver_reference_free = p.terminal_reference_free = true;
    p.profile.K1 = 1.0;
    return p;
}

inline NonlocalProblem named_problem(const std::string& name) {
    if (name == "heat-cosine") return heat_cosine_problem();
    if (name == "quadratic-bump") return quadratic_bump_problem();
    throw InvalidArgument("unknown nonlocal problem '" + name + "'");
}

} // namespace mfbsde
