#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "rng.hpp"

namespace mfbsde {

// A frozen law with the statistics drivers usually need precomputed.
struct LawView {
    const EmpiricalMeasure* measure = nullptr;
    std::vector<double> mean;
    double second_moment = 0.0;

    double w2_to_dirac0() const { return std::sqrt(second_moment); }
    double mean0() const { return mean.empty() ? 0.0 : mean[0]; }

    static LawView of(const EmpiricalMeasure& m) {
        LawView v;
        v.measure = &m;
        v.mean = m.mean();
        v.second_moment = m.second_moment();
        return v;
    }
};

struct DriverPoint {
    double t = 0.0;
    std::size_t step = 0;
    std::size_t path = 0;
    double y = 0.0;
    std::span<const double> z;
    std::span<const double> x;  // forward state of the path, may be empty
    const LawView* y_law = nullptr;
    const LawView* z_law = nullptr;
};

// Growth and regularity constants of a driver/terminal pair.
struct GrowthProfile {
    double K1 = 1.0;  // sup |terminal|
    double K2 = 0.5;  // sup of the time integral of theta
    double K3 = 0.25; // sup of the time integral of theta^2
    double K = 1.0;   // linear growth in y and the Y-law
    double gamma = 1.0;
    double gamma0 = 0.1;
    double alpha = 0.5;
    double beta = 1.0;
    double beta0 = 1.0;
    double gamma_tilde = 1.0;
    std::function<double(double)> phi;  // nondecreasing modulus; unset means phi(r) = K r

    double phi_at(double r) const { return phi ? phi(r) : K * r; }
};

inline void validate(const GrowthProfile& p) {
    auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(pos(p.K1), "K1 must be positive");
    require(pos(p.K2), "K2 must be positive");
    require(pos(p.K3), "K3 must be positive");
    require(pos(p.K), "K must be positive");
    require(pos(p.gamma), "gamma must be positive");
    require(pos(p.gamma0), "gamma0 must be positive");
    require(std::isfinite(p.alpha) && p.alpha >= 0.0 && p.alpha < 1.0, "alpha must lie in [0, 1)");
    require(pos(p.beta), "beta must be positive");
    require(pos(p.beta0), "beta0 must be positive");
    require(pos(p.gamma_tilde), "gamma_tilde must be positive");
    if (p.phi) {
        double prev = p.phi(0.0);
        require(std::isfinite(prev), "phi must be finite");
        for (int i = 1; i <= 64; ++i) {
            const double r = 0.25 * i * i;
            const double v = p.phi(r);
            require(std::isfinite(v) && v >= prev, "phi must be nondecreasing");
            prev = v;
        }
    }
}

// Driver split as local(t, z) + law_term(t, Z-law).
struct SplitDriver {
    std::function<double(double t, std::span<const double> z)> local;
    std::function<double(double t, const LawView& z_law)> law_term;
};

struct DriverSpec {
    std::string name;
    std::function<double(const DriverPoint&)> g;
    GrowthProfile profile;
    bool uses_y = true;
    bool uses_y_law = false;
    bool uses_z_law = false;
    bool nondecreasing_in_y_law = false;
    std::optional<SplitDriver> split;

    double operator()(const DriverPoint& pt) const { return g(pt); }
};

inline void validate(const DriverSpec& d) {
    require(static_cast<bool>(d.g), "driver has no generator");
    validate(d.profile);
    if (d.split) require(d.split->local && d.split->law_term, "split driver is incomplete");
}

// Structural classes a driver can be probed against.
enum class DriverClass {
    general_quadratic,     // |g| <= theta + phi(|y|) + gamma/2 |z|^2 + phi(W2(Y-law)) + gamma0 W2(Z-law)^(1+alpha)
    lipschitz_quadratic,   // |g| <= theta + K|y| + gamma/2 |z|^2 + K W2(Y-law), theta^2 integrating to K3
    one_sided_strict,      // sign(y) g <= ... and g <= -gamma_tilde/2 |z|^2 + ... (or the mirrored lower bound)
    z_law_quadratic,       // |g| <= theta + gamma/2 |z|^2 + gamma0 W2(Z-law)^(1+alpha)
    additive_split,        // |local| <= theta + gamma/2 |z|^2 and |law_term| <= theta + gamma0 W2(Z-law)^2
};

struct ProbeReport {
    bool satisfied = true;
    double worst_excess = -std::numeric_limits<double>::infinity();  // max of lhs - rhs
    std::size_t probes = 0;
};

namespace detail {
inline EmpiricalMeasure random_measure(StreamRng& rng, std::size_t dim, double radius, std::size_t atoms = 6) {
    std::vector<double> a(atoms * dim);
    const double c = rng.uniform(-radius, radius);
    for (double& v : a) v = c + rng.uniform(-radius, radius) * rng.uniform();
    return EmpiricalMeasure(dim, std::move(a));
}
} // namespace detail

// Randomised check of the class inequality on `n_probes` points with |y|, |z|
// and law radii up to `radius`. The constant source term theta is taken flat
// in time over the horizon T.
inline ProbeReport check_driver_class(const DriverSpec& d, DriverClass cls, double T, std::size_t z_dim,
                                      std::size_t n_probes, const SeedSpec& seed, double radius = 4.0) {
    validate(d);
    require(T > 0.0 && std::isfinite(T), "horizon must be positive");
    if (cls == DriverClass::additive_split) require(d.split.has_value(), "driver has no additive split");
    const GrowthProfile& p = d.profile;
    const double theta_l1 = p.K2 / T;
    const double theta_l2 = std::sqrt(p.K3 / T);
    StreamRng rng(seed);
    ProbeReport rep;
    std::vector<double> z(z_dim);
    for (std::size_t it = 0; it < n_probes; ++it) {
        const double t = rng.uniform(0.0, T);
        const double y = rng.uniform(-radius, radius);
        double z2 = 0.0;
        for (double& v : z) {
            v = rng.uniform(-radius, radius);
            z2 += v * v;
        }
        const EmpiricalMeasure my = detail::random_measure(rng, 1, radius);
        const EmpiricalMeasure mz = detail::random_measure(rng, z_dim, radius);
        const LawView ly = LawView::of(my), lz = LawView::of(mz);
        DriverPoint pt;
        pt.t = t;
        pt.y = y;
        pt.z = z;
        pt.y_law = &ly;
        pt.z_law = &lz;
        const double w1 = ly.w2_to_dirac0(), w2z = lz.w2_to_dirac0();
        const double zl = p.gamma0 * std::pow(w2z, 1.0 + p.alpha);
        std::vector<double> excess;
        switch (cls) {
        case DriverClass::general_quadratic: {
            const double g = d(pt);
            excess.push_back(std::abs(g) - (theta_l1 + p.phi_at(std::abs(y)) + 0.5 * p.gamma * z2 + p.phi_at(w1) + zl));
            break;
        }
        case DriverClass::lipschitz_quadratic: {
            const double g = d(pt);
            excess.push_back(std::abs(g) - (theta_l2 + p.K * std::abs(y) + 0.5 * p.gamma * z2 + p.K * w1));
            break;
        }
        case DriverClass::one_sided_strict: {
            const double g = d(pt);
            const double slack = theta_l1 + p.beta * std::abs(y) + p.beta0 * w1 + zl;
            const double sgn = y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0);
            excess.push_back(sgn * g - (slack + 0.5 * p.gamma * z2));
            const double upper = g - (slack - 0.5 * p.gamma_tilde * z2);
            const double lower = (0.5 * p.gamma_tilde * z2 - slack) - g;
            excess.push_back(std::min(upper, lower));
            break;
        }
        case DriverClass::z_law_quadratic: {
            const double g = d(pt);
            excess.push_back(std::abs(g) - (theta_l1 + 0.5 * p.gamma * z2 + zl));
            break;
        }
        case DriverClass::additive_split: {
            const double a = d.split->local(t, z);
            const double b = d.split->law_term(t, lz);
            excess.push_back(std::abs(a) - (theta_l1 + 0.5 * p.gamma * z2));
            excess.push_back(std::abs(b) - (theta_l1 + p.gamma0 * w2z * w2z));
            break;
        }
        }
        for (double e : excess) {
            rep.worst_excess = std::max(rep.worst_excess, e);
            if (!(e <= 1e-12)) rep.satisfied = false;
        }
        ++rep.probes;
    }
    return rep;
}

} // namespace mfbsde
