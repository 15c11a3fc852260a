#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "paths.hpp"
#include "rng.hpp"

namespace mfbsde {

// Coefficients of dX = E'[b(t, X', X)] dt + E'[sigma(t, X', X)] dW, where the
// primed copy ranges over the reference cloud.
struct ForwardSpec {
    using Field = std::function<void(double t, std::span<const double> x_ref, std::span<const double> x,
                                     std::span<double> out)>;
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    Field drift;      // writes state_dim values
    Field diffusion;  // writes state_dim x noise_dim values, row-major
    bool reference_free = false;
    std::size_t max_reference_atoms = 0;  // 0 averages over the whole cloud
};

struct MomentReport {
    double p = 2.0;
    double sup_moment = 0.0;        // max over nodes of E|X_t|^p
    double increment_moment = 0.0;  // max over steps of E|X_{t+dt} - X_t|^p
    double increment_scale = 0.0;   // increment_moment / dt^(p/2)
};

namespace detail {

inline void validate(const ForwardSpec& s) {
    require(s.state_dim >= 1 && s.noise_dim >= 1, "forward dimensions must be positive");
    require(static_cast<bool>(s.drift) && static_cast<bool>(s.diffusion), "forward coefficients missing");
}

inline std::vector<std::size_t> reference_indices(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    if (cap == 0 || cap >= n) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    idx.resize(cap);
    for (std::size_t i = 0; i < cap; ++i) idx[i] = (i * n) / cap;
    return idx;
}

// Averaged coefficients at (t, x) against cloud atoms `ref` (dim n, path-major).
struct CoefficientAverager {
    const ForwardSpec& spec;
    std::vector<double> tmp_b, tmp_s;
    explicit CoefficientAverager(const ForwardSpec& s)
        : spec(s), tmp_b(s.state_dim), tmp_s(s.state_dim * s.noise_dim) {}

    void operator()(double t, const std::vector<double>& ref, const std::vector<std::size_t>& idx,
                    std::span<const double> x, std::span<double> b, std::span<double> sig) {
        const std::size_t n = spec.state_dim;
        std::fill(b.begin(), b.end(), 0.0);
        std::fill(sig.begin(), sig.end(), 0.0);
        if (spec.reference_free) {
            spec.drift(t, x, x, b);
            spec.diffusion(t, x, x, sig);
            return;
        }
        for (std::size_t j : idx) {
            std::span<const double> xr(ref.data() + j * n, n);
            spec.drift(t, xr, x, tmp_b);
            spec.diffusion(t, xr, x, tmp_s);
            for (std::size_t a = 0; a < b.size(); ++a) b[a] += tmp_b[a];
            for (std::size_t a = 0; a < sig.size(); ++a) sig[a] += tmp_s[a];
        }
        const double w = 1.0 / static_cast<double>(idx.size());
        for (double& v : b) v *= w;
        for (double& v : sig) v *= w;
    }
};

inline void check_finite_slice(const PathBatch& x, std::size_t k) {
    for (std::size_t p = 0; p < x.n_paths; ++p)
        for (std::size_t j = 0; j < x.dim; ++j) {
            const double v = x.at(p, k, j);
            if (!std::isfinite(v) || std::abs(v) > 1e150) throw DivergenceError("forward state blew up", k);
        }
}

// One Euler-Maruyama step for every path of `out` from node k, with the cloud
// `ref` (path-major states at the same time) supplying the primed copy.
inline void euler_step(const ForwardSpec& spec, PathBatch& out, std::size_t k, double t, double dt,
                       const NoiseBatch& noise, const std::vector<double>& ref,
                       const std::vector<std::size_t>& idx) {
    const std::size_t n = spec.state_dim, d = spec.noise_dim;
    for_blocks(
        out.n_paths,
        [&](std::size_t, std::size_t lo, std::size_t hi) {
            CoefficientAverager avg(spec);
            std::vector<double> b(n), s(n * d);
            for (std::size_t p = lo; p < hi; ++p) {
                auto x = out.state(p, k);
                avg(t, ref, idx, std::span<const double>(x.data(), n), b, s);
                auto dw = noise.step(p, k);
                auto xn = out.state(p, k + 1);
                for (std::size_t a = 0; a < n; ++a) {
                    double v = x[a] + b[a] * dt;
                    for (std::size_t c = 0; c < d; ++c) v += s[a * d + c] * dw[c];
                    xn[a] = v;
                }
            }
        },
        16);
}

} // namespace detail

// Self-consistent cloud started at x0: the cloud is its own reference law.
inline PathBatch integrate_reference(const ForwardSpec& spec, std::span<const double> x0, const TimeGrid& grid,
                                     const NoiseBatch& noise) {
    detail::validate(spec);
    require(x0.size() == spec.state_dim, "initial state has the wrong dimension");
    require(noise.dim == spec.noise_dim, "noise dimension does not match the coefficients");
    require(noise.grid == grid, "noise was sampled on a different grid");
    for (double v : x0) require(std::isfinite(v), "initial state must be finite");
    PathBatch x = make_path_batch(grid, noise.n_paths, spec.state_dim);
    for (std::size_t p = 0; p < x.n_paths; ++p)
        for (std::size_t a = 0; a < spec.state_dim; ++a) x.at(p, 0, a) = x0[a];
    const auto idx = detail::reference_indices(x.n_paths, spec.max_reference_atoms);
    const double dt = grid.dt();
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const std::vector<double> ref = x.slice(k);
        detail::euler_step(spec, x, k, grid.time(k), dt, noise, ref, idx);
        detail::check_finite_slice(x, k + 1);
    }
    return x;
}

inline PathBatch integrate_reference(const ForwardSpec& spec, std::span<const double> x0, const TimeGrid& grid,
                                     std::size_t n_paths, const SeedSpec& seed) {
    return integrate_reference(spec, x0, grid, sample_brownian(grid, n_paths, spec.noise_dim, seed));
}

inline std::size_t node_of(const TimeGrid& grid, double t) {
    const double pos = (t - grid.t_start) / grid.dt();
    const double r = std::round(pos);
    require(std::abs(pos - r) <= 1e-9 * std::max(1.0, std::abs(pos)) && r >= 0.0 &&
                r <= static_cast<double>(grid.n_steps),
            "start time is not a node of the reference grid");
    return static_cast<std::size_t>(r);
}

// Paths from (t_start, x) driven by a frozen reference cloud.
inline PathBatch integrate_from(const ForwardSpec& spec, const PathBatch& reference, double t_start,
                                std::span<const double> x, std::size_t n_paths, const SeedSpec& seed) {
    detail::validate(spec);
    require(reference.dim == spec.state_dim, "reference cloud has the wrong dimension");
    require(x.size() == spec.state_dim, "start state has the wrong dimension");
    const std::size_t k0 = node_of(reference.grid, t_start);
    require(k0 < reference.grid.n_steps, "start time must precede the horizon");
    const TimeGrid sub{reference.grid.time(k0), reference.grid.t_end, reference.grid.n_steps - k0};
    const NoiseBatch noise = sample_brownian(sub, n_paths, spec.noise_dim, seed);
    PathBatch out = make_path_batch(sub, n_paths, spec.state_dim);
    for (std::size_t p = 0; p < n_paths; ++p)
        for (std::size_t a = 0; a < spec.state_dim; ++a) out.at(p, 0, a) = x[a];
    const auto idx = detail::reference_indices(reference.n_paths, spec.max_reference_atoms);
    const double dt = sub.dt();
    for (std::size_t k = 0; k < sub.n_steps; ++k) {
        const std::vector<double> ref = reference.slice(k0 + k);
        detail::euler_step(spec, out, k, sub.time(k), dt, noise, ref, idx);
        detail::check_finite_slice(out, k + 1);
    }
    return out;
}

inline double increment_moment(const PathBatch& b, double p, std::size_t lag) {
    require(lag >= 1 && lag <= b.grid.n_steps, "lag out of range");
    double worst = 0.0;
    for (std::size_t k = 0; k + lag <= b.grid.n_steps; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < b.n_paths; ++i) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < b.dim; ++j) {
                const double d = b.at(i, k + lag, j) - b.at(i, k, j);
                n2 += d * d;
            }
            s += std::pow(n2, 0.5 * p);
        }
        worst = std::max(worst, s / static_cast<double>(b.n_paths));
    }
    return worst;
}

inline MomentReport moment_report(const PathBatch& b, double p) {
    require(p >= 1.0 && std::isfinite(p), "moment order must be at least 1");
    require(b.n_paths >= 1, "empty path batch");
    MomentReport r;
    r.p = p;
    for (std::size_t k = 0; k <= b.grid.n_steps; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < b.n_paths; ++i) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < b.dim; ++j) n2 += b.at(i, k, j) * b.at(i, k, j);
            s += std::pow(n2, 0.5 * p);
        }
        r.sup_moment = std::max(r.sup_moment, s / static_cast<double>(b.n_paths));
    }
    r.increment_moment = increment_moment(b, p, 1);
    r.increment_scale = r.increment_moment / std::pow(b.grid.dt(), 0.5 * p);
    return r;
}

// Largest observed ratio (|b| + |sigma|) / (1 + |x| + |x'|) over random probes.
inline double probe_linear_growth(const ForwardSpec& spec, double radius, std::size_t n_probes,
                                  const SeedSpec& seed) {
    detail::validate(spec);
    StreamRng rng(seed);
    const std::size_t n = spec.state_dim, d = spec.noise_dim;
    std::vector<double> x(n), xr(n), b(n), s(n * d);
    double worst = 0.0;
    for (std::size_t it = 0; it < n_probes; ++it) {
        const double t = rng.uniform();
        double nx = 0.0, nr = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            x[a] = rng.uniform(-radius, radius);
            xr[a] = rng.uniform(-radius, radius);
            nx += x[a] * x[a];
            nr += xr[a] * xr[a];
        }
        spec.drift(t, xr, x, b);
        spec.diffusion(t, xr, x, s);
        double nb = 0.0, ns = 0.0;
        for (double v : b) nb += v * v;
        for (double v : s) ns += v * v;
        worst = std::max(worst, (std::sqrt(nb) + std::sqrt(ns)) / (1.0 + std::sqrt(nx) + std::sqrt(nr)));
    }
    return worst;
}

} // namespace mfbsde
