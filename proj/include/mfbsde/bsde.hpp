#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "driver.hpp"
#include "errors.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "paths.hpp"
#include "regression.hpp"
#include "rng.hpp"

namespace mfbsde {

// Per-step laws of (Y_k, Z_k), k = 0..n_steps-1. Empty vectors stand for
// Dirac masses at zero.
struct FrozenLaws {
    std::vector<EmpiricalMeasure> y_laws;
    std::vector<EmpiricalMeasure> z_laws;
};

struct BsdeDiagnostics {
    double sup_abs_y = 0.0;
    double bmo_proxy = 0.0;
    double z_clip = 0.0;
    std::size_t clipped = 0;
    std::vector<double> residual_rms;  // per step, rms of Y_{k+1} - E_k[Y_{k+1}]
    std::vector<double> condition;     // per step regression condition estimate
    std::vector<std::size_t> sweeps;   // implicit sweeps used per step
    std::vector<std::string> warnings;
};

struct BsdeSolution {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t z_dim = 1;
    std::vector<double> y;      // [path][node], nodes 0..n_steps
    std::vector<double> z;      // [path][step][component]
    std::vector<double> cond;   // [path][step], fitted E_k[Y_{k+1}]
    BsdeDiagnostics diagnostics;

    std::size_t n_nodes() const { return grid.n_steps + 1; }
    double Y(std::size_t p, std::size_t k) const { return y[p * n_nodes() + k]; }
    double Z(std::size_t p, std::size_t k, std::size_t j = 0) const {
        return z[(p * grid.n_steps + k) * z_dim + j];
    }
    std::span<const double> z_at(std::size_t p, std::size_t k) const {
        return {z.data() + (p * grid.n_steps + k) * z_dim, z_dim};
    }
    std::vector<double> y_slice(std::size_t k) const {
        std::vector<double> out(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) out[p] = Y(p, k);
        return out;
    }
    std::vector<double> z_slice(std::size_t k) const {
        std::vector<double> out(n_paths * z_dim);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (std::size_t j = 0; j < z_dim; ++j) out[p * z_dim + j] = Z(p, k, j);
        return out;
    }
    EmpiricalMeasure y_law(std::size_t k) const { return EmpiricalMeasure::scalar(y_slice(k)); }
    EmpiricalMeasure z_law(std::size_t k) const { return EmpiricalMeasure(z_dim, z_slice(k)); }
    double y0() const {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) s += Y(p, 0);
        return s / static_cast<double>(n_paths);
    }
    // Monte Carlo standard error of the time-zero value, from the spread of Y_1.
    double y0_stderr() const {
        const std::size_t k = std::min<std::size_t>(1, grid.n_steps);
        double m = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) m += Y(p, k);
        m /= static_cast<double>(n_paths);
        double v = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) v += (Y(p, k) - m) * (Y(p, k) - m);
        return std::sqrt(v / static_cast<double>(n_paths) / static_cast<double>(n_paths));
    }
    double stderr_at(std::size_t k) const {
        double m = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) m += Y(p, k);
        m /= static_cast<double>(n_paths);
        double v = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) v += (Y(p, k) - m) * (Y(p, k) - m);
        return std::sqrt(v / static_cast<double>(n_paths) / static_cast<double>(n_paths));
    }
};

inline double bmo_proxy(const BsdeSolution& s) {
    const std::size_t n = s.grid.n_steps;
    const double dt = s.grid.dt();
    std::vector<double> per_step(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < s.n_paths; ++p)
            for (std::size_t j = 0; j < s.z_dim; ++j) acc += s.Z(p, k, j) * s.Z(p, k, j);
        per_step[k] = acc / static_cast<double>(s.n_paths) * dt;
    }
    double tail = 0.0, best = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        tail += per_step[k];
        best = std::max(best, tail);
    }
    return best;
}

inline double default_z_clip(const DriverSpec& d, double T) {
    const BoundsReport b = compute_bounds(d.profile, T);
    const double v = d.profile.gamma * b.M1;
    return std::isfinite(v) ? std::max(10.0, v) : 1e300;
}

namespace detail {

// Supplies the laws used at step k given the current Y proxies and Z values.
struct LawSource {
    // Frozen mode: laws are read from here.
    const FrozenLaws* frozen = nullptr;
    // Coupled mode: laws are rebuilt from the current cross-section.
    bool coupled = false;
};

inline std::vector<std::size_t> canonical_order(const PathBatch& f, const NoiseBatch& noise,
                                                const std::vector<double>& next_y, std::size_t k) {
    const std::size_t n = f.n_paths;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t j = 0; j < f.dim; ++j) {
            const double va = f.at(a, k, j), vb = f.at(b, k, j);
            if (va != vb) return va < vb;
        }
        for (std::size_t j = 0; j < noise.dim; ++j) {
            const double va = noise.at(a, k, j), vb = noise.at(b, k, j);
            if (va != vb) return va < vb;
        }
        return next_y[a] < next_y[b];
    });
    return idx;
}

inline EmpiricalMeasure ordered_measure(std::size_t dim, const std::vector<double>& v,
                                        const std::vector<std::size_t>& order) {
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) a[i * dim + j] = v[order[i] * dim + j];
    return EmpiricalMeasure(dim, std::move(a));
}

inline double ordered_mean(const std::vector<double>& v, const std::vector<std::size_t>& order) {
    double s = 0.0;
    for (std::size_t i : order) s += v[i];
    return s / static_cast<double>(order.size());
}

inline constexpr std::size_t kMaxSweeps = 5;
inline constexpr double kSweepTol = 1e-10;

inline BsdeSolution lsmc_core(const DriverSpec& driver, const LawSource& laws, std::span<const double> terminal,
                              const PathBatch& features, const NoiseBatch& noise, const RegressionConfig& cfg,
                              bool canonical) {
    validate(driver);
    validate(cfg);
    const TimeGrid& grid = noise.grid;
    const std::size_t n = noise.n_paths, N = grid.n_steps, d = noise.dim;
    require(features.grid == grid, "features and noise live on different grids");
    require(features.n_paths == n, "features and noise have different path counts");
    require(terminal.size() == n, "terminal values do not match the path count");
    if (laws.frozen) {
        const auto& fl = *laws.frozen;
        require(fl.y_laws.empty() || fl.y_laws.size() == N, "frozen Y-laws must cover every step");
        require(fl.z_laws.empty() || fl.z_laws.size() == N, "frozen Z-laws must cover every step");
        for (const auto& m : fl.z_laws) require(m.dim() == d, "frozen Z-law has the wrong dimension");
    }
    for (double v : terminal) require(std::isfinite(v), "terminal values must be finite");

    BsdeSolution s;
    s.grid = grid;
    s.n_paths = n;
    s.z_dim = d;
    s.y.assign(checked_volume(n, N + 1, 1), 0.0);
    s.z.assign(checked_volume(n, N, d), 0.0);
    s.cond.assign(checked_volume(n, N, 1), 0.0);
    auto& diag = s.diagnostics;
    diag.residual_rms.assign(N, 0.0);
    diag.condition.assign(N, 1.0);
    diag.sweeps.assign(N, 0);
    diag.z_clip = cfg.z_max ? *cfg.z_max : default_z_clip(driver, grid.horizon());

    double term_sup = 0.0;
    for (double v : terminal) term_sup = std::max(term_sup, std::abs(v));
    if (term_sup > driver.profile.K1 * (1.0 + 1e-12))
        diag.warnings.push_back("terminal sup " + std::to_string(term_sup) + " exceeds K1 " +
                                std::to_string(driver.profile.K1));

    const std::size_t Nn = N + 1;
    std::vector<double> next(terminal.begin(), terminal.end());
    for (std::size_t p = 0; p < n; ++p) s.y[p * Nn + N] = next[p];

    const EmpiricalMeasure zero_y = EmpiricalMeasure::dirac(1), zero_z = EmpiricalMeasure::dirac(d);
    const double dt = grid.dt();
    std::vector<double> feat(n * features.dim), target(n), zk(n * d), e(n), y(n), y_new(n);
    std::vector<std::size_t> order(n);

    for (std::size_t k = N; k-- > 0;) {
        const double t = grid.time(k);
        if (canonical) order = canonical_order(features, noise, next, k);
        else std::iota(order.begin(), order.end(), std::size_t{0});

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t j = 0; j < features.dim; ++j) feat[p * features.dim + j] = features.at(p, k, j);
        CrossSectionRegression reg(feat, n, features.dim, cfg, k, order);
        diag.condition[k] = reg.condition();

        // Conditional expectation of Y_{k+1}.
        e = reg.fit(next);
        // Z_k from the martingale increment, centred by the fitted expectation.
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t p = 0; p < n; ++p) target[p] = (next[p] - e[p]) * noise.at(p, k, j) / dt;
            const auto fz = reg.fit(target);
            for (std::size_t p = 0; p < n; ++p) zk[p * d + j] = fz[p];
        }
        for (std::size_t p = 0; p < n; ++p) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) n2 += zk[p * d + j] * zk[p * d + j];
            const double nz = std::sqrt(n2);
            if (nz > diag.z_clip) {
                const double sc = diag.z_clip / nz;
                for (std::size_t j = 0; j < d; ++j) zk[p * d + j] *= sc;
                ++diag.clipped;
            }
        }

        // Laws for this step.
        EmpiricalMeasure z_meas, y_meas;
        const EmpiricalMeasure* zm = &zero_z;
        const EmpiricalMeasure* ym = &zero_y;
        if (laws.coupled) {
            z_meas = ordered_measure(d, zk, order);
            zm = &z_meas;
        } else if (laws.frozen) {
            if (!laws.frozen->z_laws.empty()) zm = &laws.frozen->z_laws[k];
            if (!laws.frozen->y_laws.empty()) ym = &laws.frozen->y_laws[k];
        }
        const LawView zl = LawView::of(*zm);
        LawView yl = LawView::of(*ym);

        y = e;
        std::size_t sweeps = 0;
        const bool single = !driver.uses_y && !(laws.coupled && driver.uses_y_law);
        for (; sweeps < kMaxSweeps; ++sweeps) {
            if (laws.coupled) {
                y_meas = ordered_measure(1, y, order);
                yl = LawView::of(y_meas);
            }
            parallel_for(n, [&](std::size_t p) {
                DriverPoint pt;
                pt.t = t;
                pt.step = k;
                pt.path = p;
                pt.y = y[p];
                pt.z = std::span<const double>(zk.data() + p * d, d);
                pt.x = features.state(p, k);
                pt.y_law = &yl;
                pt.z_law = &zl;
                y_new[p] = e[p] + driver(pt) * dt;
            });
            double gap = 0.0;
            for (std::size_t p = 0; p < n; ++p) gap = std::max(gap, std::abs(y_new[p] - y[p]));
            y.swap(y_new);
            if (single || gap <= kSweepTol) {
                ++sweeps;
                break;
            }
        }
        diag.sweeps[k] = sweeps;

        double rss = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (!std::isfinite(y[p])) throw DivergenceError("non-finite Y", k);
            rss += (next[p] - e[p]) * (next[p] - e[p]);
        }
        diag.residual_rms[k] = std::sqrt(rss / static_cast<double>(n));
        for (std::size_t p = 0; p < n; ++p) {
            s.y[p * Nn + k] = y[p];
            s.cond[p * N + k] = e[p];
            for (std::size_t j = 0; j < d; ++j) s.z[(p * N + k) * d + j] = zk[p * d + j];
        }
        next = y;
    }

    for (double v : s.y) diag.sup_abs_y = std::max(diag.sup_abs_y, std::abs(v));
    diag.bmo_proxy = bmo_proxy(s);
    return s;
}

} // namespace detail

// Backward least-squares Monte Carlo for one BSDE with the laws of (Y, Z)
// frozen step by step. `features` is the forward state used as regressors.
inline BsdeSolution solve_lsmc(const DriverSpec& driver, const FrozenLaws& laws, std::span<const double> terminal,
                               const PathBatch& features, const NoiseBatch& noise, const RegressionConfig& cfg) {
    detail::LawSource src;
    src.frozen = &laws;
    return detail::lsmc_core(driver, src, terminal, features, noise, cfg, false);
}

using TerminalPayoff = std::function<double(std::span<const double> w_terminal)>;

// Terminal values h(W_T) along each path of a Brownian batch.
inline std::vector<double> terminal_values(const TerminalPayoff& h, const PathBatch& w) {
    std::vector<double> out(w.n_paths);
    for (std::size_t p = 0; p < w.n_paths; ++p) out[p] = h(w.state(p, w.grid.n_steps));
    return out;
}

// (1/gamma) log E[exp(gamma h(W_T))] by plain Monte Carlo.
inline double cole_hopf_y0(double gamma, const TerminalPayoff& h, double T, std::size_t dim, std::size_t n_mc,
                           const SeedSpec& seed) {
    require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
    require(T > 0.0 && std::isfinite(T), "horizon must be positive");
    require(n_mc >= 1 && dim >= 1, "need samples");
    std::vector<double> a(n_mc);
    const double sd = std::sqrt(T);
    parallel_for(n_mc, [&](std::size_t i) {
        StreamRng rng(seed.master_seed, seed.stream_id + i);
        std::vector<double> w(dim);
        for (double& v : w) v = sd * rng.normal();
        a[i] = gamma * h(w);
    });
    const double mx = *std::max_element(a.begin(), a.end());
    const double s = block_sum(n_mc, [&](std::size_t i) { return std::exp(a[i] - mx); });
    return (mx + std::log(s / static_cast<double>(n_mc))) / gamma;
}

} // namespace mfbsde
