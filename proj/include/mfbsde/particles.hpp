#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "bsde.hpp"
#include "measure.hpp"
#include "paths.hpp"
#include "picard.hpp"

namespace mfbsde {

inline constexpr std::size_t kOffDiagonalMaxParticles = 16;

struct ParticleSolution {
    std::size_t n_particles = 0;
    std::vector<std::uint64_t> streams;
    BsdeSolution solution;  // Y^i and the diagonal Z^{i,i}
    // Only for small systems: per particle and step, the squared off-diagonal
    // coefficient mass sum_{j != i} |Z^{i,j}|^2 and the residual noise floor
    // that bounds what a single ensemble can resolve.
    std::vector<double> z_offdiag_energy;       // [particle][step]
    std::vector<double> z_offdiag_noise_floor;  // [particle][step], residual^2 / dt

    double Y(std::size_t i, std::size_t k) const { return solution.Y(i, k); }
};

namespace detail {
inline double invariant_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double v : terms) s += v;
    return s;
}

inline void off_diagonal(ParticleSolution& ps, const NoiseBatch& noise) {
    const auto& s = ps.solution;
    const std::size_t N = ps.n_particles, K = s.grid.n_steps, d = s.z_dim;
    const double dt = s.grid.dt();
    ps.z_offdiag_energy.assign(N * K, 0.0);
    ps.z_offdiag_noise_floor.assign(N * K, 0.0);
    if (N < 2) return;
    std::vector<double> num, den;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            double r = s.Y(i, k + 1) - s.cond[i * K + k];
            for (std::size_t c = 0; c < d; ++c) r -= s.Z(i, k, c) * noise.at(i, k, c);
            num.clear();
            den.clear();
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    const double w = noise.at(j, k, c);
                    num.push_back(r * w);
                    den.push_back(w * w);
                }
            }
            const double beta = invariant_sum(num) / invariant_sum(den);
            ps.z_offdiag_energy[i * K + k] = static_cast<double>((N - 1) * d) * beta * beta;
            ps.z_offdiag_noise_floor[i * K + k] = r * r / dt;
        }
    }
}
} // namespace detail

// N-particle system: particle i is driven by its own Brownian motion (stream
// streams[i]), has terminal h(W^i_T), and sees the empirical laws of all
// Y^j and Z^{j,j} at each step. Regressions run across the ensemble in a
// label-free order, so permuting streams permutes the output exactly.
inline ParticleSolution solve_particles(const DriverSpec& driver, const TerminalPayoff& payoff, const TimeGrid& grid,
                                        const RegressionConfig& cfg, std::uint64_t master_seed,
                                        std::span<const std::uint64_t> streams, std::size_t dim = 1) {
    require(streams.size() >= 2, "particle system needs at least two particles");
    require(static_cast<bool>(payoff), "terminal payoff missing");
    const NoiseBatch noise = sample_brownian_streams(grid, streams, dim, master_seed);
    const PathBatch w = cumulate(noise);
    const auto eta = terminal_values(payoff, w);
    detail::LawSource src;
    src.coupled = true;
    ParticleSolution ps;
    ps.n_particles = streams.size();
    ps.streams.assign(streams.begin(), streams.end());
    ps.solution = detail::lsmc_core(driver, src, eta, w, noise, cfg, true);
    if (ps.n_particles <= kOffDiagonalMaxParticles) detail::off_diagonal(ps, noise);
    return ps;
}

inline std::vector<std::uint64_t> consecutive_streams(const SeedSpec& seed, std::size_t n) {
    std::vector<std::uint64_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = seed.stream_id + i;
    return s;
}

inline ParticleSolution solve_particles(std::size_t n_particles, const DriverSpec& driver, const TerminalPayoff& payoff,
                                        const TimeGrid& grid, const RegressionConfig& cfg, const SeedSpec& seed,
                                        std::size_t dim = 1) {
    const auto streams = consecutive_streams(seed, n_particles);
    return solve_particles(driver, payoff, grid, cfg, seed.master_seed, streams, dim);
}

// Mean-field limit: independent paths on streams seed.stream_id + p, laws by
// Picard iteration.
inline PicardResult solve_decoupled_limit(const DriverSpec& driver, const TerminalPayoff& payoff, const TimeGrid& grid,
                                          const RegressionConfig& cfg, const PicardConfig& pc, std::size_t n_paths,
                                          const SeedSpec& seed, std::size_t dim = 1) {
    const NoiseBatch noise = sample_brownian(grid, n_paths, dim, seed);
    const PathBatch w = cumulate(noise);
    const auto eta = terminal_values(payoff, w);
    return picard_meanfield(driver, eta, w, noise, cfg, pc);
}

struct ConvergenceRow {
    std::size_t n_particles = 0;
    double w2_y = 0.0;         // sup over nodes of W2(particle Y-law, limit Y-law)
    double w2_z = 0.0;         // sup over steps of W2(particle Z-law, limit Z-law)
    double mean_sup_dy = 0.0;  // (1/N) sum_i sup_k |Y^i_k - Ybar^i_k|
    double sup_abs_y = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    RateFit fit;  // log-log fit of w2_y against N
    std::size_t limit_paths = 0;
    bool limit_converged = false;
    std::size_t nonincreasing_steps = 0;
};

inline ConvergenceTable convergence_study(const DriverSpec& driver, const TerminalPayoff& payoff, const TimeGrid& grid,
                                          const RegressionConfig& cfg, const PicardConfig& pc,
                                          std::span<const std::size_t> n_list, const SeedSpec& seed,
                                          std::size_t dim = 1) {
    require(n_list.size() >= 2, "convergence study needs at least two ensemble sizes");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        require(n_list[i] >= 2, "ensemble sizes must be at least two");
        if (i > 0) require(n_list[i] > n_list[i - 1], "ensemble sizes must increase");
    }
    ConvergenceTable tab;
    tab.limit_paths = 8 * n_list.back();
    const PicardResult lim = solve_decoupled_limit(driver, payoff, grid, cfg, pc, tab.limit_paths, seed, dim);
    tab.limit_converged = lim.converged;
    const auto& L = lim.solution;
    const std::size_t K = grid.n_steps;
    std::vector<double> sizes, errs;
    for (std::size_t n : n_list) {
        const ParticleSolution ps = solve_particles(n, driver, payoff, grid, cfg, seed, dim);
        const auto& P = ps.solution;
        ConvergenceRow row;
        row.n_particles = n;
        for (std::size_t k = 0; k <= K; ++k) {
            row.w2_y = std::max(row.w2_y, w2_quantile_1d(P.y_law(k), L.y_law(k)));
            if (k < K) {
                const EmpiricalMeasure a = P.z_law(k), b = L.z_law(k);
                if (dim == 1) row.w2_z = std::max(row.w2_z, w2_quantile_1d(a, b));
            }
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (std::size_t k = 0; k <= K; ++k) m = std::max(m, std::abs(P.Y(i, k) - L.Y(i, k)));
            acc += m;
        }
        row.mean_sup_dy = acc / static_cast<double>(n);
        row.sup_abs_y = P.diagnostics.sup_abs_y;
        tab.rows.push_back(row);
        sizes.push_back(static_cast<double>(n));
        errs.push_back(std::max(row.w2_y, 1e-300));
    }
    for (std::size_t i = 1; i < tab.rows.size(); ++i)
        if (tab.rows[i].w2_y <= tab.rows[i - 1].w2_y) ++tab.nonincreasing_steps;
    tab.fit = fit_rate(sizes, errs);
    return tab;
}

} // namespace mfbsde
