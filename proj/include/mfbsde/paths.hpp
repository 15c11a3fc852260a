#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace mfbsde {

inline constexpr std::size_t kMaxBatchElements = std::size_t{1} << 30;

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    std::size_t n_steps = 1;

    double horizon() const { return t_end - t_start; }
    double dt() const { return horizon() / static_cast<double>(n_steps); }
    double time(std::size_t k) const {
        return k >= n_steps ? t_end : t_start + static_cast<double>(k) * dt();
    }
    std::vector<double> points() const {
        std::vector<double> t(n_steps + 1);
        for (std::size_t k = 0; k <= n_steps; ++k) t[k] = time(k);
        return t;
    }
    bool operator==(const TimeGrid&) const = default;
};

inline TimeGrid make_grid(double t_start, double t_end, std::size_t n_steps) {
    require(std::isfinite(t_start) && std::isfinite(t_end), "grid endpoints must be finite");
    require(t_start < t_end, "grid requires t_start < t_end");
    require(n_steps >= 1, "grid requires at least one step");
    return TimeGrid{t_start, t_end, n_steps};
}

inline std::size_t checked_volume(std::size_t a, std::size_t b, std::size_t c) {
    const std::size_t lim = std::numeric_limits<std::size_t>::max();
    if (a != 0 && b > lim / a) throw CapacityError("batch size overflows");
    const std::size_t ab = a * b;
    if (ab != 0 && c > lim / ab) throw CapacityError("batch size overflows");
    const std::size_t v = ab * c;
    if (v > kMaxBatchElements)
        throw CapacityError("batch of " + std::to_string(v) + " values exceeds the limit of " +
                            std::to_string(kMaxBatchElements));
    return v;
}

// Increments laid out [path][step][component].
struct NoiseBatch {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t dim = 1;
    std::vector<double> increments;

    double at(std::size_t p, std::size_t k, std::size_t j = 0) const {
        return increments[(p * grid.n_steps + k) * dim + j];
    }
    std::span<const double> step(std::size_t p, std::size_t k) const {
        return {increments.data() + (p * grid.n_steps + k) * dim, dim};
    }
};

// States laid out [path][node][component], nodes 0..n_steps.
struct PathBatch {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::size_t dim = 1;
    std::vector<double> states;

    std::size_t n_nodes() const { return grid.n_steps + 1; }
    double at(std::size_t p, std::size_t k, std::size_t j = 0) const {
        return states[(p * n_nodes() + k) * dim + j];
    }
    double& at(std::size_t p, std::size_t k, std::size_t j = 0) {
        return states[(p * n_nodes() + k) * dim + j];
    }
    std::span<const double> state(std::size_t p, std::size_t k) const {
        return {states.data() + (p * n_nodes() + k) * dim, dim};
    }
    std::span<double> state(std::size_t p, std::size_t k) {
        return {states.data() + (p * n_nodes() + k) * dim, dim};
    }
    // Cross-section at node k, path-major.
    std::vector<double> slice(std::size_t k) const {
        std::vector<double> out(n_paths * dim);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (std::size_t j = 0; j < dim; ++j) out[p * dim + j] = at(p, k, j);
        return out;
    }
};

inline PathBatch make_path_batch(const TimeGrid& grid, std::size_t n_paths, std::size_t dim) {
    PathBatch b{grid, n_paths, dim, {}};
    b.states.assign(checked_volume(n_paths, grid.n_steps + 1, dim), 0.0);
    return b;
}

// Path p draws from stream seed.stream_id + p.
inline NoiseBatch sample_brownian(const TimeGrid& grid, std::size_t n_paths, std::size_t dim,
                                  const SeedSpec& seed) {
    require(n_paths >= 1, "need at least one path");
    require(dim >= 1, "need at least one noise component");
    NoiseBatch nb{grid, n_paths, dim, {}};
    nb.increments.resize(checked_volume(n_paths, grid.n_steps, dim));
    const double sd = std::sqrt(grid.dt());
    const std::size_t per_path = grid.n_steps * dim;
    parallel_for(
        n_paths,
        [&](std::size_t p) {
            StreamRng rng(seed.master_seed, seed.stream_id + p);
            double* out = nb.increments.data() + p * per_path;
            for (std::size_t i = 0; i < per_path; ++i) out[i] = sd * rng.normal();
        },
        64);
    return nb;
}

// Same as sample_brownian but with an explicit stream per path.
inline NoiseBatch sample_brownian_streams(const TimeGrid& grid, std::span<const std::uint64_t> streams,
                                          std::size_t dim, std::uint64_t master_seed) {
    require(!streams.empty(), "need at least one path");
    require(dim >= 1, "need at least one noise component");
    NoiseBatch nb{grid, streams.size(), dim, {}};
    nb.increments.resize(checked_volume(streams.size(), grid.n_steps, dim));
    const double sd = std::sqrt(grid.dt());
    const std::size_t per_path = grid.n_steps * dim;
    parallel_for(
        streams.size(),
        [&](std::size_t p) {
            StreamRng rng(master_seed, streams[p]);
            double* out = nb.increments.data() + p * per_path;
            for (std::size_t i = 0; i < per_path; ++i) out[i] = sd * rng.normal();
        },
        64);
    return nb;
}

inline PathBatch cumulate(const NoiseBatch& noise) {
    PathBatch w = make_path_batch(noise.grid, noise.n_paths, noise.dim);
    const std::size_t n = noise.grid.n_steps, d = noise.dim;
    parallel_for(
        noise.n_paths,
        [&](std::size_t p) {
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                w.at(p, 0, j) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += noise.at(p, k, j);
                    w.at(p, k + 1, j) = acc;
                }
            }
        },
        64);
    return w;
}

} // namespace mfbsde
