#include <gtest/gtest.h>

#include <mfbsde/bounds.hpp>
#include <mfbsde/catalog.hpp>
#include <mfbsde/particles.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mfbsde;

TEST(Particles, MeanDriverWithConstantTerminal) {
    // g = E[Y], eta = c: every particle solves Y' = -Y, so Y_t = c e^{T-t}.
    const double c = 0.6;
    const TimeGrid g = make_grid(0.0, 1.0, 200);
    const auto d = make_driver("linear-mean", {{"a", 1.0}}, GrowthProfile{});
    const ParticleSolution ps = solve_particles(32, d, make_terminal("constant", {{"c", c}}), g, RegressionConfig{}, {4, 0});
    for (std::size_t k = 0; k <= 200; k += 25)
        for (std::size_t i = 0; i < 32; i += 7) EXPECT_NEAR(ps.Y(i, k), c * std::exp(1.0 - g.time(k)), 5e-3);
    for (double e : ps.z_offdiag_energy) EXPECT_NEAR(e, 0.0, 1e-20);
}

TEST(Particles, StaysInsideTheUniformBound) {
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    GrowthProfile prof;
    const auto d = make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, prof);
    const auto h = make_terminal("tanh", {{"scale", 0.8}});
    const double bound = compute_bounds(d.profile, 1.0).particle_y_bound;
    for (std::size_t n : {8u, 64u, 256u})
        for (std::uint64_t seed : {1u, 2u, 3u, 9u}) {
        const ParticleSolution ps = solve_particles(n, d, h, g, RegressionConfig{}, {seed, 0});
        EXPECT_LE(ps.solution.diagnostics.sup_abs_y, 1.1 * bound);
        EXPECT_EQ(ps.solution.diagnostics.clipped, 0u);
    }
}

TEST(Particles, OffDiagonalEnergyIsAtTheNoiseFloor) {
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    const auto d = make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const auto h = make_terminal("tanh", {{"scale", 0.8}});
    const ParticleSolution ps = solve_particles(16, d, h, g, RegressionConfig{}, {21, 0});
    ASSERT_EQ(ps.z_offdiag_energy.size(), 16u * 20u);
    const double e = std::accumulate(ps.z_offdiag_energy.begin(), ps.z_offdiag_energy.end(), 0.0);
    const double f = std::accumulate(ps.z_offdiag_noise_floor.begin(), ps.z_offdiag_noise_floor.end(), 0.0);
    EXPECT_GT(f, 0.0);
    EXPECT_LE(e, 3.0 * f);
    const ParticleSolution big = solve_particles(17, d, h, g, RegressionConfig{}, {21, 0});
    EXPECT_TRUE(big.z_offdiag_energy.empty());
}

TEST(Particles, PermutingStreamsPermutesParticles) {
    const TimeGrid g = make_grid(0.0, 1.0, 10);
    const auto d = make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const auto h = make_terminal("tanh", {{"scale", 0.8}});
    std::vector<std::uint64_t> s(40);
    std::iota(s.begin(), s.end(), std::uint64_t{100});
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[3], perm[17]);
    std::vector<std::uint64_t> t(40);
    for (std::size_t i = 0; i < 40; ++i) t[i] = s[perm[i]];
    const ParticleSolution a = solve_particles(d, h, g, RegressionConfig{}, 5, s);
    const ParticleSolution b = solve_particles(d, h, g, RegressionConfig{}, 5, t);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t k = 0; k <= 10; ++k) ASSERT_EQ(b.Y(i, k), a.Y(perm[i], k)) << i << " " << k;
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t k = 0; k < 10; ++k) ASSERT_EQ(b.solution.Z(i, k), a.solution.Z(perm[i], k));
}

TEST(Particles, ThreadCountInvariant) {
    const TimeGrid g = make_grid(0.0, 1.0, 10);
    const auto d = make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const auto h = make_terminal("tanh", {});
    ParticleSolution a, b;
    {
        ScopedThreads th(1);
        a = solve_particles(2000, d, h, g, RegressionConfig{}, {3, 0});
    }
    {
        ScopedThreads th(4);
        b = solve_particles(2000, d, h, g, RegressionConfig{}, {3, 0});
    }
    EXPECT_EQ(a.solution.y, b.solution.y);
}

TEST(Particles, ConvergenceStudyShape) {
    const TimeGrid g = make_grid(0.0, 1.0, 10);
    const auto d = make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const auto h = make_terminal("tanh", {{"scale", 0.8}});
    const std::vector<std::size_t> n{32, 128};
    const ConvergenceTable t = convergence_study(d, h, g, RegressionConfig{}, PicardConfig{}, n, {7, 0});
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.limit_paths, 8u * 128u);
    EXPECT_TRUE(t.limit_converged);
    EXPECT_GT(t.rows[0].w2_y, 0.0);
    EXPECT_LT(t.rows[1].w2_y, t.rows[0].w2_y);
    EXPECT_LT(t.fit.slope, 0.0);
}

TEST(Particles, Errors) {
    const TimeGrid g = make_grid(0.0, 1.0, 4);
    const auto d = make_driver("zero", {}, GrowthProfile{});
    EXPECT_THROW(solve_particles(1, d, make_terminal("constant", {}), g, RegressionConfig{}, {1, 0}), InvalidArgument);
    const std::vector<std::size_t> dec{64, 32};
    EXPECT_THROW(convergence_study(d, make_terminal("constant", {}), g, RegressionConfig{}, PicardConfig{}, dec, {1, 0}),
                 InvalidArgument);
}
