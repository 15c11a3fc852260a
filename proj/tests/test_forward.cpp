#include <gtest/gtest.h>

#include <mfbsde/forward.hpp>

#include <cmath>

using namespace mfbsde;

namespace {

ForwardSpec reference_mean(double rate, double sigma) {
    ForwardSpec s;
    s.drift = [rate](double, std::span<const double> xr, std::span<const double>, std::span<double> out) {
        out[0] = rate * xr[0];
    };
    s.diffusion = [sigma](double, std::span<const double>, std::span<const double>, std::span<double> out) {
        out[0] = sigma;
    };
    return s;
}

double slice_mean(const PathBatch& b, std::size_t k) {
    double m = 0.0;
    for (std::size_t p = 0; p < b.n_paths; ++p) m += b.at(p, k);
    return m / b.n_paths;
}

} // namespace

TEST(Forward, CloudMeanFollowsTheMeanOde) {
    const double r = 0.5, x0v = 1.0;
    const TimeGrid g = make_grid(0.0, 1.0, 50);
    const std::vector<double> x0{x0v};
    const std::size_t n = 3000;
    const PathBatch x = integrate_reference(reference_mean(r, 0.3), x0, g, n, {7, 0});
    // Euler on the mean gives x0 (1 + r dt)^k; the noise only adds a sampling error.
    for (std::size_t k = 0; k <= g.n_steps; k += 10) {
        const double expect = x0v * std::pow(1.0 + r * g.dt(), double(k));
        EXPECT_NEAR(slice_mean(x, k), expect, 4.0 * 0.3 * std::sqrt(g.time(k) * std::exp(2 * r) / n) + 1e-12);
    }
}

TEST(Forward, PureNoiseIncrementsScaleWithDt) {
    ForwardSpec s = reference_mean(0.0, 1.0);
    s.reference_free = true;
    for (std::size_t steps : {10u, 40u}) {
        const TimeGrid g = make_grid(0.0, 1.0, steps);
        const std::vector<double> x0{0.0};
        const PathBatch x = integrate_reference(s, x0, g, 40000, {3, 0});
        const MomentReport m = moment_report(x, 2.0);
        EXPECT_NEAR(m.increment_scale, 1.0, 0.05);
        EXPECT_NEAR(m.sup_moment, 1.0, 0.05);
    }
}

TEST(Forward, LinearGrowthProbe) {
    const ForwardSpec s = reference_mean(0.5, 0.3);
    const double ratio = probe_linear_growth(s, 10.0, 2000, {1, 0});
    EXPECT_GT(ratio, 0.0);
    EXPECT_LE(ratio, 0.8 + 1e-12);
}

TEST(Forward, RestartFromFrozenCloud) {
    const double r = 0.5;
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    const std::vector<double> x0{1.0};
    const PathBatch ref = integrate_reference(reference_mean(r, 0.2), x0, g, 2000, {5, 0});
    const std::vector<double> start{2.0};
    const PathBatch y = integrate_from(reference_mean(r, 0.2), ref, 0.5, start, 2000, {9, 0});
    EXPECT_EQ(y.grid.n_steps, 10u);
    EXPECT_DOUBLE_EQ(y.grid.t_start, 0.5);
    // The drift reads the reference mean, so the restarted cloud moves by the same amount.
    const double shift = slice_mean(ref, 20) - slice_mean(ref, 10);
    EXPECT_NEAR(slice_mean(y, 10) - 2.0, shift, 4.0 * 0.2 * std::sqrt(0.5 / 2000) + 1e-9);
}

TEST(Forward, ThreadCountInvariant) {
    const TimeGrid g = make_grid(0.0, 1.0, 10);
    const std::vector<double> x0{1.0};
    PathBatch a, b;
    {
        ScopedThreads t(1);
        a = integrate_reference(reference_mean(0.5, 0.3), x0, g, 2500, {7, 0});
    }
    {
        ScopedThreads t(3);
        b = integrate_reference(reference_mean(0.5, 0.3), x0, g, 2500, {7, 0});
    }
    EXPECT_EQ(a.states, b.states);
}

TEST(Forward, Errors) {
    const TimeGrid g = make_grid(0.0, 1.0, 10);
    const std::vector<double> bad{1.0, 2.0};
    EXPECT_THROW(integrate_reference(reference_mean(0.5, 0.3), bad, g, 10, {1, 0}), InvalidArgument);
    ForwardSpec s;
    const std::vector<double> x0{0.0};
    EXPECT_THROW(integrate_reference(s, x0, g, 10, {1, 0}), InvalidArgument);
    ForwardSpec blow = reference_mean(0.0, 1.0);
    blow.drift = [](double, std::span<const double>, std::span<const double> x, std::span<double> out) {
        out[0] = 1e200 * (1.0 + x[0] * x[0]);
    };
    EXPECT_THROW(integrate_reference(blow, x0, g, 10, {1, 0}), DivergenceError);
}
