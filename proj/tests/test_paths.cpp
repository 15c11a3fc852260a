#include <gtest/gtest.h>

#include <mfbsde/paths.hpp>
#include <mfbsde/rng.hpp>

#include <cmath>

using namespace mfbsde;

TEST(Grid, UniformSpacing) {
    const TimeGrid g = make_grid(0.0, 1.0, 4);
    const auto t = g.points();
    ASSERT_EQ(t.size(), 5u);
    EXPECT_DOUBLE_EQ(t[0], 0.0);
    EXPECT_DOUBLE_EQ(t[1], 0.25);
    EXPECT_DOUBLE_EQ(t[4], 1.0);
    EXPECT_DOUBLE_EQ(g.dt(), 0.25);
}

TEST(Grid, RejectsBadInput) {
    EXPECT_THROW(make_grid(1.0, 1.0, 4), InvalidArgument);
    EXPECT_THROW(make_grid(1.0, 0.0, 4), InvalidArgument);
    EXPECT_THROW(make_grid(0.0, 1.0, 0), InvalidArgument);
    EXPECT_THROW(make_grid(0.0, std::nan(""), 3), InvalidArgument);
}

TEST(Brownian, StreamsAreReproducible) {
    const TimeGrid g = make_grid(0.0, 1.0, 8);
    const auto a = sample_brownian(g, 16, 2, {5, 0});
    const auto b = sample_brownian(g, 16, 2, {5, 0});
    EXPECT_EQ(a.increments, b.increments);
    const auto c = sample_brownian(g, 16, 2, {6, 0});
    EXPECT_NE(a.increments, c.increments);
}

TEST(Brownian, PathDependsOnlyOnItsStream) {
    const TimeGrid g = make_grid(0.0, 1.0, 8);
    const auto a = sample_brownian(g, 10, 1, {3, 0});
    const auto b = sample_brownian(g, 4, 1, {3, 6});  // streams 6..9
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(a.at(p + 6, k), b.at(p, k));
}

TEST(Brownian, ThreadCountDoesNotChangeDraws) {
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    NoiseBatch a, b;
    {
        ScopedThreads t(1);
        a = sample_brownian(g, 3000, 1, {11, 0});
    }
    {
        ScopedThreads t(5);
        b = sample_brownian(g, 3000, 1, {11, 0});
    }
    EXPECT_EQ(a.increments, b.increments);
}

TEST(Brownian, VarianceMatchesTimeWithinFourStandardErrors) {
    const TimeGrid g = make_grid(0.0, 1.0, 100);
    const std::size_t n = 100000;
    const PathBatch w = cumulate(sample_brownian(g, n, 1, {1, 0}));
    for (std::size_t k = 1; k <= g.n_steps; k += 9) {
        double m = 0.0, v = 0.0;
        for (std::size_t p = 0; p < n; ++p) m += w.at(p, k);
        m /= n;
        for (std::size_t p = 0; p < n; ++p) v += (w.at(p, k) - m) * (w.at(p, k) - m);
        v /= (n - 1.0);
        const double t = g.time(k);
        EXPECT_LE(std::abs(v - t), 4.0 * t * std::sqrt(2.0 / (n - 1.0))) << "t=" << t;
        EXPECT_LE(std::abs(m), 4.0 * std::sqrt(t / n));
    }
}

TEST(Brownian, ComponentsAreUncorrelated) {
    const TimeGrid g = make_grid(0.0, 1.0, 1);
    const std::size_t n = 50000;
    const auto nb = sample_brownian(g, n, 2, {9, 0});
    double c = 0.0;
    for (std::size_t p = 0; p < n; ++p) c += nb.at(p, 0, 0) * nb.at(p, 0, 1);
    c /= n;
    EXPECT_LE(std::abs(c), 4.0 / std::sqrt(double(n)));
}

TEST(Brownian, CumulateStartsAtZeroAndSums) {
    const TimeGrid g = make_grid(0.0, 2.0, 5);
    const auto nb = sample_brownian(g, 3, 2, {1, 0});
    const auto w = cumulate(nb);
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_EQ(w.at(p, 0, j), 0.0);
            double acc = 0.0;
            for (std::size_t k = 0; k < 5; ++k) acc += nb.at(p, k, j);
            EXPECT_DOUBLE_EQ(w.at(p, 5, j), acc);
        }
}

TEST(Brownian, CapacityIsEnforced) {
    const TimeGrid g = make_grid(0.0, 1.0, 1000);
    EXPECT_THROW(sample_brownian(g, std::size_t{1} << 24, 128, {1, 0}), CapacityError);
    EXPECT_THROW(checked_volume(std::size_t(-1), 2, 2), CapacityError);
}

TEST(Rng, UniformIsOpenInterval) {
    StreamRng r(1, 2);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, NormalMoments) {
    StreamRng r(42, 0);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}
