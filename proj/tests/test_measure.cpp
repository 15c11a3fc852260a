#include <gtest/gtest.h>

#include <mfbsde/measure.hpp>
#include <mfbsde/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mfbsde;

namespace {

double brute_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    std::vector<std::size_t> p(a.size());
    std::iota(p.begin(), p.end(), std::size_t{0});
    double best = 1e300;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < a.dim(); ++j) {
                const double t = a.atom(i)[j] - b.atom(p[i])[j];
                c += t * t;
            }
        best = std::min(best, c);
    } while (std::next_permutation(p.begin(), p.end()));
    return std::sqrt(best / a.size());
}

// Quantile functions of two samples evaluated on a fine midpoint rule.
double quantile_integral(std::vector<double> a, std::vector<double> b, std::size_t cells) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const double u = (c + 0.5) / cells;
        const double qa = a[std::min(a.size() - 1, std::size_t(u * a.size()))];
        const double qb = b[std::min(b.size() - 1, std::size_t(u * b.size()))];
        s += (qa - qb) * (qa - qb);
    }
    return std::sqrt(s / cells);
}

} // namespace

TEST(Wasserstein, TranslationGivesShift) {
    const auto a = EmpiricalMeasure::scalar({0.0, 1.0, 2.0});
    const auto b = EmpiricalMeasure::scalar({3.0, 4.0, 5.0});
    EXPECT_DOUBLE_EQ(w2_quantile_1d(a, b), 3.0);
    EXPECT_NEAR(w2_assignment(a, b), 3.0, 1e-12);
}

TEST(Wasserstein, DistanceToOrigin) {
    const auto a = EmpiricalMeasure::scalar({3.0, -4.0});
    EXPECT_DOUBLE_EQ(w2_to_dirac0(a), std::sqrt(12.5));
    EXPECT_DOUBLE_EQ(w2_to_dirac0(EmpiricalMeasure(2, {3.0, 4.0})), 5.0);
}

TEST(Wasserstein, SymmetricAndZeroOnSelf) {
    StreamRng r(3, 0);
    std::vector<double> x(40), y(40);
    for (auto& v : x) v = r.normal();
    for (auto& v : y) v = r.normal() * 2;
    const auto a = EmpiricalMeasure::scalar(x), b = EmpiricalMeasure::scalar(y);
    EXPECT_DOUBLE_EQ(w2_quantile_1d(a, b), w2_quantile_1d(b, a));
    EXPECT_EQ(w2_quantile_1d(a, a), 0.0);
    EXPECT_NEAR(w2_assignment(a, a), 0.0, 1e-12);
}

TEST(Wasserstein, QuantileMatchesAssignmentInOneDimension) {
    StreamRng r(17, 0);
    for (int c = 0; c < 20; ++c) {
        std::vector<double> x(30), y(30);
        for (auto& v : x) v = r.normal();
        for (auto& v : y) v = r.uniform(-1, 3);
        const auto a = EmpiricalMeasure::scalar(x), b = EmpiricalMeasure::scalar(y);
        EXPECT_NEAR(w2_quantile_1d(a, b), w2_assignment(a, b), 1e-12);
    }
}

TEST(Wasserstein, UnequalSizesUseQuantileFunctions) {
    StreamRng r(8, 0);
    std::vector<double> x(6), y(10);
    for (auto& v : x) v = r.normal();
    for (auto& v : y) v = r.normal() + 0.5;
    // Breakpoints are multiples of 1/30, so a midpoint rule on 30k cells is exact.
    const double oracle = quantile_integral(x, y, 3000);
    EXPECT_NEAR(w2_quantile_1d(EmpiricalMeasure::scalar(x), EmpiricalMeasure::scalar(y)), oracle, 1e-12);
}

TEST(Wasserstein, AssignmentMatchesBruteForce) {
    StreamRng r(2024, 0);
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 1 + r.next_u64() % 8, d = 1 + r.next_u64() % 3;
        std::vector<double> x(n * d), y(n * d);
        for (auto& v : x) v = r.normal();
        for (auto& v : y) v = r.uniform(-2, 2);
        const EmpiricalMeasure a(d, x), b(d, y);
        EXPECT_NEAR(w2_assignment(a, b), brute_w2(a, b), 1e-10);
    }
}

TEST(Wasserstein, TriangleInequalityOnRandomTriples) {
    StreamRng r(77, 0);
    for (int c = 0; c < 20; ++c) {
        std::vector<double> x(12), y(12), z(12);
        for (auto& v : x) v = r.normal();
        for (auto& v : y) v = r.normal() * 3;
        for (auto& v : z) v = r.uniform(-1, 1);
        const EmpiricalMeasure a(2, x), b(2, y), m(2, z);
        EXPECT_LE(w2_assignment(a, b), w2_assignment(a, m) + w2_assignment(m, b) + 1e-12);
    }
}

TEST(Wasserstein, Errors) {
    const auto a = EmpiricalMeasure::scalar({1.0, 2.0});
    const auto b = EmpiricalMeasure::scalar({1.0, 2.0, 3.0});
    EXPECT_THROW(w2_assignment(a, b), InvalidArgument);
    EXPECT_THROW(w2_assignment(EmpiricalMeasure(2, {1, 2}), EmpiricalMeasure::scalar({1.0})), InvalidArgument);
    EXPECT_THROW(w2_quantile_1d(EmpiricalMeasure(2, {1, 2}), a), InvalidArgument);
    EXPECT_THROW(EmpiricalMeasure::scalar({}), InvalidArgument);
    EXPECT_THROW(EmpiricalMeasure::scalar({std::nan("")}), InvalidArgument);
    std::vector<double> big(513, 0.0);
    EXPECT_THROW(w2_assignment(EmpiricalMeasure::scalar(big), EmpiricalMeasure::scalar(big)), CapacityError);
}

TEST(RateFit, ExactPowerLaw) {
    const std::vector<double> n{64, 128, 256, 512};
    std::vector<double> e;
    for (double v : n) e.push_back(3.0 * std::pow(v, -0.5));
    const RateFit f = fit_rate(n, e);
    EXPECT_NEAR(f.slope, -0.5, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.residual_norm, 0.0, 1e-12);
}

TEST(RateFit, RejectsDegenerateInput) {
    EXPECT_THROW(fit_rate(std::vector<double>{1.0}, std::vector<double>{1.0}), InvalidArgument);
    EXPECT_THROW(fit_rate(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 0.0}), InvalidArgument);
    EXPECT_THROW(fit_rate(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 0.5}), InvalidArgument);
    EXPECT_THROW(fit_rate(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}), InvalidArgument);
}
