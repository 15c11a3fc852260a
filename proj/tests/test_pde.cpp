#include <gtest/gtest.h>

#include <mfbsde/catalog.hpp>
#include <mfbsde/pde.hpp>

#include <cmath>

using namespace mfbsde;

namespace {

PathBatch cloud(const NonlocalProblem& p, std::size_t steps, std::size_t paths = 64) {
    const std::vector<double> x0{p.x0};
    return integrate_reference(forward_spec_of(p), x0, make_grid(0.0, 1.0, steps), paths, {1, 0});
}

double heat_error(std::size_t n_x, std::size_t steps) {
    const NonlocalProblem p = heat_cosine_problem();
    const SpaceGrid sp{-8.0, 8.0, n_x};
    const PdeField f = solve_pde(p, cloud(p, 10), sp, make_grid(0.0, 1.0, steps));
    double worst = 0.0;
    for (std::size_t i = 0; i < n_x; ++i) {
        const double x = sp.x(i);
        if (std::abs(x) > 3.0) continue;
        worst = std::max(worst, std::abs(f.at(0, i) - std::cos(x) * std::exp(-0.5)));
    }
    return worst;
}

} // namespace

TEST(Pde, HeatEquationWithCosineData) {
    EXPECT_LE(heat_error(401, 1000), 5e-3);
}

TEST(Pde, SpatialRefinementReducesTheError) {
    const double coarse = heat_error(101, 4000), fine = heat_error(201, 4000);
    EXPECT_GE(coarse / fine, 2.0) << coarse << " vs " << fine;
}

TEST(Pde, MaximumPrinciple) {
    const NonlocalProblem p = heat_cosine_problem();
    const PdeField f = solve_pde(p, cloud(p, 10), SpaceGrid{}, make_grid(0.0, 1.0, 1000));
    for (double u : f.u) {
        EXPECT_LE(u, 1.0 + 1e-12);
        EXPECT_GE(u, -1.0 - 1e-12);
    }
}

TEST(Pde, QuadraticBumpMatchesOracle) {
    // (1/1) log E exp(exp(-(x + W_1)^2)) at x = 0, frozen from quadrature.
    const NonlocalProblem p = quadratic_bump_problem();
    const PdeField f = solve_pde(p, cloud(p, 10), SpaceGrid{}, make_grid(0.0, 1.0, 1000));
    EXPECT_NEAR(f.interpolate(0, 0.0), 0.63169497499138651, 2e-3);
}

TEST(Pde, OrderedTerminalsGiveOrderedSolutions) {
    NonlocalProblem lo = quadratic_bump_problem(), hi = quadratic_bump_problem();
    hi.terminal = [](double, double x) { return std::exp(-x * x) + 0.2 * std::exp(-(x - 1) * (x - 1)); };
    const PathBatch ref = cloud(lo, 10);
    const TimeGrid tg = make_grid(0.0, 1.0, 1000);
    const PdeField a = solve_pde(lo, ref, SpaceGrid{}, tg), b = solve_pde(hi, ref, SpaceGrid{}, tg);
    for (std::size_t i = 0; i < a.u.size(); ++i) ASSERT_LE(a.u[i], b.u[i] + 1e-12);
}

TEST(Pde, StabilityGuard) {
    const NonlocalProblem p = heat_cosine_problem();
    EXPECT_THROW(solve_pde(p, cloud(p, 10), SpaceGrid{}, make_grid(0.0, 1.0, 100)), InvalidArgument);
}

TEST(Pde, TimeGridMustRefineReference) {
    const NonlocalProblem p = heat_cosine_problem();
    EXPECT_THROW(solve_pde(p, cloud(p, 7), SpaceGrid{}, make_grid(0.0, 1.0, 1000)), InvalidArgument);
}

TEST(Pde, InterpolationClampsAtEdges) {
    const NonlocalProblem p = heat_cosine_problem();
    const PdeField f = solve_pde(p, cloud(p, 10), SpaceGrid{}, make_grid(0.0, 1.0, 1000));
    bool clamped = false;
    EXPECT_EQ(f.interpolate(0, 100.0, &clamped), f.at(0, f.space.n_x - 1));
    EXPECT_TRUE(clamped);
    clamped = false;
    f.interpolate(0, 0.3, &clamped);
    EXPECT_FALSE(clamped);
}

TEST(Pde, FeynmanKacOnHeatProblem) {
    FeynmanKacConfig cfg;
    cfg.n_paths = 1 << 12;
    cfg.bsde_steps = 20;
    cfg.seed = {3, 0};
    cfg.regression.basis = BasisKind::piecewise_linear;
    const FeynmanKacReport r = feynman_kac_check(heat_cosine_problem(), cfg);
    EXPECT_NEAR(r.u0, std::exp(-0.5), 5e-3);
    EXPECT_TRUE(r.passed) << "gap " << r.gap;
    EXPECT_LE(r.gap, 4.0 * r.y0_stderr + 2e-2);
}
