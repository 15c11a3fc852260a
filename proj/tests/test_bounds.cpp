#include <gtest/gtest.h>

#include <mfbsde/bounds.hpp>

#include <cmath>

using namespace mfbsde;

namespace {

void expect_rel(double got, double want, double rel = 1e-12) {
    EXPECT_NEAR(got, want, rel * std::abs(want)) << "want " << want;
}

} // namespace

// Reference values computed independently at 50 digits for the default profile
// (K1=1, K2=.5, K3=.25, K=1, gamma=1, gamma0=.1, alpha=.5, beta=beta0=1,
// gamma_tilde=1) on the unit horizon.
TEST(Bounds, FrozenDefaultProfile) {
    const BoundsReport b = compute_bounds(GrowthProfile{}, 1.0);
    expect_rel(b.L1, 3.0);
    expect_rel(b.L2, 821.63569918333155);
    expect_rel(b.eps0, 0.0625);
    expect_rel(b.L3, 0.3456);
    expect_rel(b.L4, 4.21875e-5);
    expect_rel(b.L5, 208.36667359430315);
    expect_rel(b.L6, 3335.8694775088503);
    expect_rel(b.M1, 56.89973773381682);
    expect_rel(b.M2, 1.1757536958585663e27, 1e-10);
    expect_rel(b.C_alpha, 0.10546875);
    expect_rel(b.M2_tilde, 14.7781121978613);
    expect_rel(b.M1_tilde, 2.4883580947861301);
    expect_rel(b.particle_y_bound, 13.620442315806809);
    EXPECT_FALSE(b.gamma0_small);
}

TEST(Bounds, FirstBoundIsRootOfExponentialEnvelope) {
    const BoundsReport b = compute_bounds(GrowthProfile{}, 1.0);
    expect_rel(b.M1, std::sqrt(b.C_bar * std::exp(b.C_bar)));
}

TEST(Bounds, SmallLawCouplingPassesTheSmallnessCheck) {
    GrowthProfile p;
    p.gamma0 = 1e-3;
    EXPECT_TRUE(compute_bounds(p, 1.0).gamma0_small);
}

TEST(Bounds, MonotoneInTerminalBoundAndHorizon) {
    GrowthProfile lo, hi;
    hi.K1 = 2.0;
    const BoundsReport a = compute_bounds(lo, 1.0), b = compute_bounds(hi, 1.0);
    EXPECT_LT(a.M1, b.M1);
    EXPECT_LT(a.particle_y_bound, b.particle_y_bound);
    EXPECT_LT(a.L1, b.L1);
    const BoundsReport c = compute_bounds(lo, 2.0);
    EXPECT_LT(a.particle_y_bound, c.particle_y_bound);
}

TEST(Bounds, EnergyTransform) {
    EXPECT_EQ(energy_transform(0.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(energy_transform(1.0, 1.0), std::exp(1.0) - 2.0);
    EXPECT_DOUBLE_EQ(energy_transform(-1.0, 2.0), energy_transform(1.0, 2.0));
    const double h = 1e-6;
    for (double x : {-2.0, -0.3, 0.4, 1.7}) {
        const double fd = (energy_transform(x + h, 1.5) - energy_transform(x - h, 1.5)) / (2 * h);
        EXPECT_NEAR(energy_transform_slope(x, 1.5), fd, 1e-6);
    }
}

TEST(Bounds, RejectsNonPositiveConstants) {
    GrowthProfile p;
    p.K3 = 0.0;
    EXPECT_THROW(compute_bounds(p, 1.0), InvalidArgument);
    EXPECT_THROW(compute_bounds(GrowthProfile{}, 0.0), InvalidArgument);
    GrowthProfile q;
    q.alpha = 1.5;
    EXPECT_THROW(compute_bounds(q, 1.0), InvalidArgument);
}
