#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bsde.hpp"
#include "driver.hpp"
#include "errors.hpp"
#include "measure.hpp"
#include "paths.hpp"
#include "regression.hpp"
#include "rng.hpp"

namespace mfbsde {

struct PicardConfig {
    double tol = 1e-3;
    std::size_t max_iter = 20;
    double relaxation = 1.0;  // weight on the newest iterate, in (0, 1]
};

inline void validate(const PicardConfig& c) {
    require(std::isfinite(c.tol) && c.tol > 0.0, "Picard tolerance must be positive");
    require(c.max_iter >= 1, "Picard needs at least one iteration");
    require(std::isfinite(c.relaxation) && c.relaxation > 0.0 && c.relaxation <= 1.0,
            "relaxation weight must lie in (0, 1]");
}

struct PicardIterate {
    std::size_t iteration = 0;
    double y_law_gap = 0.0;    // max over steps of W2 between new and frozen Y-laws
    double z_law_gap = 0.0;
    double sup_y_delta = 0.0;  // sup-norm change of the Y field
    double bmo_proxy = 0.0;
    double y0 = 0.0;
};

struct PicardResult {
    BsdeSolution solution;
    std::vector<PicardIterate> history;
    bool converged = false;
    std::size_t iterations = 0;
};

// W2 between two cross-sections of `dim`-vectors. Scalars use the exact
// quantile coupling; vectors use the assignment solver up to its cap and the
// pathwise coupling (an upper bound) beyond it.
inline double cross_section_w2(const std::vector<double>& a, const std::vector<double>& b, std::size_t dim) {
    const EmpiricalMeasure ma(dim, a), mb(dim, b);
    if (dim == 1) return w2_quantile_1d(ma, mb);
    if (ma.size() == mb.size() && ma.size() <= kAssignmentCap) return w2_assignment(ma, mb);
    require(a.size() == b.size(), "pathwise coupling needs equal sizes");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(ma.size()));
}

// Fixed-point iteration over the laws of (Y, Z): each pass solves a BSDE
// with the previous pass's laws frozen. The first pass freezes Z at zero and
// Y at the terminal law.
inline PicardResult picard_meanfield(const DriverSpec& driver, std::span<const double> terminal,
                                     const PathBatch& features, const NoiseBatch& noise, const RegressionConfig& cfg,
                                     const PicardConfig& pc) {
    validate(pc);
    const std::size_t n = noise.n_paths, N = noise.grid.n_steps, d = noise.dim;
    require(terminal.size() == n, "terminal values do not match the path count");

    // Frozen fields, pathwise; laws are read off them.
    std::vector<std::vector<double>> y_field(N, std::vector<double>(terminal.begin(), terminal.end()));
    std::vector<std::vector<double>> z_field(N, std::vector<double>(n * d, 0.0));

    PicardResult res;
    std::vector<double> prev_y;
    for (std::size_t it = 1; it <= pc.max_iter; ++it) {
        FrozenLaws laws;
        laws.y_laws.reserve(N);
        laws.z_laws.reserve(N);
        for (std::size_t k = 0; k < N; ++k) {
            laws.y_laws.push_back(EmpiricalMeasure::scalar(y_field[k]));
            laws.z_laws.push_back(EmpiricalMeasure(d, z_field[k]));
        }
        BsdeSolution sol = solve_lsmc(driver, laws, terminal, features, noise, cfg);

        PicardIterate rec;
        rec.iteration = it;
        for (std::size_t k = 0; k < N; ++k) {
            const auto ys = sol.y_slice(k);
            const auto zs = sol.z_slice(k);
            rec.y_law_gap = std::max(rec.y_law_gap, cross_section_w2(ys, y_field[k], 1));
            rec.z_law_gap = std::max(rec.z_law_gap, cross_section_w2(zs, z_field[k], d));
        }
        if (!prev_y.empty())
            for (std::size_t i = 0; i < sol.y.size(); ++i)
                rec.sup_y_delta = std::max(rec.sup_y_delta, std::abs(sol.y[i] - prev_y[i]));
        else
            rec.sup_y_delta = std::numeric_limits<double>::infinity();
        rec.bmo_proxy = sol.diagnostics.bmo_proxy;
        rec.y0 = sol.y0();
        if (!std::isfinite(rec.y_law_gap) || !std::isfinite(rec.z_law_gap))
            throw DivergenceError("Picard law gap is not finite", it);
        res.history.push_back(rec);
        prev_y = sol.y;

        const double w = pc.relaxation;
        for (std::size_t k = 0; k < N; ++k) {
            const auto ys = sol.y_slice(k);
            const auto zs = sol.z_slice(k);
            for (std::size_t i = 0; i < n; ++i) y_field[k][i] = w * ys[i] + (1.0 - w) * y_field[k][i];
            for (std::size_t i = 0; i < n * d; ++i) z_field[k][i] = w * zs[i] + (1.0 - w) * z_field[k][i];
        }
        res.solution = std::move(sol);
        res.iterations = it;
        if (std::max(rec.y_law_gap, rec.z_law_gap) <= pc.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

struct SplitResult {
    BsdeSolution solution;      // Y includes the deterministic shift
    std::vector<double> shift;  // per node, zero at the terminal node
    double base_y0 = 0.0;
};

// Drivers of the form local(t, z) + law_term(t, Z-law): solve the local BSDE
// once, then add the time integral of law_term along the resulting Z-laws.
inline SplitResult solve_additive_split(const DriverSpec& driver, std::span<const double> terminal,
                                        const PathBatch& features, const NoiseBatch& noise,
                                        const RegressionConfig& cfg) {
    validate(driver);
    require(driver.split.has_value(), "driver has no additive split");
    DriverSpec local = driver;
    const auto loc = driver.split->local;
    local.g = [loc](const DriverPoint& pt) { return loc(pt.t, pt.z); };
    local.uses_y = false;
    local.uses_y_law = false;
    local.uses_z_law = false;
    local.split.reset();
    SplitResult r;
    r.solution = solve_lsmc(local, FrozenLaws{}, terminal, features, noise, cfg);
    r.base_y0 = r.solution.y0();
    const std::size_t N = noise.grid.n_steps;
    const double dt = noise.grid.dt();
    r.shift.assign(N + 1, 0.0);
    for (std::size_t k = N; k-- > 0;) {
        const EmpiricalMeasure zl = r.solution.z_law(k);
        const LawView v = LawView::of(zl);
        r.shift[k] = r.shift[k + 1] + driver.split->law_term(noise.grid.time(k), v) * dt;
    }
    auto& s = r.solution;
    for (std::size_t p = 0; p < s.n_paths; ++p)
        for (std::size_t k = 0; k <= N; ++k) s.y[p * s.n_nodes() + k] += r.shift[k];
    s.diagnostics.sup_abs_y = 0.0;
    for (double v : s.y) s.diagnostics.sup_abs_y = std::max(s.diagnostics.sup_abs_y, std::abs(v));
    return r;
}

// Two ordered parameter sets: (lower_terminal, lower) and (upper_terminal, upper).
struct ComparisonCase {
    std::uint64_t seed = 0;
    double T = 1.0;
    DriverSpec lower;
    DriverSpec upper;
    TerminalPayoff lower_terminal;
    TerminalPayoff upper_terminal;
};

struct ComparisonVerdict {
    bool holds = false;
    double max_violation = 0.0;  // max over paths and nodes of Y_lower - Y_upper
    double pooled_stderr = 0.0;
    double threshold = 0.0;
    double lower_y0 = 0.0;
    double upper_y0 = 0.0;
    bool converged = false;
};

// Randomised pointwise check that the lower pair is dominated by the upper pair.
inline bool check_dominance(const ComparisonCase& c, std::size_t n_probes, const SeedSpec& seed,
                            std::size_t dim = 1) {
    StreamRng rng(seed);
    std::vector<double> w(dim), z(dim);
    for (std::size_t i = 0; i < n_probes; ++i) {
        for (double& v : w) v = rng.uniform(-6.0, 6.0);
        if (!(c.lower_terminal(w) <= c.upper_terminal(w))) return false;
        for (double& v : z) v = rng.uniform(-5.0, 5.0);
        const EmpiricalMeasure my = detail::random_measure(rng, 1, 3.0);
        const EmpiricalMeasure mz = detail::random_measure(rng, dim, 3.0);
        const LawView ly = LawView::of(my), lz = LawView::of(mz);
        DriverPoint pt;
        pt.t = rng.uniform(0.0, c.T);
        pt.y = rng.uniform(-3.0, 3.0);
        pt.z = z;
        pt.y_law = &ly;
        pt.z_law = &lz;
        if (!(c.lower(pt) <= c.upper(pt))) return false;
    }
    return true;
}

// Random ordered pair inside the Lipschitz-quadratic class of `profile`:
//   lower = theta + a y + b z + c gamma/2 |z|^2
//   upper = lower + s (mean of Y-law)^+ + delta
// with terminals A tanh(W_T + m) and the same plus a non-negative offset.
inline ComparisonCase generate_comparison_case(std::uint64_t seed, const GrowthProfile& profile, double T = 1.0) {
    validate(profile);
    require(T > 0.0 && std::isfinite(T), "horizon must be positive");
    StreamRng rng(seed, 0xC0FFEE);
    const double K = profile.K, gam = profile.gamma;
    const double a = rng.uniform(-0.5, 0.5) * K;
    const double b = rng.uniform(-0.5, 0.5);
    const double c = rng.uniform(-0.5, 0.5);
    const double s = rng.uniform(0.0, 0.5) * K;
    const double theta_cap = std::sqrt(profile.K3 / T);
    const double lin = b * b / gam;  // |b z| <= gam/4 |z|^2 + b^2/gam
    const double room = std::max(0.0, theta_cap - lin);
    const double theta = rng.uniform(-0.5, 0.5) * room;
    const double delta = rng.uniform(0.0, 0.5) * (room - std::abs(theta));
    const double A = rng.uniform(0.2, 0.6) * profile.K1;
    const double m = rng.uniform(-0.5, 0.5);
    const double d_eta = rng.uniform(0.0, 1.0) * (profile.K1 - A);

    ComparisonCase cc;
    cc.seed = seed;
    cc.T = T;
    auto base = [=](const DriverPoint& pt) {
        const double z = pt.z.empty() ? 0.0 : pt.z[0];
        return theta + a * pt.y + b * z + c * 0.5 * gam * z * z;
    };
    cc.lower.name = "comparison-lower";
    cc.lower.g = base;
    cc.lower.profile = profile;
    cc.lower.uses_y = a != 0.0;
    cc.upper.name = "comparison-upper";
    cc.upper.g = [=](const DriverPoint& pt) { return base(pt) + s * std::max(0.0, pt.y_law->mean0()) + delta; };
    cc.upper.profile = profile;
    cc.upper.uses_y = a != 0.0;
    cc.upper.uses_y_law = true;
    cc.upper.nondecreasing_in_y_law = true;
    cc.lower_terminal = [=](std::span<const double> w) { return A * std::tanh(w[0] + m); };
    cc.upper_terminal = [=](std::span<const double> w) { return A * std::tanh(w[0] + m) + d_eta; };
    return cc;
}

inline ComparisonVerdict run_comparison(const ComparisonCase& c, const PathBatch& features, const NoiseBatch& noise,
                                        const RegressionConfig& cfg, const PicardConfig& pc) {
    // Terminals are read off the features, which must be the Brownian paths.
    const auto lo_t = terminal_values(c.lower_terminal, features);
    const auto up_t = terminal_values(c.upper_terminal, features);
    const PicardResult lo = picard_meanfield(c.lower, lo_t, features, noise, cfg, pc);
    const PicardResult up = picard_meanfield(c.upper, up_t, features, noise, cfg, pc);
    ComparisonVerdict v;
    v.converged = lo.converged && up.converged;
    v.lower_y0 = lo.solution.y0();
    v.upper_y0 = up.solution.y0();
    v.max_violation = -std::numeric_limits<double>::infinity();
    const auto& a = lo.solution;
    const auto& b = up.solution;
    for (std::size_t i = 0; i < a.y.size(); ++i) v.max_violation = std::max(v.max_violation, a.y[i] - b.y[i]);
    for (std::size_t k = 0; k <= a.grid.n_steps; ++k) {
        const double sa = a.stderr_at(k), sb = b.stderr_at(k);
        v.pooled_stderr = std::max(v.pooled_stderr, std::sqrt(sa * sa + sb * sb));
    }
    v.threshold = 3.0 * v.pooled_stderr + 1e-3;
    v.holds = v.max_violation <= v.threshold;
    return v;
}

} // namespace mfbsde
