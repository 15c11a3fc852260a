#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "catalog.hpp"
#include "experiment.hpp"
#include "mfbsde.hpp"

namespace mfbsde {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

// Multiplier on every acceptance tolerance; values below one tighten them.
inline double tolerance_scale() {
    if (const char* env = std::getenv("MFBSDE_TOL_SCALE")) {
        char* end = nullptr;
        const double v = std::strtod(env, &end);
        if (end != env && std::isfinite(v) && v >= 0.0) return v;
    }
    return 1.0;
}

namespace acceptance {

inline std::string kv(const std::string& k, double v) { return k + "=" + fmt17(v); }

inline CriterionResult cole_hopf(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 50);
    const NoiseBatch nz = sample_brownian(g, 1u << 14, 1, {seed, 0});
    const PathBatch w = cumulate(nz);
    const DriverSpec d = make_driver("pure-quadratic", {{"gamma", 2.0}}, GrowthProfile{});
    const auto eta = terminal_values(make_terminal("indicator", {}), w);
    RegressionConfig rc;
    rc.basis = BasisKind::piecewise_linear;
    const BsdeSolution sol = solve_lsmc(d, {}, eta, w, nz, rc);
    const double exact = 0.5 * std::log((std::exp(2.0) + 1.0) / 2.0);
    const double err = std::abs(sol.y0() - exact), tol = 5e-2 * s;
    return {1, "quadratic driver matches the exponential-transform value", err <= tol,
            kv("y0", sol.y0()) + " " + kv("exact", exact) + " " + kv("error", err) + " " + kv("tol", tol)};
}

inline CriterionResult linear_mean(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 200);
    const NoiseBatch nz = sample_brownian(g, 256, 1, {seed, 0});
    const PathBatch w = cumulate(nz);
    const DriverSpec d = make_driver("linear-mean", {{"a", 1.0}}, GrowthProfile{});
    const std::vector<double> eta(256, 1.0);
    PicardConfig pc;
    pc.max_iter = 10;
    const PicardResult pr = picard_meanfield(d, eta, w, nz, {}, pc);
    const double err = std::abs(pr.solution.y0() - std::exp(1.0)), tol = 1e-2 * s;
    return {2, "mean-of-Y driver converges to e within ten Picard passes", pr.converged && err <= tol,
            kv("y0", pr.solution.y0()) + " " + kv("error", err) + " " + kv("tol", tol) + " " +
                kv("iterations", double(pr.iterations))};
}

inline CriterionResult additive_split(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 50);
    const NoiseBatch nz = sample_brownian(g, 4096, 1, {seed, 0});
    const PathBatch w = cumulate(nz);
    const DriverSpec d = make_driver("additive-split", {{"gamma", 1.0}, {"gamma0", 0.5}}, GrowthProfile{});
    const auto eta = terminal_values(make_terminal("tanh", {{"scale", 0.8}}), w);
    const SplitResult sp = solve_additive_split(d, eta, w, nz, {});
    double shift = 0.0;
    for (std::size_t k = 0; k < g.n_steps; ++k) {
        double e2 = 0.0;
        for (std::size_t p = 0; p < sp.solution.n_paths; ++p) e2 += sp.solution.Z(p, k) * sp.solution.Z(p, k);
        shift += 0.5 * e2 / double(sp.solution.n_paths) * g.dt();
    }
    const double self_gap = std::abs((sp.solution.y0() - sp.base_y0) - shift);
    const PicardResult pr = picard_meanfield(d, eta, w, nz, {}, {});
    const double se = std::hypot(sp.solution.y0_stderr(), pr.solution.y0_stderr());
    const double cross_gap = std::abs(sp.solution.y0() - pr.solution.y0());
    const bool ok = self_gap <= 1e-12 * s && cross_gap <= 3.0 * se * s && pr.converged;
    return {3, "additive split agrees with its shift and with Picard", ok,
            kv("shift_gap", self_gap) + " " + kv("picard_gap", cross_gap) + " " + kv("three_se", 3.0 * se)};
}

inline CriterionResult a_priori_bounds(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 50);
    const NoiseBatch nz = sample_brownian(g, 4096, 1, {seed, 0});
    const PathBatch w = cumulate(nz);
    bool ok = true;
    double worst_y = 0.0, worst_z = 0.0;
    std::size_t members = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const GrowthProfile prof = random_profile(seed * 7919 + i);
        const RandomProblem rp = random_lipschitz_quadratic(seed * 7919 + i, prof, g.horizon());
        const ProbeReport pr = check_driver_class(rp.driver, DriverClass::lipschitz_quadratic, g.horizon(), 1, 500,
                                                  {seed, i});
        if (pr.satisfied) ++members;
        else ok = false;
        const BoundsReport b = compute_bounds(prof, g.horizon());
        const PicardResult res = picard_meanfield(rp.driver, terminal_values(rp.terminal, w), w, nz, {}, {});
        const double ry = res.solution.diagnostics.sup_abs_y / b.M1;
        const double rz = res.solution.diagnostics.bmo_proxy / b.M2;
        worst_y = std::max(worst_y, ry);
        worst_z = std::max(worst_z, rz);
        if (!(ry <= 1.10 * s) || !(rz <= 1.25 * s)) ok = false;
    }
    return {4, "twenty random profiles stay inside their a priori bounds", ok,
            kv("class_members", double(members)) + " " + kv("worst_y_ratio", worst_y) + " " +
                kv("worst_z_ratio", worst_z)};
}

inline CriterionResult comparison(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 50);
    const NoiseBatch nz = sample_brownian(g, 4096, 1, {seed, 0});
    const PathBatch w = cumulate(nz);
    std::size_t held = 0;
    double worst = -1e300;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const ComparisonCase cc = generate_comparison_case(seed * 104729 + i, GrowthProfile{}, 1.0);
        if (!check_dominance(cc, 2000, {seed, i})) continue;
        ComparisonVerdict v = run_comparison(cc, w, nz, {}, {});
        const double slack = v.max_violation - (3.0 * v.pooled_stderr * s + 1e-3 * s);
        worst = std::max(worst, slack);
        if (slack <= 0.0) ++held;
    }
    return {5, "comparison holds on twenty generated ordered pairs", held == 20,
            kv("held", double(held)) + " " + kv("worst_margin", worst)};
}

inline CriterionResult particle_rate(std::uint64_t seed, double s) {
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    const DriverSpec d =
        make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const TerminalPayoff h = make_terminal("tanh", {{"scale", 0.8}});
    const std::vector<std::size_t> n_list{64, 128, 256, 512};
    const ConvergenceTable tab = convergence_study(d, h, g, {}, {}, n_list, {seed, 0});
    const double thr = s > 0.0 ? -0.15 / s : -1e300;
    const bool ok = tab.nonincreasing_steps >= 2 && tab.fit.slope <= thr;
    std::ostringstream os;
    os << kv("slope", tab.fit.slope) << " " << kv("threshold", thr) << " "
       << kv("nonincreasing_steps", double(tab.nonincreasing_steps)) << " w2_y=";
    for (std::size_t i = 0; i < tab.rows.size(); ++i) os << (i ? "," : "") << fmt17(tab.rows[i].w2_y);
    return {6, "particle laws approach the mean-field limit", ok, os.str()};
}

inline CriterionResult exchangeability(std::uint64_t seed, double) {
    const TimeGrid g = make_grid(0.0, 1.0, 20);
    const DriverSpec d =
        make_driver("affine-mean", {{"a", 0.5}, {"b", -0.5}, {"gamma", 1.0}}, GrowthProfile{});
    const TerminalPayoff h = make_terminal("tanh", {{"scale", 0.8}});
    const std::size_t N = 64;
    std::vector<std::uint64_t> streams(N), perm(N);
    std::iota(streams.begin(), streams.end(), std::uint64_t{0});
    std::iota(perm.begin(), perm.end(), std::uint64_t{0});
    StreamRng rng(seed, 0xE8C);
    for (std::size_t i = N; i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    std::vector<std::uint64_t> permuted(N);
    for (std::size_t i = 0; i < N; ++i) permuted[i] = streams[perm[i]];
    const ParticleSolution a = solve_particles(d, h, g, {}, seed, streams);
    const ParticleSolution b = solve_particles(d, h, g, {}, seed, permuted);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k <= g.n_steps; ++k) {
            if (a.Y(perm[i], k) != b.Y(i, k)) ++mismatches;
            if (k < g.n_steps && a.solution.Z(perm[i], k) != b.solution.Z(i, k)) ++mismatches;
        }
    return {7, "relabelling particles permutes the solution bit for bit", mismatches == 0,
            kv("mismatches", double(mismatches))};
}

inline CriterionResult feynman_kac(std::uint64_t seed, double s) {
    FeynmanKacConfig fc;
    fc.space = SpaceGrid{-8.0, 8.0, 401};
    fc.pde_steps = 1000;
    fc.bsde_steps = 50;
    fc.n_paths = 1u << 14;
    fc.seed = {seed, 0};
    fc.regression.basis = BasisKind::piecewise_linear;
    fc.tolerance = 5e-2 * s;
    const FeynmanKacReport heat = feynman_kac_check(heat_cosine_problem(), fc);
    const double pde_err = std::abs(heat.u0 - std::exp(-0.5));
    const FeynmanKacReport quad = feynman_kac_check(quadratic_bump_problem(), fc);
    const bool ok = pde_err <= 5e-3 * s && heat.passed && quad.passed;
    return {8, "PDE and BSDE agree at the start point", ok,
            kv("heat_pde_error", pde_err) + " " + kv("heat_gap", heat.gap) + " " + kv("quadratic_gap", quad.gap)};
}

inline double brute_force_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    const std::size_t n = a.size(), d = a.dim();
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    double best = 1e300;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double t = a.atom(i)[j] - b.atom(p[i])[j];
                c += t * t;
            }
        best = std::min(best, c);
    } while (std::next_permutation(p.begin(), p.end()));
    return std::sqrt(best / double(n));
}

inline CriterionResult assignment_exact(std::uint64_t seed, double s) {
    StreamRng rng(seed, 0xA55);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const std::size_t n = 1 + rng.next_u64() % 8, d = 1 + rng.next_u64() % 3;
        std::vector<double> xa(n * d), xb(n * d);
        for (double& v : xa) v = rng.normal();
        for (double& v : xb) v = 2.0 * rng.uniform() - 1.0;
        const EmpiricalMeasure a(d, xa), b(d, xb);
        worst = std::max(worst, std::abs(w2_assignment(a, b) - brute_force_w2(a, b)));
    }
    return {9, "exact coupling matches brute force on small clouds", worst <= 1e-10 * s, kv("worst_gap", worst)};
}

inline std::vector<ExperimentConfig> determinism_configs(std::uint64_t seed) {
    std::vector<ExperimentConfig> out;
    auto base = [&](const std::string& kind) {
        ExperimentConfig c;
        c.experiment = kind;
        c.seed = seed;
        c.steps = 10;
        c.paths = 2048;
        return c;
    };
    out.push_back(base("brownian-check"));
    {
        auto c = base("rate-fit");
        c.sizes = {64, 128, 256};
        c.errors = {0.2, 0.14, 0.1};
        out.push_back(c);
    }
    {
        auto c = base("forward");
        c.forward_drift = "mean-reverting";
        c.paths = 256;
        out.push_back(c);
    }
    {
        auto c = base("solve");
        c.driver = {"pure-quadratic", {{"gamma", 1.0}}};
        c.terminal = {"tanh", {}};
        out.push_back(c);
    }
    out.push_back(base("bounds"));
    {
        auto c = base("picard");
        c.driver = {"affine-mean", {{"a", 0.5}, {"gamma", 1.0}}};
        c.terminal = {"tanh", {}};
        out.push_back(c);
    }
    {
        auto c = base("compare");
        c.cases = 2;
        out.push_back(c);
    }
    {
        auto c = base("particles");
        c.driver = {"affine-mean", {{"a", 0.5}, {"b", -0.5}}};
        c.terminal = {"tanh", {}};
        c.n_list = {16, 32};
        out.push_back(c);
    }
    {
        auto c = base("pde");
        c.space = {-6.0, 6.0, 61};
        c.pde_steps = 100;
        c.paths = 64;
        out.push_back(c);
    }
    {
        auto c = base("fk-check");
        c.space = {-6.0, 6.0, 61};
        c.pde_steps = 100;
        out.push_back(c);
    }
    return out;
}

inline std::string run_captured(const ExperimentConfig& c) {
    const ExperimentResult r = run_experiment(c);
    std::string s = r.csv;
    for (const auto& l : r.summary) s += l + '\n';
    s += r.passed ? "pass\n" : "fail\n";
    return s;
}

inline CriterionResult determinism(std::uint64_t seed, double) {
    std::size_t diffs = 0;
    std::string first_bad;
    const int wide = static_cast<int>(std::max(4u, std::thread::hardware_concurrency()));
    for (const auto& c : determinism_configs(seed)) {
        std::string a, b, wa;
        {
            ScopedThreads t(1);
            a = run_captured(c);
            b = run_captured(c);
        }
        {
            ScopedThreads t(wide);
            wa = run_captured(c);
        }
        if (a != b || a != wa) {
            ++diffs;
            if (first_bad.empty()) first_bad = c.experiment;
        }
    }
    return {10, "experiments are byte-identical across runs and thread counts", diffs == 0,
            kv("differing_experiments", double(diffs)) + (first_bad.empty() ? "" : " first=" + first_bad)};
}

} // namespace acceptance

using CriterionFn = std::function<CriterionResult(std::uint64_t, double)>;

inline const std::vector<CriterionFn>& acceptance_criteria() {
    static const std::vector<CriterionFn> c = {
        acceptance::cole_hopf,       acceptance::linear_mean,     acceptance::additive_split,
        acceptance::a_priori_bounds, acceptance::comparison,      acceptance::particle_rate,
        acceptance::exchangeability, acceptance::feynman_kac,     acceptance::assignment_exact,
        acceptance::determinism,
    };
    return c;
}

// Runs every criterion; failures and exceptions are reported, not thrown.
inline std::vector<CriterionResult> acceptance_suite(std::uint64_t seed,
                                                     const std::function<void(const CriterionResult&)>& on_result = {}) {
    const double s = tolerance_scale();
    std::vector<CriterionResult> out;
    int id = 0;
    for (const auto& fn : acceptance_criteria()) {
        ++id;
        CriterionResult r;
        try {
            r = fn(seed, s);
        } catch (const std::exception& e) {
            r = {id, "criterion raised an error", false, e.what()};
        }
        r.id = id;
        if (on_result) on_result(r);
        out.push_back(r);
    }
    return out;
}

inline std::string format_criterion(const CriterionResult& r) {
    return "criterion " + std::to_string(r.id) + ": " + (r.passed ? "PASS" : "FAIL") + "  " + r.name + "  [" +
           r.detail + "]";
}

} // namespace mfbsde
