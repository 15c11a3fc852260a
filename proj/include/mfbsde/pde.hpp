#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bsde.hpp"
#include "errors.hpp"
#include "forward.hpp"
#include "parallel.hpp"
#include "paths.hpp"
#include "picard.hpp"
#include "regression.hpp"

namespace mfbsde {

struct SpaceGrid {
    double x_min = -8.0;
    double x_max = 8.0;
    std::size_t n_x = 401;

    double dx() const { return (x_max - x_min) / static_cast<double>(n_x - 1); }
    double x(std::size_t i) const { return i + 1 == n_x ? x_max : x_min + static_cast<double>(i) * dx(); }
};

inline void validate(const SpaceGrid& s) {
    require(std::isfinite(s.x_min) && std::isfinite(s.x_max) && s.x_min < s.x_max, "space grid needs x_min < x_max");
    require(s.n_x >= 3, "space grid needs at least three nodes");
}

// Scalar nonlocal problem. Primed arguments range over the reference cloud
// started at x0; unprimed ones are the local point.
struct NonlocalProblem {
    std::function<double(double t, double xr, double x)> drift;
    std::function<double(double t, double xr, double x)> diffusion;
    std::function<double(double t, double xr, double x, double yr, double y, double z)> driver;
    std::function<double(double xr, double x)> terminal;
    double x0 = 0.0;
    bool coefficients_reference_free = false;
    bool driver_reference_free = false;
    bool terminal_reference_free = false;
    GrowthProfile profile;
};

inline void validate(const NonlocalProblem& p) {
    require(p.drift && p.diffusion && p.driver && p.terminal, "nonlocal problem is incomplete");
    require(std::isfinite(p.x0), "start point must be finite");
}

struct PdeField {
    SpaceGrid space;
    TimeGrid time;
    std::vector<double> u;  // [time node][space node]

    double at(std::size_t k, std::size_t i) const { return u[k * space.n_x + i]; }
    // Linear interpolation, clamped to the grid edges.
    double interpolate(std::size_t k, double x, bool* clamped = nullptr) const {
        const double* row = u.data() + k * space.n_x;
        if (x <= space.x_min || x >= space.x_max) {
            if (clamped && (x < space.x_min || x > space.x_max)) *clamped = true;
            return x <= space.x_min ? row[0] : row[space.n_x - 1];
        }
        const double pos = (x - space.x_min) / space.dx();
        std::size_t i = static_cast<std::size_t>(pos);
        if (i >= space.n_x - 1) i = space.n_x - 2;
        const double w = pos - static_cast<double>(i);
        return (1.0 - w) * row[i] + w * row[i + 1];
    }
};

inline ForwardSpec forward_spec_of(const NonlocalProblem& p) {
    ForwardSpec f;
    f.state_dim = 1;
    f.noise_dim = 1;
    auto b = p.drift;
    auto s = p.diffusion;
    f.drift = [b](double t, std::span<const double> xr, std::span<const double> x, std::span<double> out) {
        out[0] = b(t, xr[0], x[0]);
    };
    f.diffusion = [s](double t, std::span<const double> xr, std::span<const double> x, std::span<double> out) {
        out[0] = s(t, xr[0], x[0]);
    };
    f.reference_free = p.coefficients_reference_free;
    return f;
}

// Backward explicit scheme on `tgrid`, which must refine the reference grid
// by a whole factor. Spatial derivatives are central; beyond the edges the
// field is extended by its edge value. The local u-slot of the driver gets
// one predictor-corrector pass.
inline PdeField solve_pde(const NonlocalProblem& prob, const PathBatch& reference, const SpaceGrid& space,
                          const TimeGrid& tgrid) {
    validate(prob);
    validate(space);
    require(reference.dim == 1, "reference cloud must be scalar");
    const TimeGrid& rg = reference.grid;
    require(std::abs(rg.t_start - tgrid.t_start) <= 1e-12 && std::abs(rg.t_end - tgrid.t_end) <= 1e-12,
            "PDE and reference grids cover different horizons");
    require(tgrid.n_steps % rg.n_steps == 0, "PDE time grid must refine the reference grid by a whole factor");
    const std::size_t refine = tgrid.n_steps / rg.n_steps;
    const std::size_t nx = space.n_x, m = reference.n_paths, K = tgrid.n_steps;
    const double dx = space.dx(), dt = tgrid.dt();

    PdeField f;
    f.space = space;
    f.time = tgrid;
    f.u.assign(checked_volume(K + 1, nx, 1), 0.0);

    auto cloud = [&](std::size_t kr) { return reference.slice(kr); };
    {
        const auto xT = cloud(rg.n_steps);
        double* row = f.u.data() + K * nx;
        parallel_for(nx, [&](std::size_t i) {
            const double x = space.x(i);
            if (prob.terminal_reference_free) {
                row[i] = prob.terminal(x, x);
                return;
            }
            double s = 0.0;
            for (double xr : xT) s += prob.terminal(xr, x);
            row[i] = s / static_cast<double>(m);
        });
    }

    std::vector<double> bbar(nx), sbar(nx), du(nx), d2u(nx), pred(nx), ur(m);
    for (std::size_t k = K; k-- > 0;) {
        const double t = tgrid.time(k + 1);
        const std::size_t kr = std::min((k + 1) / refine, rg.n_steps);
        const auto xs = cloud(kr);
        const double* un = f.u.data() + (k + 1) * nx;
        double* uc = f.u.data() + k * nx;

        parallel_for(nx, [&](std::size_t i) {
            const double x = space.x(i);
            if (prob.coefficients_reference_free) {
                bbar[i] = prob.drift(t, x, x);
                sbar[i] = prob.diffusion(t, x, x);
            } else {
                double sb = 0.0, ss = 0.0;
                for (double xr : xs) {
                    sb += prob.drift(t, xr, x);
                    ss += prob.diffusion(t, xr, x);
                }
                bbar[i] = sb / static_cast<double>(m);
                sbar[i] = ss / static_cast<double>(m);
            }
            const double left = un[i == 0 ? 0 : i - 1];
            const double right = un[i + 1 == nx ? nx - 1 : i + 1];
            du[i] = (right - left) / (2.0 * dx);
            d2u[i] = (right - 2.0 * un[i] + left) / (dx * dx);
        });
        double smax = 0.0;
        for (double v : sbar) smax = std::max(smax, v * v);
        if (dt > dx * dx / (smax + 1e-12)) {
            const double need = std::ceil(tgrid.horizon() * (smax + 1e-12) / (dx * dx));
            throw InvalidArgument("explicit step violates dt <= dx^2 / max sigma^2; use at least " +
                                  std::to_string(static_cast<long long>(need)) + " time steps");
        }
        if (!prob.driver_reference_free) {
            bool dummy = false;
            for (std::size_t j = 0; j < m; ++j) ur[j] = f.interpolate(k + 1, xs[j], &dummy);
        }
        auto nonlocal = [&](std::size_t i, double y) {
            const double x = space.x(i);
            const double z = du[i] * sbar[i];
            if (prob.driver_reference_free) return prob.driver(t, x, x, y, y, z);
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += prob.driver(t, xs[j], x, ur[j], y, z);
            return s / static_cast<double>(m);
        };
        parallel_for(nx, [&](std::size_t i) {
            const double lin = 0.5 * sbar[i] * sbar[i] * d2u[i] + bbar[i] * du[i];
            pred[i] = un[i] + dt * (lin + nonlocal(i, un[i]));
        });
        parallel_for(nx, [&](std::size_t i) {
            const double lin = 0.5 * sbar[i] * sbar[i] * d2u[i] + bbar[i] * du[i];
            uc[i] = un[i] + dt * (lin + nonlocal(i, pred[i]));
        });
        for (std::size_t i = 0; i < nx; ++i)
            if (!std::isfinite(uc[i])) throw DivergenceError("non-finite PDE value", k);
    }
    return f;
}

struct RestrictionReport {
    double max_gap = 0.0;
    double mean_gap = 0.0;
    std::size_t clamped = 0;
};

// Compares u(t_k, X^p_k) with Y^p_k along every reference path and node.
inline RestrictionReport restriction_check(const PdeField& field, const PathBatch& reference, const BsdeSolution& bsde) {
    require(reference.n_paths == bsde.n_paths && reference.grid == bsde.grid, "reference and BSDE do not match");
    require(field.time.n_steps % reference.grid.n_steps == 0, "field grid must refine the reference grid");
    const std::size_t refine = field.time.n_steps / reference.grid.n_steps;
    RestrictionReport r;
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t p = 0; p < reference.n_paths; ++p)
        for (std::size_t k = 0; k <= reference.grid.n_steps; ++k) {
            bool cl = false;
            const double u = field.interpolate(k * refine, reference.at(p, k), &cl);
            if (cl) ++r.clamped;
            const double g = std::abs(u - bsde.Y(p, k));
            r.max_gap = std::max(r.max_gap, g);
            acc += g;
            ++cnt;
        }
    r.mean_gap = acc / static_cast<double>(cnt);
    return r;
}

struct FeynmanKacConfig {
    SpaceGrid space;
    double horizon = 1.0;
    std::size_t pde_steps = 1000;
    std::size_t bsde_steps = 50;
    std::size_t n_paths = 1 << 14;
    SeedSpec seed{};
    RegressionConfig regression{};
    PicardConfig picard{};
    double tolerance = 5e-2;
};

struct FeynmanKacReport {
    double u0 = 0.0;  // PDE value at (0, x0)
    double y0 = 0.0;  // BSDE value at time zero
    double gap = 0.0;
    double y0_stderr = 0.0;
    RestrictionReport restriction;
    bool picard_converged = false;
    bool passed = false;
};

// Builds the BSDE for the reference start point: driver and terminal are
// averaged over the cloud, with the cloud's own Y in the primed slot.
inline DriverSpec cloud_driver(const NonlocalProblem& prob, const PathBatch& X) {
    DriverSpec d;
    d.name = "nonlocal";
    d.profile = prob.profile;
    d.uses_y = true;
    d.uses_y_law = !prob.driver_reference_free;
    auto g = prob.driver;
    if (prob.driver_reference_free) {
        d.g = [g](const DriverPoint& pt) {
            const double x = pt.x[0];
            return g(pt.t, x, x, pt.y, pt.y, pt.z[0]);
        };
    } else {
        const PathBatch* ref = &X;
        d.g = [g, ref](const DriverPoint& pt) {
            const double x = pt.x[0];
            const auto& atoms = pt.y_law->measure->atoms();
            double s = 0.0;
            for (std::size_t j = 0; j < ref->n_paths; ++j) s += g(pt.t, ref->at(j, pt.step), x, atoms[j], pt.y, pt.z[0]);
            return s / static_cast<double>(ref->n_paths);
        };
    }
    return d;
}

inline std::vector<double> cloud_terminal(const NonlocalProblem& prob, const PathBatch& X) {
    const std::size_t n = X.n_paths, K = X.grid.n_steps;
    std::vector<double> eta(n);
    parallel_for(n, [&](std::size_t p) {
        const double x = X.at(p, K);
        if (prob.terminal_reference_free) {
            eta[p] = prob.terminal(x, x);
            return;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += prob.terminal(X.at(j, K), x);
        eta[p] = s / static_cast<double>(n);
    });
    return eta;
}

inline FeynmanKacReport feynman_kac_check(const NonlocalProblem& prob, const FeynmanKacConfig& cfg) {
    validate(prob);
    require(cfg.pde_steps % cfg.bsde_steps == 0, "PDE steps must be a multiple of BSDE steps");
    const TimeGrid grid = make_grid(0.0, cfg.horizon, cfg.bsde_steps);
    const NoiseBatch noise = sample_brownian(grid, cfg.n_paths, 1, cfg.seed);
    const double x0[1] = {prob.x0};
    const PathBatch X = integrate_reference(forward_spec_of(prob), x0, grid, noise);
    const PdeField field = solve_pde(prob, X, cfg.space, make_grid(0.0, cfg.horizon, cfg.pde_steps));
    const DriverSpec d = cloud_driver(prob, X);
    const auto eta = cloud_terminal(prob, X);
    const PicardResult pr = picard_meanfield(d, eta, X, noise, cfg.regression, cfg.picard);
    FeynmanKacReport r;
    r.u0 = field.interpolate(0, prob.x0);
    r.y0 = pr.solution.y0();
    r.y0_stderr = pr.solution.y0_stderr();
    r.gap = std::abs(r.u0 - r.y0);
    r.restriction = restriction_check(field, X, pr.solution);
    r.picard_converged = pr.converged;
    r.passed = r.gap <= cfg.tolerance;
    return r;
}

} // namespace mfbsde
