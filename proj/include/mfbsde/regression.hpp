#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"

namespace mfbsde {

enum class BasisKind { polynomial, piecewise_linear };

struct RegressionConfig {
    BasisKind basis = BasisKind::polynomial;
    int degree = 3;               // total degree of the polynomial basis
    int cells = 32;               // hat-function cells, equal-probability knots
    double ridge = 1e-8;          // scaled by the sample count; intercept is not penalised
    std::optional<double> z_max;  // unset: max(10, gamma * M1) from the driver profile
};

inline void validate(const RegressionConfig& c) {
    require(c.degree >= 0 && c.degree <= 12, "basis degree must lie in [0, 12]");
    require(c.cells >= 1 && c.cells <= 4096, "cell count must lie in [1, 4096]");
    require(std::isfinite(c.ridge) && c.ridge >= 0.0, "ridge must be non-negative");
    if (c.z_max) require(std::isfinite(*c.z_max) && *c.z_max > 0.0, "z clip must be positive");
}

namespace detail {
inline void monomials(std::size_t vars, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> e(vars, 0);
    // Enumerate exponent vectors with total degree 1..degree, graded order.
    for (int total = 1; total <= degree; ++total) {
        std::function<void(std::size_t, int)> rec = [&](std::size_t v, int left) {
            if (v + 1 == vars) {
                e[v] = left;
                out.push_back(e);
                return;
            }
            for (int a = left; a >= 0; --a) {
                e[v] = a;
                rec(v + 1, left - a);
            }
        };
        rec(0, total);
    }
}
} // namespace detail

// Least-squares projection onto functions of per-sample features, assembled
// once per time step and reused for several right-hand sides. Sums run over
// samples in `order`, so results do not depend on how samples are labelled
// when the order is canonical.
// Small samples get a coarser basis: at most one function per this many rows.
inline constexpr std::size_t kRowsPerBasisFunction = 8;

inline std::size_t max_basis(std::size_t n) { return std::max<std::size_t>(2, n / kRowsPerBasisFunction); }

class CrossSectionRegression {
public:
    CrossSectionRegression(std::span<const double> features, std::size_t n, std::size_t f,
                           const RegressionConfig& cfg, std::size_t step, std::span<const std::size_t> order = {})
        : n_(n) {
        require(n >= 1 && features.size() == n * f, "feature matrix has the wrong shape");
        order_.resize(n);
        if (order.empty()) {
            for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        } else {
            require(order.size() == n, "accumulation order has the wrong length");
            order_.assign(order.begin(), order.end());
        }
        // Standardise, dropping columns that are constant across the sample.
        std::vector<std::size_t> active;
        std::vector<double> mu, sd;
        for (std::size_t c = 0; c < f; ++c) {
            double m = 0.0;
            for (std::size_t r : order_) m += features[r * f + c];
            m /= static_cast<double>(n);
            double v = 0.0;
            for (std::size_t r : order_) {
                const double t = features[r * f + c] - m;
                v += t * t;
            }
            const double s = std::sqrt(v / static_cast<double>(n));
            if (s > 1e-12 * (1.0 + std::abs(m))) {
                active.push_back(c);
                mu.push_back(m);
                sd.push_back(s);
            }
        }
        const std::size_t q = active.size();
        auto u = [&](std::size_t r, std::size_t a) { return (features[r * f + active[a]] - mu[a]) / sd[a]; };

        if (q == 0 || (cfg.basis == BasisKind::polynomial && cfg.degree == 0)) {
            p_ = 1;
            A_.assign(n, 1.0);
        } else if (cfg.basis == BasisKind::polynomial) {
            std::vector<std::vector<int>> expo;
            int deg = cfg.degree;
            for (;;) {
                expo.clear();
                detail::monomials(q, deg, expo);
                if (deg <= 1 || expo.size() + 1 <= max_basis(n)) break;
                --deg;
            }
            p_ = expo.size() + 1;
            A_.assign(n * p_, 0.0);
            parallel_for(n, [&](std::size_t r) {
                double* row = A_.data() + r * p_;
                row[0] = 1.0;
                for (std::size_t b = 0; b < expo.size(); ++b) {
                    double v = 1.0;
                    for (std::size_t a = 0; a < q; ++a)
                        for (int e = 0; e < expo[b][a]; ++e) v *= u(r, a);
                    row[b + 1] = v;
                }
            });
        } else {
            require(q == 1, "hat basis supports a single varying feature");
            std::vector<double> sorted(n);
            for (std::size_t r = 0; r < n; ++r) sorted[r] = u(r, 0);
            std::sort(sorted.begin(), sorted.end());
            std::vector<double> knots;
            const std::size_t cells = std::min(static_cast<std::size_t>(cfg.cells), std::max<std::size_t>(1, max_basis(n) - 1));
            for (std::size_t j = 0; j <= cells; ++j) {
                const double kv = sorted[(j * (n - 1)) / cells];
                if (knots.empty() || kv > knots.back()) knots.push_back(kv);
            }
            if (knots.size() < 2) {
                p_ = 1;
                A_.assign(n, 1.0);
            } else {
                // Intercept plus hats on knots 1..m; together they span the
                // piecewise-linear functions on [knot_0, knot_m].
                const std::size_t m = knots.size() - 1;
                p_ = m + 1;
                A_.assign(n * p_, 0.0);
                parallel_for(n, [&](std::size_t r) {
                    double* row = A_.data() + r * p_;
                    row[0] = 1.0;
                    const double x = std::clamp(u(r, 0), knots.front(), knots.back());
                    std::size_t c = static_cast<std::size_t>(
                        std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
                    c = std::clamp<std::size_t>(c, 1, m);  // x in [knot_{c-1}, knot_c]
                    const double w = (x - knots[c - 1]) / (knots[c] - knots[c - 1]);
                    row[c] = w;
                    if (c >= 2) row[c - 1] = 1.0 - w;
                });
            }
        }

        // Normal equations, blocked in `order_`.
        using Mat = Eigen::MatrixXd;
        Mat M = block_reduce<Mat>(
            n, Mat::Zero(p_, p_),
            [&](std::size_t lo, std::size_t hi) {
                Mat part = Mat::Zero(p_, p_);
                for (std::size_t i = lo; i < hi; ++i) {
                    const double* row = A_.data() + order_[i] * p_;
                    for (std::size_t a = 0; a < p_; ++a) {
                        const double ra = row[a];
                        if (ra == 0.0) continue;
                        for (std::size_t b = a; b < p_; ++b) part(a, b) += ra * row[b];
                    }
                }
                return part;
            },
            [](Mat acc, const Mat& part) {
                acc += part;
                return acc;
            });
        for (std::size_t a = 0; a < p_; ++a)
            for (std::size_t b = 0; b < a; ++b) M(a, b) = M(b, a);
        for (std::size_t a = 1; a < p_; ++a) M(a, a) += cfg.ridge * static_cast<double>(n);
        M /= static_cast<double>(n);

        Eigen::SelfAdjointEigenSolver<Mat> eig(M, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
        condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        if (!(lo > 0.0) || !std::isfinite(condition_) || condition_ > 1e13) throw SingularSystemError(step, condition_);
        llt_.compute(M);
        if (llt_.info() != Eigen::Success) throw SingularSystemError(step, condition_);
    }

    std::size_t basis_size() const { return p_; }
    double condition() const { return condition_; }

    std::vector<double> coefficients(std::span<const double> target) const {
        require(target.size() == n_, "regression target has the wrong length");
        const std::size_t p = p_;
        std::vector<double> rhs = block_reduce<std::vector<double>>(
            n_, std::vector<double>(p, 0.0),
            [&](std::size_t lo, std::size_t hi) {
                std::vector<double> part(p, 0.0);
                for (std::size_t i = lo; i < hi; ++i) {
                    const std::size_t r = order_[i];
                    const double* row = A_.data() + r * p;
                    for (std::size_t a = 0; a < p; ++a) part[a] += row[a] * target[r];
                }
                return part;
            },
            [](std::vector<double> acc, const std::vector<double>& part) {
                for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += part[a];
                return acc;
            });
        Eigen::VectorXd b(p);
        for (std::size_t a = 0; a < p; ++a) b(a) = rhs[a] / static_cast<double>(n_);
        Eigen::VectorXd beta = llt_.solve(b);
        return std::vector<double>(beta.data(), beta.data() + p);
    }

    // Fitted values at the samples.
    std::vector<double> fit(std::span<const double> target) const {
        const auto beta = coefficients(target);
        std::vector<double> out(n_);
        parallel_for(n_, [&](std::size_t r) {
            const double* row = A_.data() + r * p_;
            double v = 0.0;
            for (std::size_t a = 0; a < p_; ++a) v += row[a] * beta[a];
            out[r] = v;
        });
        return out;
    }

private:
    std::size_t n_;
    std::size_t p_ = 1;
    std::vector<std::size_t> order_;
    std::vector<double> A_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double condition_ = 1.0;
};

} // namespace mfbsde
