#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "errors.hpp"

namespace mfbsde {

// Uniformly weighted atoms in R^dim, stored [atom][component].
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    EmpiricalMeasure(std::size_t dim, std::vector<double> atoms) : dim_(dim), atoms_(std::move(atoms)) {
        require(dim_ >= 1, "measure dimension must be positive");
        require(!atoms_.empty() && atoms_.size() % dim_ == 0, "measure needs a whole number of atoms");
        for (double v : atoms_) require(std::isfinite(v), "measure atoms must be finite");
    }
    static EmpiricalMeasure scalar(std::vector<double> values) { return EmpiricalMeasure(1, std::move(values)); }
    static EmpiricalMeasure dirac(std::size_t dim, double value = 0.0) {
        return EmpiricalMeasure(dim, std::vector<double>(dim, value));
    }

    std::size_t size() const { return dim_ == 0 ? 0 : atoms_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return atoms_.empty(); }
    std::span<const double> atom(std::size_t i) const { return {atoms_.data() + i * dim_, dim_}; }
    const std::vector<double>& atoms() const { return atoms_; }

    std::vector<double> mean() const {
        std::vector<double> m(dim_, 0.0);
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < dim_; ++j) m[j] += atoms_[i * dim_ + j];
        for (double& v : m) v /= static_cast<double>(size());
        return m;
    }
    // Mean squared norm, i.e. W2(this, delta_0)^2.
    double second_moment() const {
        double s = 0.0;
        for (double v : atoms_) s += v * v;
        return s / static_cast<double>(size());
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> atoms_;
};

inline double w2_to_dirac0(const EmpiricalMeasure& m) {
    require(!m.empty(), "measure is empty");
    return std::sqrt(m.second_moment());
}

namespace detail {
inline std::vector<double> sorted_scalars(const EmpiricalMeasure& m) {
    std::vector<double> v = m.atoms();
    std::sort(v.begin(), v.end());
    return v;
}

// L2 distance between the quantile functions of two sorted samples.
inline double quantile_gap_sq(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == m) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s / static_cast<double>(n);
    }
    // Breakpoints i/n and j/m compared in integer units of 1/(n m).
    std::size_t i = 0, j = 0;
    unsigned long long prev = 0;
    double s = 0.0;
    while (i < n && j < m) {
        const unsigned long long ea = static_cast<unsigned long long>(i + 1) * m;
        const unsigned long long eb = static_cast<unsigned long long>(j + 1) * n;
        const unsigned long long next = std::min(ea, eb);
        const double d = a[i] - b[j];
        s += static_cast<double>(next - prev) * d * d;
        prev = next;
        if (ea == next) ++i;
        if (eb == next) ++j;
    }
    return s / (static_cast<double>(n) * static_cast<double>(m));
}
} // namespace detail

inline double w2_quantile_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    require(!a.empty() && !b.empty(), "measure is empty");
    require(a.dim() == 1 && b.dim() == 1, "quantile coupling needs scalar measures");
    return std::sqrt(detail::quantile_gap_sq(detail::sorted_scalars(a), detail::sorted_scalars(b)));
}

inline constexpr std::size_t kAssignmentCap = 512;

// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
// Returns the column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> match(n);
    for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
    return match;
}

inline double w2_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                            std::size_t cap = kAssignmentCap) {
    require(!a.empty() && !b.empty(), "measure is empty");
    require(a.dim() == b.dim(), "measures live in different dimensions");
    require(a.size() == b.size(), "exact coupling needs equal atom counts");
    const std::size_t n = a.size(), d = a.dim();
    if (n > cap)
        throw CapacityError("exact coupling limited to " + std::to_string(cap) + " atoms, got " +
                            std::to_string(n));
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double t = a.atom(i)[k] - b.atom(j)[k];
                c += t * t;
            }
            cost[i * n + j] = c;
        }
    const auto match = solve_assignment(cost, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
    return std::sqrt(std::max(0.0, total) / static_cast<double>(n));
}

// Picks the exact method available for the pair: quantile coupling for
// scalars, otherwise the assignment solver.
inline double w2_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                          std::size_t cap = kAssignmentCap) {
    if (a.dim() == 1 && b.dim() == 1) return w2_quantile_1d(a, b);
    return w2_assignment(a, b, cap);
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_norm = 0.0;
};

// Least squares line through (log size, log error).
inline RateFit fit_rate(std::span<const double> sizes, std::span<const double> errors) {
    require(sizes.size() == errors.size(), "sizes and errors differ in length");
    require(sizes.size() >= 2, "rate fit needs at least two points");
    const std::size_t n = sizes.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(sizes[i]) && sizes[i] > 0.0, "sizes must be positive");
        require(std::isfinite(errors[i]) && errors[i] > 0.0, "errors must be positive");
        lx[i] = std::log(sizes[i]);
        ly[i] = std::log(errors[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    require(sxx > 0.0, "rate fit needs at least two distinct sizes");
    RateFit r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ly[i] - (r.intercept + r.slope * lx[i]);
        rss += e * e;
    }
    r.residual_norm = std::sqrt(rss);
    return r;
}

} // namespace mfbsde
