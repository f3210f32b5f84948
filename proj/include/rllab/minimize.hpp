#ifndef RLLAB_MINIMIZE_HPP
#define RLLAB_MINIMIZE_HPP

// Deterministic global grid search with local pattern-search refinement.
// Objectives return +inf for infeasible points; NaN is an error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "rllab/error.hpp"
#include "rllab/geometry.hpp"
#include "rllab/parallel.hpp"

namespace rllab {

using Objective = std::function<double(const Vec&)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Uniform grid over a box, endpoints included, same count per axis.
class Grid {
public:
    Grid(Box box, std::size_t per_axis, std::size_t max_points = 4'000'000) : box_(std::move(box)) {
        box_.validate();
        per_axis = std::max<std::size_t>(per_axis, 2);
        const std::size_t n = box_.dim();
        // shrink the per-axis count until the tensor grid fits the budget
        while (per_axis > 2) {
            double total = std::pow(static_cast<double>(per_axis), static_cast<double>(n));
            if (total <= static_cast<double>(max_points)) break;
            --per_axis;
        }
        m_ = per_axis;
        size_ = 1;
        for (std::size_t i = 0; i < n; ++i) size_ *= m_;
    }

    std::size_t size() const { return size_; }
    std::size_t per_axis() const { return m_; }
    const Box& box() const { return box_; }

    double spacing(std::size_t axis) const { return (box_.hi[axis] - box_.lo[axis]) / static_cast<double>(m_ - 1); }

    double cell_diagonal() const {
        double s = 0.0;
        for (std::size_t a = 0; a < box_.dim(); ++a) s += spacing(a) * spacing(a);
        return std::sqrt(s);
    }

    double coord(std::size_t axis, std::size_t k) const {
        if (k + 1 == m_) return box_.hi[axis];
        return box_.lo[axis] + spacing(axis) * static_cast<double>(k);
    }

    /// Point for a flat index; axis 0 varies slowest so flat order is lexicographic.
    Vec point(std::size_t flat) const {
        const std::size_t n = box_.dim();
        Vec x(n);
        for (std::size_t a = n; a-- > 0;) {
            x[a] = coord(a, flat % m_);
            flat /= m_;
        }
        return x;
    }

    std::vector<std::size_t> neighbours(std::size_t flat) const {
        std::vector<std::size_t> out;
        std::size_t stride = 1;
        for (std::size_t a = box_.dim(); a-- > 0;) {
            const std::size_t k = (flat / stride) % m_;
            if (k > 0) out.push_back(flat - stride);
            if (k + 1 < m_) out.push_back(flat + stride);
            stride *= m_;
        }
        return out;
    }

private:
    Box box_;
    std::size_t m_ = 2;
    std::size_t size_ = 1;
};

struct MinimizeOptions {
    std::size_t grid_n = 2001;
    int refine_iters = 80;           // step halvings per start
    std::size_t max_starts = 8;      // grid local minima refined
    std::vector<Vec> extra_starts;   // refined in addition (clamped into the box)
};

struct MinResult {
    Vec x;
    double value = kInf;
    double final_step = 0.0;  // pattern step at termination for the winning start
    double grid_value = kInf; // best value seen on the plain grid
    std::size_t evaluations = 0;
};

namespace detail {

inline double checked(const Objective& f, const Vec& x) {
    const double v = f(x);
    if (std::isnan(v)) throw EvalError("objective returned NaN");
    return v;
}

inline bool better(double va, const Vec& a, double vb, const Vec& b) {
    if (va != vb) return va < vb;
    return lex_less(a, b);
}

inline std::vector<Vec> pattern_moves(std::size_t n) {
    std::vector<Vec> moves;
    if (n <= 3) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= 3;
        for (std::size_t code = 0; code < total; ++code) {
            Vec d(n);
            std::size_t c = code;
            bool zero = true;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = static_cast<double>(static_cast<int>(c % 3) - 1);
                if (d[i] != 0.0) zero = false;
                c /= 3;
            }
            if (!zero) moves.push_back(d);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            Vec d(n, 0.0);
            d[i] = -1.0;
            moves.push_back(d);
            d[i] = 1.0;
            moves.push_back(d);
        }
    }
    return moves;
}

struct Refined {
    Vec x;
    double value;
    double step;
    std::size_t evals;
};

inline Refined refine(const Objective& f, const Box& box, Vec x, double fx, std::vector<double> step,
                      int halvings) {
    const std::size_t n = x.size();
    const auto moves = pattern_moves(n);
    std::size_t evals = 0;
    double scale = 1.0;
    for (std::size_t a = 0; a < n; ++a) scale = std::max({scale, std::abs(box.lo[a]), std::abs(box.hi[a])});
    const double floor_step = 1e-15 * scale;
    int h = 0;
    int stall_guard = 0;
    while (h < halvings) {
        Vec best = x;
        double best_v = fx;
        for (const Vec& d : moves) {
            Vec y = x;
            for (std::size_t a = 0; a < n; ++a) y[a] = std::clamp(x[a] + d[a] * step[a], box.lo[a], box.hi[a]);
            if (y == x) continue;
            const double v = checked(f, y);
            ++evals;
            if (better(v, y, best_v, best) && v < fx) {
                best = std::move(y);
                best_v = v;
            }
        }
        if (best_v < fx && ++stall_guard < 100000) {
            x = std::move(best);
            fx = best_v;
            continue;
        }
        for (double& s : step) s *= 0.5;
        ++h;
        if (*std::max_element(step.begin(), step.end()) < floor_step) break;
    }
    return {std::move(x), fx, *std::max_element(step.begin(), step.end()), evals};
}

} // namespace detail

/// Global minimisation of obj over box: full grid scan, then pattern-search
/// refinement from the best grid local minima and any extra starts.
/// Ties are broken towards the lexicographically smallest point.
inline MinResult minimize_objective(const Objective& obj, const Box& box, const MinimizeOptions& opt = {}) {
    const Grid grid(box, opt.grid_n);
    const std::size_t N = grid.size();
    std::vector<double> vals(N);
    parallel_for(N, [&](std::size_t i) { vals[i] = detail::checked(obj, grid.point(i)); });

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const bool grid_finite = std::isfinite(vals[order.front()]);
    if (!grid_finite && opt.extra_starts.empty()) throw SearchError("objective is +inf on the whole grid");

    std::vector<std::size_t> starts;
    for (std::size_t idx : order) {
        if (!grid_finite) break;
        if (starts.size() >= opt.max_starts || !std::isfinite(vals[idx])) break;
        bool local = true;
        for (std::size_t nb : grid.neighbours(idx)) {
            if (vals[nb] < vals[idx]) {
                local = false;
                break;
            }
        }
        if (local || starts.empty()) starts.push_back(idx);
    }

    std::vector<double> step(box.dim());
    for (std::size_t a = 0; a < box.dim(); ++a) step[a] = std::max(grid.spacing(a), 1e-300);

    MinResult best;
    best.evaluations = N;
    best.grid_value = vals[order.front()];
    auto consider = [&](detail::Refined r) {
        best.evaluations += r.evals;
        if (!best.x.size() || detail::better(r.value, r.x, best.value, best.x)) {
            best.x = std::move(r.x);
            best.value = r.value;
            best.final_step = r.step;
        }
    };
    for (std::size_t idx : starts) {
        consider(detail::refine(obj, box, grid.point(idx), vals[idx], step, opt.refine_iters));
    }
    for (Vec s : opt.extra_starts) {
        require_dim(s.size(), box.dim(), "minimize extra start");
        for (std::size_t a = 0; a < s.size(); ++a) s[a] = std::clamp(s[a], box.lo[a], box.hi[a]);
        const double v = detail::checked(obj, s);
        ++best.evaluations;
        if (!std::isfinite(v)) continue;
        consider(detail::refine(obj, box, std::move(s), v, step, opt.refine_iters));
    }
    if (!best.x.size()) throw SearchError("objective is +inf on the whole grid and at every extra start");
    return best;
}

} // namespace rllab

#endif
