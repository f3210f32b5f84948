#ifndef RLLAB_POLAR_HPP
#define RLLAB_POLAR_HPP

// Monotone polar A^µ = {(x, x*) : <s - x, s* - x*> >= 0 for all (s, s*) ∈ A}
// of a sampled graph, with monotonicity and maximality audits.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "rllab/error.hpp"
#include "rllab/geometry.hpp"
#include "rllab/operators.hpp"
#include "rllab/parallel.hpp"

namespace rllab {

// Polar tolerance for multi-dimensional pairings; 1-D tests compare signs
// of the two differences, which is exact in floating point.
inline constexpr double kPolarTol = 1e-12;

inline double monotone_pairing(const DualPair& a, const DualPair& b) {
    return pairing(a.x - b.x, a.xstar - b.xstar);
}

/// <a - b, a* - b*> < 0, strictly.
inline bool violates(const DualPair& a, const DualPair& b, double tol = kPolarTol) {
    if (a.x.size() == 1) {
        const double dx = a.x[0] - b.x[0], ds = a.xstar[0] - b.xstar[0];
        return (dx > 0 && ds < 0) || (dx < 0 && ds > 0);
    }
    return monotone_pairing(a, b) < -tol;
}

struct PolarViolator {
    DualPair sample;
    double value = 0.0; // <s - x, s* - x*>
};

struct PolarQuery {
    DualPair point;
    bool in = true;
    std::optional<PolarViolator> violator; // first sample with value < 0
    double worst_value = kInf;             // min over the sample
};

namespace detail {

inline void require_nonempty(const OperatorGraph& A, const char* what) {
    if (!A.is_sampled()) throw Error(std::string(what) + ": needs a sampled graph");
    if (A.pairs().empty()) throw PreconditionError(std::string(what) + ": empty sample");
}

// 1-D sample sorted by x with running extremes of x*: p is in the polar iff
// max{s* : s < x} <= x* <= min{s* : s > x}.
class SortedSample {
public:
    explicit SortedSample(const std::vector<DualPair>& ps) {
        for (const auto& p : ps) pts_.emplace_back(p.x[0], p.xstar[0]);
        std::sort(pts_.begin(), pts_.end());
        const std::size_t n = pts_.size();
        pre_max_.assign(n + 1, -kInf);
        suf_min_.assign(n + 1, kInf);
        for (std::size_t i = 0; i < n; ++i) pre_max_[i + 1] = std::max(pre_max_[i], pts_[i].second);
        for (std::size_t i = n; i-- > 0;) suf_min_[i] = std::min(suf_min_[i + 1], pts_[i].second);
    }
    bool in_polar(double x, double xs) const {
        const auto lo = std::lower_bound(pts_.begin(), pts_.end(), std::make_pair(x, -kInf)) - pts_.begin();
        const auto hi = std::upper_bound(pts_.begin(), pts_.end(), std::make_pair(x, kInf)) - pts_.begin();
        return pre_max_[lo] <= xs && xs <= suf_min_[hi];
    }
    /// Euclidean distance in (x, x*) to the nearest sample; pruned by |s - x|.
    double distance(double x, double xs) const {
        const auto mid = std::lower_bound(pts_.begin(), pts_.end(), std::make_pair(x, -kInf)) - pts_.begin();
        double best = kInf;
        for (auto i = mid; i < static_cast<std::ptrdiff_t>(pts_.size()) && pts_[i].first - x < best; ++i) {
            best = std::min(best, std::hypot(pts_[i].first - x, pts_[i].second - xs));
        }
        for (auto i = mid; i-- > 0 && x - pts_[i].first < best;) {
            best = std::min(best, std::hypot(pts_[i].first - x, pts_[i].second - xs));
        }
        return best;
    }

private:
    std::vector<std::pair<double, double>> pts_;
    std::vector<double> pre_max_, suf_min_;
};

} // namespace detail

inline PolarQuery polar_membership(const OperatorGraph& A, const DualPair& point, double tol = kPolarTol) {
    detail::require_nonempty(A, "polar_membership");
    require_dim(point.x.size(), A.space().dim(), "polar_membership");
    require_dim(point.xstar.size(), A.space().dim(), "polar_membership");
    PolarQuery q{point, true, std::nullopt, kInf};
    for (const auto& s : A.pairs()) {
        const double v = monotone_pairing(s, point);
        q.worst_value = std::min(q.worst_value, v);
        if (!q.violator && violates(s, point, tol)) {
            q.in = false;
            q.violator = PolarViolator{s, v};
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Region mode (ℝ × ℝ)

struct PolarRegion {
    Box box;                 // lo = (x_lo, x*_lo), hi = (x_hi, x*_hi)
    std::size_t grid_n = 0;  // cells per axis
    std::vector<char> in;    // cell (i, k) at i * grid_n + k, i along x

    double cell_width() const { return (box.hi[0] - box.lo[0]) / double(grid_n); }
    double cell_height() const { return (box.hi[1] - box.lo[1]) / double(grid_n); }
    double cell_diagonal() const { return std::hypot(cell_width(), cell_height()); }
    DualPair center(std::size_t i, std::size_t k) const {
        return {Vec{box.lo[0] + (double(i) + 0.5) * cell_width()}, DualVec{box.lo[1] + (double(k) + 0.5) * cell_height()}};
    }
    std::size_t count_in() const { return static_cast<std::size_t>(std::count(in.begin(), in.end(), 1)); }
    std::vector<DualPair> in_points() const {
        std::vector<DualPair> out;
        for (std::size_t i = 0; i < grid_n; ++i) {
            for (std::size_t k = 0; k < grid_n; ++k) {
                if (in[i * grid_n + k]) out.push_back(center(i, k));
            }
        }
        return out;
    }
    /// CSV with columns x,xstar,in at cell centers.
    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "x,xstar,in\n";
        for (std::size_t i = 0; i < grid_n; ++i) {
            for (std::size_t k = 0; k < grid_n; ++k) {
                const DualPair c = center(i, k);
                os << c.x[0] << ',' << c.xstar[0] << ',' << int(in[i * grid_n + k]) << '\n';
            }
        }
        return os.str();
    }
};

inline PolarRegion polar_region(const OperatorGraph& A, const Box& box, std::size_t grid_n) {
    detail::require_nonempty(A, "polar_region");
    if (A.space().dim() != 1) throw DimensionError("polar_region: region mode needs a 1-D space; query points instead");
    if (box.dim() != 2) throw DimensionError("polar_region: box must be (x, x*) with two coordinates");
    box.validate();
    if (grid_n == 0) throw PreconditionError("polar_region: grid_n must be >= 1");
    PolarRegion r{box, grid_n, std::vector<char>(grid_n * grid_n, 0)};
    const detail::SortedSample ss(A.pairs());
    parallel_for(r.in.size(), [&](std::size_t c) {
        const DualPair p = r.center(c / grid_n, c % grid_n);
        r.in[c] = ss.in_polar(p.x[0], p.xstar[0]) ? 1 : 0;
    });
    return r;
}

// ---------------------------------------------------------------------------
// Monotonicity

struct MonotoneReport {
    bool monotone = true;
    std::optional<std::pair<DualPair, DualPair>> violating_pair;
    double value = 0.0;
};

/// Pairwise check in sample order; reports the first pair with <a-b, a*-b*> < 0.
inline MonotoneReport is_monotone(const OperatorGraph& A, double tol = kPolarTol) {
    if (!A.is_sampled()) throw Error("is_monotone: needs a sampled graph");
    const auto& ps = A.pairs();
    for (std::size_t a = 0; a < ps.size(); ++a) {
        for (std::size_t b = a + 1; b < ps.size(); ++b) {
            if (violates(ps[a], ps[b], tol)) return {false, std::make_pair(ps[a], ps[b]), monotone_pairing(ps[a], ps[b])};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Maximality

struct MaximalityOptions {
    std::optional<double> delta;       // default 2 × cell diagonal
    std::size_t sample_per_cell = 4;   // sample points per region cell width
    std::vector<double> extra_x;       // points always sampled (kinks)
    double sample_box_factor = 2.0;    // analytic graphs are sampled over the region x-range scaled by this
};

struct MaximalityViolation {
    DualPair point;
    double distance = 0.0; // product-norm distance to the sample
};

struct MaximalityReport {
    std::size_t sample_size = 0;
    std::size_t polar_cells = 0;
    double delta = 0.0;
    double cell_diagonal = 0.0;
    double max_distance = 0.0;                    // over polar cells
    std::vector<MaximalityViolation> violations;  // polar cells farther than delta from the graph
    bool consistent_with_maximal() const { return violations.empty(); }
};

namespace detail {

// Product-norm distance from each point to the nearest sample (1-D).
inline std::vector<double> distances_to_sample(const NormedSpace& E, const std::vector<DualPair>& ps,
                                               const std::vector<DualPair>& pts) {
    // ‖(a, b)‖² = w a² + b² / w: rescale to Euclidean coordinates first
    const double w = E.weight(0);
    std::vector<DualPair> scaled;
    for (const auto& p : ps) scaled.push_back({Vec{std::sqrt(w) * p.x[0]}, DualVec{p.xstar[0] / std::sqrt(w)}});
    const SortedSample ss(scaled);
    std::vector<double> out(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        out[i] = ss.distance(std::sqrt(w) * pts[i].x[0], pts[i].xstar[0] / std::sqrt(w));
    }, 64);
    return out;
}

} // namespace detail

/// Dense sample of a 1-D graph fine enough for the region: x spacing a
/// fraction of the cell width, interval images filled at a fraction of the
/// cell height. Sampled graphs are returned unchanged.
inline OperatorGraph audit_sample(const OperatorGraph& A, const Box& region, std::size_t grid_n,
                                  const MaximalityOptions& opt = {}) {
    if (A.is_sampled()) return A;
    if (A.space().dim() != 1) throw DimensionError("audit_sample: 1-D graphs only");
    const double w = (region.hi[0] - region.lo[0]) / double(grid_n);
    const double h = (region.hi[1] - region.lo[1]) / double(grid_n);
    const Box want = Box{{region.lo[0]}, {region.hi[0]}}.scaled(opt.sample_box_factor);
    const Box dom = A.domain();
    const double lo = std::max(want.lo[0], dom.lo[0]), hi = std::min(want.hi[0], dom.hi[0]);
    if (lo > hi) throw PreconditionError("audit_sample: graph domain misses the region");
    const double step = w / double(std::max<std::size_t>(1, opt.sample_per_cell));
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step));
    std::vector<double> xs;
    for (std::size_t i = 0; i <= n; ++i) xs.push_back(i == n ? hi : lo + double(i) * step);
    for (double c : opt.extra_x) {
        if (c >= lo && c <= hi) xs.push_back(c);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<DualPair> pairs;
    for (double x : xs) {
        const auto img = A.image(Vec{x}, 0);
        if (img.size() >= 2) {
            double a = kInf, b = -kInf;
            for (const auto& z : img) {
                a = std::min(a, z[0]);
                b = std::max(b, z[0]);
            }
            const int k = static_cast<int>(std::ceil((b - a) / (h / double(std::max<std::size_t>(1, opt.sample_per_cell)))));
            for (const auto& z : A.image(Vec{x}, std::max(k, 1))) pairs.push_back({Vec{x}, z});
        } else {
            for (const auto& z : img) pairs.push_back({Vec{x}, z});
        }
    }
    return sampled_graph(A.space(), std::move(pairs), A.name());
}

/// Polar cells of the (sampled) graph farther than delta from it are evidence
/// that A is a proper subset of A^µ. Non-monotone samples are rejected.
inline MaximalityReport maximality_audit(const OperatorGraph& A, const Box& region, std::size_t grid_n,
                                         const MaximalityOptions& opt = {}) {
    const OperatorGraph S = audit_sample(A, region, grid_n, opt);
    const MonotoneReport mono = is_monotone(S);
    if (!mono.monotone) {
        const auto& [a, b] = *mono.violating_pair;
        std::ostringstream os;
        os << "maximality_audit: graph is not monotone: (" << a.x[0] << ", " << a.xstar[0] << ") and (" << b.x[0]
           << ", " << b.xstar[0] << ") pair to " << mono.value;
        throw PreconditionError(os.str());
    }
    const PolarRegion R = polar_region(S, region, grid_n);
    MaximalityReport rep;
    rep.sample_size = S.pairs().size();
    rep.cell_diagonal = R.cell_diagonal();
    rep.delta = opt.delta.value_or(2.0 * rep.cell_diagonal);
    const auto pts = R.in_points();
    rep.polar_cells = pts.size();
    const std::vector<double> dist = detail::distances_to_sample(S.space(), S.pairs(), pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        rep.max_distance = std::max(rep.max_distance, dist[i]);
        if (dist[i] > rep.delta) rep.violations.push_back({pts[i], dist[i]});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Polar points near a dense graph

struct PolarDistanceCheck {
    double eps = 0.0;
    double bound = 0.0;          // √(2ε) + cell diagonal
    double max_distance = 0.0;   // over polar cells, product norm
    std::size_t polar_cells = 0;
    bool holds() const { return max_distance <= bound; }
};

/// For a graph certified r_L-dense at ε, every polar point lies within √(2ε)
/// of the graph; checked on the region cells against the sample.
inline PolarDistanceCheck polar_distance_check(const OperatorGraph& A, const Box& region, std::size_t grid_n, double eps,
                                               const MaximalityOptions& opt = {}) {
    if (!(eps >= 0.0)) throw PreconditionError("polar_distance_check: eps must be >= 0");
    const OperatorGraph S = audit_sample(A, region, grid_n, opt);
    const PolarRegion R = polar_region(S, region, grid_n);
    PolarDistanceCheck out;
    out.eps = eps;
    out.bound = std::sqrt(2.0 * eps) + R.cell_diagonal();
    const auto pts = R.in_points();
    out.polar_cells = pts.size();
    for (double d : detail::distances_to_sample(S.space(), S.pairs(), pts)) out.max_distance = std::max(out.max_distance, d);
    return out;
}

} // namespace rllab

#endif
