#ifndef RLLAB_OPERATORS_HPP
#define RLLAB_OPERATORS_HPP

// Set-valued maps S: E ⇉ E* as sampled graphs, analytic image rules, or
// affine maps x ↦ {Ax + b}, with the graph algebra used for r_L-density.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rllab/error.hpp"
#include "rllab/geometry.hpp"
#include "rllab/minimize.hpp"

namespace rllab {

/// Finite representative set of S(x). `density_k` is the number of interior
/// samples used for interval-valued (kink) images.
using ImageFn = std::function<std::vector<DualVec>(const Vec& x, int density_k)>;

struct SampledBody {
    std::vector<DualPair> pairs;
};

struct AnalyticBody {
    Box domain;
    ImageFn image;
    std::vector<Vec> hints; // points with set-valued images; searches always evaluate them
};

/// x ↦ {A x + b}, defined on all of E; `domain` only bounds searches and sampling.
struct LinearBody {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Box domain;
    // A + W in closed form when known, so that S + J is represented exactly
    std::optional<Eigen::MatrixXd> plus_riesz;
};

/// A + W for the Hilbert weight matrix W.
inline Eigen::MatrixXd plus_riesz_matrix(const NormedSpace& E, const LinearBody& l) {
    if (l.plus_riesz) return *l.plus_riesz;
    Eigen::MatrixXd M = l.A;
    for (std::size_t i = 0; i < E.dim(); ++i) M(i, i) += E.weight(i);
    return M;
}

/// Solves M s = rhs; diagonal systems are divided out exactly, others use
/// column-pivoted QR with one step of iterative refinement.
inline Eigen::VectorXd solve_linear(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs) {
    if (M.isDiagonal(0.0)) {
        Eigen::VectorXd s(rhs.size());
        for (Eigen::Index i = 0; i < rhs.size(); ++i) s(i) = M(i, i) != 0.0 ? rhs(i) / M(i, i) : 0.0;
        return s;
    }
    const auto qr = M.colPivHouseholderQr();
    Eigen::VectorXd s = qr.solve(rhs);
    s += qr.solve(rhs - M * s);
    return s;
}

class OperatorGraph {
public:
    using Body = std::variant<SampledBody, AnalyticBody, LinearBody>;

    OperatorGraph(NormedSpace E, Body body, std::string name = {})
        : E_(std::move(E)), body_(std::move(body)), name_(std::move(name)) {
        if (auto* s = std::get_if<SampledBody>(&body_)) {
            for (const auto& p : s->pairs) {
                require_dim(p.x.size(), E_.dim(), "sampled pair");
                require_dim(p.xstar.size(), E_.dim(), "sampled pair");
                if (!p.x.all_finite() || !p.xstar.all_finite()) throw Error("sampled pair has non-finite coordinates");
            }
        } else if (auto* a = std::get_if<AnalyticBody>(&body_)) {
            require_dim(a->domain.dim(), E_.dim(), "analytic domain");
            a->domain.validate();
        } else {
            const auto& l = std::get<LinearBody>(body_);
            if (static_cast<std::size_t>(l.A.rows()) != E_.dim() || static_cast<std::size_t>(l.A.cols()) != E_.dim() ||
                static_cast<std::size_t>(l.b.size()) != E_.dim()) {
                throw DimensionError("linear operator shape does not match the space");
            }
            l.domain.validate();
        }
    }

    const NormedSpace& space() const { return E_; }
    const Body& body() const { return body_; }
    const std::string& name() const { return name_; }

    bool is_sampled() const { return std::holds_alternative<SampledBody>(body_); }
    bool is_linear() const { return std::holds_alternative<LinearBody>(body_); }
    const std::vector<DualPair>& pairs() const { return std::get<SampledBody>(body_).pairs; }
    const LinearBody& linear() const { return std::get<LinearBody>(body_); }
    std::vector<Vec> hints() const {
        if (auto* a = std::get_if<AnalyticBody>(&body_)) return a->hints;
        return {};
    }

    /// Box over which the graph is searched (bounding box of x for samples).
    Box domain() const {
        if (auto* a = std::get_if<AnalyticBody>(&body_)) return a->domain;
        if (auto* l = std::get_if<LinearBody>(&body_)) return l->domain;
        const auto& ps = pairs();
        if (ps.empty()) throw Error("empty sampled graph");
        Box b{ps.front().x.raw(), ps.front().x.raw()};
        for (const auto& p : ps) {
            for (std::size_t i = 0; i < E_.dim(); ++i) {
                b.lo[i] = std::min(b.lo[i], p.x[i]);
                b.hi[i] = std::max(b.hi[i], p.x[i]);
            }
        }
        return b;
    }

    /// S(x) as a finite representative set (empty outside the domain).
    std::vector<DualVec> image(const Vec& x, int density_k = 5) const {
        require_dim(x.size(), E_.dim(), "image");
        if (auto* a = std::get_if<AnalyticBody>(&body_)) {
            if (!a->domain.contains(x.span())) return {};
            return a->image(x, density_k);
        }
        if (auto* l = std::get_if<LinearBody>(&body_)) {
            const Eigen::Map<const Eigen::VectorXd> xv(x.raw().data(), x.size());
            const Eigen::VectorXd v = l->A * xv + l->b;
            return {DualVec(std::vector<double>(v.data(), v.data() + v.size()))};
        }
        std::vector<DualVec> out;
        for (const auto& p : pairs()) {
            if (p.x == x) out.push_back(p.xstar);
        }
        return out;
    }

    /// Membership of (x, x*) up to tol in the dual norm. For analytic images
    /// with interval values, the segment hull of the representative set counts.
    bool contains(const DualPair& p, double tol = 1e-9) const {
        const auto img = image(p.x, 5);
        if (img.empty()) return false;
        for (const auto& z : img) {
            if (dual_norm(E_, z - p.xstar) <= tol) return true;
        }
        if (E_.dim() == 1 && !is_sampled()) {
            double lo = img.front()[0], hi = lo;
            for (const auto& z : img) {
                lo = std::min(lo, z[0]);
                hi = std::max(hi, z[0]);
            }
            return p.xstar[0] >= lo - tol && p.xstar[0] <= hi + tol;
        }
        return false;
    }

private:
    NormedSpace E_;
    Body body_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Constructors

inline OperatorGraph sampled_graph(NormedSpace E, std::vector<DualPair> pairs, std::string name = {}) {
    return {std::move(E), SampledBody{std::move(pairs)}, std::move(name)};
}

inline OperatorGraph analytic_graph(NormedSpace E, Box domain, ImageFn fn, std::string name = {},
                                    std::vector<Vec> hints = {}) {
    return {std::move(E), AnalyticBody{std::move(domain), std::move(fn), std::move(hints)}, std::move(name)};
}

inline OperatorGraph linear_graph(NormedSpace E, Eigen::MatrixXd A, Eigen::VectorXd b, Box domain,
                                  std::string name = "linear") {
    return {std::move(E), LinearBody{std::move(A), std::move(b), std::move(domain), std::nullopt}, std::move(name)};
}

inline OperatorGraph linear_graph(NormedSpace E, Eigen::MatrixXd A, Box domain, std::string name = "linear") {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(A.rows());
    return linear_graph(std::move(E), std::move(A), std::move(b), std::move(domain), std::move(name));
}

/// Scalar map x ↦ {g(x)} on a 1-D domain.
inline OperatorGraph scalar_graph(std::function<double(double)> g, Box domain, std::string name = {}) {
    return analytic_graph(NormedSpace::real_line(), std::move(domain),
                          [g = std::move(g)](const Vec& x, int) { return std::vector<DualVec>{DualVec{g(x[0])}}; },
                          std::move(name));
}

inline OperatorGraph identity_graph(const NormedSpace& E, Box domain) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(E.dim(), E.dim());
    for (std::size_t i = 0; i < E.dim(); ++i) A(i, i) = E.weight(i);
    return linear_graph(E, std::move(A), std::move(domain), "identity");
}

inline OperatorGraph zero_graph(const NormedSpace& E, Box domain) {
    return linear_graph(E, Eigen::MatrixXd::Zero(E.dim(), E.dim()), std::move(domain), "zero");
}

/// Truncation of S x = -x + (x_n / n) on the first N coordinates of l².
inline OperatorGraph diagonal_ladder(std::size_t N, double box_half_width = 10.0) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t n = 1; n <= N; ++n) A(n - 1, n - 1) = -1.0 + 1.0 / static_cast<double>(n);
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t n = 1; n <= N; ++n) shifted(n - 1, n - 1) = 1.0 / static_cast<double>(n);
    const NormedSpace E(N, NormKind::weighted2, std::vector<double>(N, 1.0));
    return {E,
            LinearBody{std::move(A), Eigen::VectorXd::Zero(N), Box::cube(N, -box_half_width, box_half_width),
                       std::move(shifted)},
            "diagonal_ladder"};
}

// ---------------------------------------------------------------------------
// Operations

/// Deterministic sample: a domain grid carrying about half the budget plus
/// seeded jittered points, each with every image element attached.
inline OperatorGraph graph_sample(const OperatorGraph& S, std::size_t budget, std::uint64_t seed = 0,
                                  int density_k = 5) {
    if (budget == 0) throw Error("graph_sample: budget must be >= 1");
    if (S.is_sampled()) return S;
    const Box dom = S.domain();
    const std::size_t n = dom.dim();
    std::vector<Vec> xs;
    const std::size_t n_grid = budget - budget / 2;
    if (n_grid >= 2) {
        const std::size_t per_axis =
            std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(std::pow(double(n_grid), 1.0 / double(n)) + 1e-9)));
        const Grid grid(dom, per_axis, n_grid);
        for (std::size_t i = 0; i < grid.size() && xs.size() < n_grid; ++i) xs.push_back(grid.point(i));
    }
    std::mt19937_64 rng(seed);
    while (xs.size() < budget) {
        Vec x(n);
        for (std::size_t a = 0; a < n; ++a) x[a] = std::uniform_real_distribution<double>(dom.lo[a], dom.hi[a])(rng);
        xs.push_back(std::move(x));
    }
    std::vector<DualPair> pairs;
    for (const Vec& x : xs) {
        for (auto& z : S.image(x, density_k)) pairs.push_back({x, std::move(z)});
    }
    if (pairs.empty()) throw Error("graph_sample: empty domain");
    return sampled_graph(S.space(), std::move(pairs), S.name());
}

/// S + J(· - y). Hilbert norms keep the representation (affine stays affine);
/// p1/pinf faces are sampled at 2k+1 points per face direction.
inline OperatorGraph shift_plus_J(const OperatorGraph& S, const Vec& y, int face_k = 5) {
    const NormedSpace& E = S.space();
    require_dim(y.size(), E.dim(), "shift_plus_J");
    const std::string name = S.name() + "+J(.-y)";
    if (S.is_linear() && E.is_hilbert()) {
        const auto& l = S.linear();
        Eigen::MatrixXd A = plus_riesz_matrix(E, l);
        Eigen::VectorXd b = l.b;
        for (std::size_t i = 0; i < E.dim(); ++i) b(i) -= E.weight(i) * y[i];
        return linear_graph(E, std::move(A), std::move(b), l.domain, name);
    }
    auto j_sample = [E, y, face_k](const Vec& x) { return duality_map(E, x - y).sample(face_k); };
    if (S.is_sampled()) {
        std::vector<DualPair> out;
        for (const auto& p : S.pairs()) {
            for (const auto& z : j_sample(p.x)) out.push_back({p.x, p.xstar + z});
        }
        return sampled_graph(E, std::move(out), name);
    }
    return analytic_graph(E, S.domain(),
                          [S, j_sample](const Vec& x, int k) {
                              std::vector<DualVec> out;
                              const auto js = j_sample(x);
                              for (const auto& s : S.image(x, k)) {
                                  for (const auto& z : js) out.push_back(s + z);
                              }
                              return out;
                          },
                          name);
}

/// Sampled gra J over a box: pairs (t, t*) with t* from the face sample of J(t).
inline std::vector<DualPair> sample_graph_J(const NormedSpace& E, const Box& t_box, std::size_t budget, int face_k = 5) {
    const std::size_t per_axis = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(std::pow(double(budget), 1.0 / double(E.dim())) + 1e-9)));
    const Grid grid(t_box, per_axis, budget);
    std::vector<DualPair> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec t = grid.point(i);
        for (auto& z : duality_map(E, t).sample(face_k)) out.push_back({t, std::move(z)});
    }
    return out;
}

/// A - gra(-J) = {(s - t, s* + t*) : (s, s*) ∈ A, (t, t*) ∈ gra J}.
inline OperatorGraph graph_minus_negJ(const OperatorGraph& A, std::size_t budget, const Box& t_box) {
    if (!A.is_sampled()) throw Error("graph_minus_negJ: needs a sampled graph");
    const auto js = sample_graph_J(A.space(), t_box, budget);
    std::vector<DualPair> out;
    out.reserve(A.pairs().size() * js.size());
    for (const auto& p : A.pairs()) {
        for (const auto& q : js) out.push_back({p.x - q.x, p.xstar + q.xstar});
    }
    return sampled_graph(A.space(), std::move(out), A.name() + "-gra(-J)");
}

// ---------------------------------------------------------------------------
// Searching a graph

using PairScore = std::function<double(const Vec& x, const DualVec& xs)>;

struct GraphSearchResult {
    DualPair pair;
    double value = kInf;
    double slack = 0.0;       // variation of the score over the final refinement cell
    std::size_t evaluations = 0;
};

struct GraphSearchOptions {
    std::size_t grid_n = 2001;
    int density_k = 5;
    std::vector<Vec> extra_starts;
    bool interval_images = true; // refine the image element over the 1-D interval it spans
};

/// min over gra S ∩ (box × E*) of score. Sampled graphs are scanned exactly;
/// analytic and affine graphs use grid search plus refinement on x, taking
/// the best image element at each x.
inline GraphSearchResult search_graph(const OperatorGraph& S, const PairScore& score, const Box& box,
                                      const GraphSearchOptions& opt = {}) {
    GraphSearchResult best;
    if (S.is_sampled()) {
        for (const auto& p : S.pairs()) {
            const double v = score(p.x, p.xstar);
            ++best.evaluations;
            if (v < best.value || (v == best.value && lex_less(p.x, best.pair.x))) {
                best.value = v;
                best.pair = p;
            }
        }
        if (best.evaluations == 0) throw Error("search_graph: empty graph");
        return best;
    }
    Box b = box;
    const Box dom = S.domain();
    for (std::size_t i = 0; i < b.dim(); ++i) {
        b.lo[i] = std::max(b.lo[i], dom.lo[i]);
        b.hi[i] = std::min(b.hi[i], dom.hi[i]);
        if (b.lo[i] > b.hi[i]) throw Error("search_graph: box misses the domain");
    }
    const int k = opt.density_k;
    auto best_image = [&](const Vec& x, DualVec* arg) {
        double m = kInf;
        const auto imgs = S.image(x, k);
        for (const auto& z : imgs) {
            const double v = score(x, z);
            if (std::isnan(v)) throw EvalError("score returned NaN");
            if (v < m) {
                m = v;
                if (arg) *arg = z;
            }
        }
        if (opt.interval_images && x.size() == 1 && imgs.size() >= 2) {
            // 1-D images span an interval; the scores used here are convex on it
            double lo = kInf, hi = -kInf;
            for (const auto& z : imgs) {
                lo = std::min(lo, z[0]);
                hi = std::max(hi, z[0]);
            }
            auto at = [&](double t) { return score(x, DualVec{t}); };
            for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
                const double a = lo + (hi - lo) / 3, c = hi - (hi - lo) / 3;
                if (at(a) <= at(c)) hi = c;
                else lo = a;
            }
            const double t = 0.5 * (lo + hi);
            const double v = at(t);
            if (v < m) {
                m = v;
                if (arg) *arg = DualVec{t};
            }
        }
        return m;
    };
    MinimizeOptions mo;
    mo.grid_n = opt.grid_n;
    mo.extra_starts = opt.extra_starts;
    const MinResult r = minimize_objective([&](const Vec& x) { return best_image(x, nullptr); }, b, mo);
    best.evaluations = r.evaluations;
    DualVec xs;
    best.value = best_image(r.x, &xs);
    best.pair = {r.x, xs};
    for (const auto& p : S.hints()) {
        if (!b.contains(p.span())) continue;
        DualVec hs;
        const double v = best_image(p, &hs);
        if (v < best.value) {
            best.value = v;
            best.pair = {p, hs};
        }
    }
    // largest change of the score across the final cell around the minimiser
    double slack = 0.0;
    const double h = r.final_step;
    for (std::size_t a = 0; a < r.x.size(); ++a) {
        for (double sgn : {-1.0, 1.0}) {
            Vec y = r.x;
            y[a] = std::clamp(y[a] + sgn * h, b.lo[a], b.hi[a]);
            const double v = best_image(y, nullptr);
            if (std::isfinite(v)) slack = std::max(slack, std::abs(v - best.value));
        }
    }
    best.slack = slack;
    return best;
}

struct RangeResidual {
    Vec s;
    DualVec sstar;
    double residual = kInf; // ‖s* + Js - y*‖*
};

/// Hilbert mode: min over the graph of ‖s + s* - y*‖ (S + Id against y*).
inline RangeResidual range_residual(const OperatorGraph& S, const DualVec& ystar, const Box& box,
                                    std::size_t grid_n = 2001) {
    const NormedSpace& E = S.space();
    if (!E.is_hilbert()) throw Error("range_residual: requires a Hilbert norm");
    require_dim(ystar.size(), E.dim(), "range_residual");
    if (S.is_linear()) {
        const auto& l = S.linear();
        const Eigen::MatrixXd M = plus_riesz_matrix(E, l);
        Eigen::VectorXd rhs(E.dim());
        for (std::size_t i = 0; i < E.dim(); ++i) rhs(i) = ystar[i] - l.b(i);
        const Eigen::VectorXd sol = solve_linear(M, rhs);
        Vec s(std::vector<double>(sol.data(), sol.data() + sol.size()));
        DualVec ss = S.image(s).front();
        // residual of (S + J)s - y* evaluated through the closed form of S + J
        const Eigen::VectorXd r = M * sol + l.b;
        DualVec shifted(std::vector<double>(r.data(), r.data() + r.size()));
        const double res = dual_norm(E, shifted - ystar);
        if (std::isfinite(res)) return {s, ss, res};
    }
    const GraphSearchResult r = search_graph(
        S, [&](const Vec& x, const DualVec& xs) { return dual_norm_squared(E, xs + riesz(E, x) - ystar); }, box,
        {grid_n, 5, {}});
    return {r.pair.x, r.pair.xstar, std::sqrt(r.value)};
}

} // namespace rllab

#endif
