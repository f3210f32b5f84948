#ifndef RLLAB_DENSITY_HPP
#define RLLAB_DENSITY_HPP

// r_L-density: direct certification and refutation over a box, the
// constructive subdifferential pipeline, Minty checks in Hilbert mode and the
// hyperdense-range route.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rllab/error.hpp"
#include "rllab/funcspec.hpp"
#include "rllab/geometry.hpp"
#include "rllab/operators.hpp"
#include "rllab/subdiff.hpp"
#include "rllab/varprinciples.hpp"

namespace rllab {

inline const std::vector<double>& default_eps_schedule() {
    static const std::vector<double> s{1e-2, 1e-4, 1e-6};
    return s;
}

struct Witness {
    DualPair pair;
    double gap = 0.0;        // rl_gap(pair, target)
    double eps = 0.0;        // schedule entry this witness answers
    double dist_primal = 0.0; // ‖s - y‖
    double dist_dual = 0.0;   // ‖s* - y*‖*
};

struct DensityCertificate {
    DualPair target;
    std::vector<Witness> witnesses;    // gaps non-increasing along the schedule
    std::optional<double> stable_bound; // M with ‖s-y‖ <= M and ‖s*-y*‖ <= M for every witness
    std::string method;
};

/// Grid evidence against density over a box; not a proof.
struct RefutationReport {
    DualPair target;
    Box box;
    std::size_t grid_n = 0;
    double eps = 0.0;        // first schedule entry that was not met
    double best_gap = kInf;  // smallest gap found
    double slack = 0.0;      // score variation over the final refinement cell
    double delta = 0.0;      // best_gap - slack
    DualPair best_pair;
    bool conclusive() const { return delta > 0.0; }
};

using DensityResult = std::variant<DensityCertificate, RefutationReport>;

struct DensityOptions {
    std::vector<double> eps_schedule = default_eps_schedule();
    std::optional<Box> search_box; // default [-10, 10]^n
    std::size_t grid_n = 2001;
    int density_k = 5;
};

namespace detail {

inline Box search_box_or_default(const DensityOptions& opt, std::size_t n) {
    return opt.search_box ? *opt.search_box : Box::cube(n, -10, 10);
}

inline bool meets(double gap, double eps) { return gap < eps || gap == 0.0; }

inline Witness make_witness(const NormedSpace& E, const DualPair& p, const DualPair& target, double eps) {
    return {p, rl_gap(E, p, target), eps, norm(E, p.x - target.x), dual_norm(E, p.xstar - target.xstar)};
}

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(std::vector<double>(v.data(), v.data() + v.size())); }

inline void check_schedule(const std::vector<double>& s) {
    if (s.empty()) throw Error("eps schedule is empty");
    for (double e : s) {
        if (!(e >= 0.0)) throw Error("eps schedule entries must be >= 0");
    }
}

} // namespace detail

/// inf over gra A of rl(s - y, s* - y*), searched once on the box and checked
/// against every ε in the schedule. Affine graphs in Hilbert mode are solved
/// exactly: (A + W)s = y* + Wy - b.
inline DensityResult certify_density(const OperatorGraph& A, const DualPair& target, const DensityOptions& opt = {}) {
    const NormedSpace& E = A.space();
    require_dim(target.x.size(), E.dim(), "certify_density target");
    require_dim(target.xstar.size(), E.dim(), "certify_density target");
    detail::check_schedule(opt.eps_schedule);
    const Box box = detail::search_box_or_default(opt, E.dim());

    std::optional<DualPair> best;
    double best_gap = kInf, slack = 0.0;
    if (A.is_linear() && E.is_hilbert()) {
        const auto& l = A.linear();
        Eigen::VectorXd rhs(E.dim());
        for (std::size_t i = 0; i < E.dim(); ++i) rhs(i) = target.xstar[i] + E.weight(i) * target.x[i] - l.b(i);
        const Vec s = detail::to_vec(solve_linear(plus_riesz_matrix(E, l), rhs));
        if (s.all_finite()) {
            best = DualPair{s, A.image(s).front()};
            best_gap = rl_gap(E, *best, target);
        }
    }
    if (!best || !detail::meets(best_gap, opt.eps_schedule.back())) {
        GraphSearchOptions go;
        go.grid_n = opt.grid_n;
        go.density_k = opt.density_k;
        const auto r = search_graph(
            A, [&](const Vec& x, const DualVec& xs) { return rl(E, x - target.x, xs - target.xstar); }, box, go);
        if (!best || r.value < best_gap) {
            best = r.pair;
            best_gap = r.value;
            slack = r.slack;
        }
    }

    DensityCertificate cert{target, {}, std::nullopt, A.is_sampled() ? "sample-scan" : "grid-search"};
    for (double eps : opt.eps_schedule) {
        if (!detail::meets(best_gap, eps)) {
            RefutationReport rep{target, box, opt.grid_n, eps, best_gap, slack, best_gap - slack, *best};
            return rep;
        }
        cert.witnesses.push_back(detail::make_witness(E, *best, target, eps));
    }
    return cert;
}

// ---------------------------------------------------------------------------
// Subdifferential pipeline

struct SubdiffDensityOptions {
    std::vector<double> eps_schedule = default_eps_schedule();
    std::optional<Box> search_box;
    std::size_t grid_n = 2001;
};

struct SubdiffPipelineTrace {
    double m = 0.0;      // inf of f + k
    double M = 0.0;      // stability bound
    Vec u;               // minimiser of f + k
    Box box;             // final search box
    std::vector<double> betas;
};

namespace detail {

// s* ∈ ∂f(s) nearest to y* - z* over z* ∈ J(s - y); returns (s*, z*, ‖s* + z* - y*‖).
inline std::tuple<DualVec, DualVec, double> recover_subgradient(SubdiffEngine e, const ScalarFunc& f,
                                                                const NormedSpace& E, const Vec& s, const Vec& y,
                                                                const DualVec& ystar) {
    const JFace J = duality_map(E, s - y);
    std::tuple<DualVec, DualVec, double> best{DualVec{}, DualVec{}, kInf};
    for (const auto& z : J.sample(5)) {
        const DualVec want = ystar - z;
        const DualVec ss = nearest_subgradient(e, f, s, want);
        const double d = dual_norm(E, ss + z - ystar);
        if (d < std::get<2>(best)) best = {ss, z, d};
    }
    return best;
}

} // namespace detail

/// Builds k = j(· - y) - <·, y*>, m = inf(f + k), M from the downside bound,
/// then for each ε: β = ε/(4M), an Ekeland point s of f + k with α = 1, and
/// s* ∈ ∂f(s) with ‖s* + J(s-y) - y*‖ <= β. Gaps are bounded by 2Mβ < ε.
inline DensityCertificate certify_subdiff_density(const ScalarFunc& f, SubdiffEngine engine, DownsideCertificate cert,
                                                  const DualPair& target, const SubdiffDensityOptions& opt = {},
                                                  SubdiffPipelineTrace* trace = nullptr) {
    detail::check_engine(engine, f);
    detail::check_schedule(opt.eps_schedule);
    const NormedSpace E = NormedSpace::euclidean(f.dim());
    const Vec& y = target.x;
    const DualVec& ystar = target.xstar;
    require_dim(y.size(), f.dim(), "certify_subdiff_density target");
    require_dim(ystar.size(), f.dim(), "certify_subdiff_density target");
    Box box = opt.search_box ? *opt.search_box : Box::cube(f.dim(), -10, 10);
    if (cert.worst_violation == kInf) cert = verify_downside(f, cert, box, opt.grid_n, E);
    if (!cert.valid()) {
        std::ostringstream os;
        os << "downside certificate invalid (a0 = " << cert.a0 << ", worst violation " << cert.worst_violation << ")";
        throw PreconditionError(os.str());
    }

    const Objective k = [&](const Vec& x) { return j(E, x - y) - pairing(x, ystar); };
    const Objective fk = [&](const Vec& x) {
        const double v = f.value(x);
        return v == kInf ? kInf : v + k(x);
    };

    // the sublevel set {f + k <= m + 1} lies in the ball of radius r around 0;
    // grow the box until it holds that ball, so m is the global infimum
    double m = 0.0, M = 0.0;
    Vec u;
    for (int round = 0;; ++round) {
        MinimizeOptions mo;
        mo.grid_n = opt.grid_n;
        const MinResult mr = minimize_objective(fk, effective_box(f, box), mo);
        m = mr.value;
        u = mr.x;
        M = theorem3_bound(E, cert, y, ystar, m);
        const double r = M - norm(E, y) - 2.0;
        bool covered = true;
        for (std::size_t i = 0; i < box.dim(); ++i) covered &= box.lo[i] <= -r && box.hi[i] >= r;
        if (covered || f.domain_box || round == 8) break;
        box = Box::cube(f.dim(), -(r + 1.0), r + 1.0);
    }
    if (trace) {
        trace->m = m;
        trace->M = M;
        trace->u = u;
        trace->box = box;
    }

    DensityCertificate out{target, {}, M, "subdiff-pipeline"};
    for (double eps : opt.eps_schedule) {
        const double beta = std::min(1.0, eps / (4.0 * M));
        if (trace) trace->betas.push_back(beta);
        EkelandOptions eo;
        eo.grid_n = opt.grid_n;
        eo.inf_g = m;
        Vec s = u;
        if (beta > 0.0) s = ekeland_point(fk, E, u, 1.0, beta, effective_box(f, box), eo).s;
        auto [ss, z, d] = detail::recover_subgradient(engine, f, E, s, y, ystar);
        if (d > beta + kBRTol && f.dim() == 1) {
            // move onto the kink whose fan reaches y* - J(s - y)
            const Interval I = subdiff_interval(engine, f, s[0]);
            const double want = ystar[0] - z[0];
            const double tgt = I.hi < want - beta ? want - beta : want + beta;
            if (const auto c = snap_to_kink(f, s[0], tgt, 1e-6 * (1.0 + std::abs(s[0])))) {
                const Vec cs{*c};
                auto [css, cz, cd] = detail::recover_subgradient(engine, f, E, cs, y, ystar);
                if (cd < d) {
                    s = cs;
                    ss = css;
                    d = cd;
                }
            }
        }
        if (d > beta + kBRTol) {
            std::ostringstream os;
            os << "certify_subdiff_density: no subgradient within beta = " << beta << " at s = " << s[0]
               << " (distance " << d << ")";
            throw SearchError(os.str());
        }
        Witness w = detail::make_witness(E, {s, ss}, target, eps);
        if (!detail::meets(w.gap, eps) || w.dist_primal > M - 1.0 + 1e-9 || w.dist_dual > M + 1e-9) {
            std::ostringstream os;
            os << "certify_subdiff_density: witness at eps = " << eps << " violates the bound chain (gap " << w.gap
               << ", |s-y| " << w.dist_primal << ", |s*-y*| " << w.dist_dual << ", M " << M << ")";
            throw SearchError(os.str());
        }
        out.witnesses.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Minty (Hilbert mode)

struct MintyResult {
    bool success = false;
    Vec s;
    DualVec sstar;
    double residual = kInf; // ‖s* + Ws - y*‖*
    double gap = kInf;      // rl_gap((s, s*), (0, y*))
};

inline constexpr double kMintyTol = 1e-9;

/// Solves s* + Ws = y* with s* ∈ S(s); success when the residual is <= 1e-9.
inline MintyResult minty_exact(const OperatorGraph& S, const DualVec& ystar, const Box& box, std::size_t grid_n = 2001) {
    const RangeResidual r = range_residual(S, ystar, box, grid_n);
    MintyResult out{r.residual <= kMintyTol, r.s, r.sstar, r.residual, 0.0};
    out.gap = rl_gap(S.space(), {r.s, r.sstar}, {Vec(S.space().dim(), 0.0), ystar});
    return out;
}

struct LadderRow {
    std::size_t N = 0;
    std::size_t k = 0;          // preimage restricted to the first k coordinates (0 = none)
    Vec preimage;
    double preimage_norm = 0.0;
    double residual_sq = 0.0;   // ‖(S + Id)x - y*‖²
};

/// For each linear Hilbert-mode S_i and target y*_i: solves (S + W)x = y*,
/// optionally on the leading k × k block with x zero beyond k, and reports the
/// residual against the full target.
inline std::vector<LadderRow> minty_dense(const std::vector<OperatorGraph>& family, const std::vector<DualVec>& targets,
                                          std::size_t k = 0) {
    if (family.size() != targets.size()) throw DimensionError("minty_dense: one target per operator");
    std::vector<LadderRow> rows;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const OperatorGraph& S = family[i];
        const NormedSpace& E = S.space();
        if (!S.is_linear() || !E.is_hilbert()) throw Error("minty_dense: needs linear operators in Hilbert mode");
        require_dim(targets[i].size(), E.dim(), "minty_dense target");
        const std::size_t N = E.dim();
        const std::size_t kk = k == 0 ? N : std::min(k, N);
        const Eigen::MatrixXd M = plus_riesz_matrix(E, S.linear());
        Eigen::VectorXd rhs(kk);
        for (std::size_t a = 0; a < kk; ++a) rhs(a) = targets[i][a] - S.linear().b(a);
        const Eigen::VectorXd head = solve_linear(M.topLeftCorner(kk, kk), rhs);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
        x.head(kk) = head;
        const Eigen::VectorXd img = M * x + S.linear().b;
        LadderRow row{N, k, detail::to_vec(x), 0.0, 0.0};
        row.preimage_norm = norm(E, row.preimage);
        double sq = 0.0;
        for (std::size_t a = 0; a < N; ++a) {
            const double d = img(a) - targets[i][a];
            sq += d * d / E.weight(a);
        }
        row.residual_sq = sq;
        rows.push_back(std::move(row));
    }
    return rows;
}

/// The diagonal ladder at N with target (1/n)_{n <= N}.
inline DualVec ladder_target(std::size_t N) {
    DualVec t(N);
    for (std::size_t n = 1; n <= N; ++n) t[n - 1] = 1.0 / static_cast<double>(n);
    return t;
}

// ---------------------------------------------------------------------------
// Hyperdense range

struct HyperdenseResult {
    bool success = false;
    std::vector<Witness> witnesses; // pair (t, t*), dist_dual = ‖t* - y*‖*
    double best_distance = kInf;
    DualPair best;
};

/// Points (t, t*) ∈ gra T with ‖t‖ <= M and ‖t* - y*‖* < ε for each ε.
inline HyperdenseResult hyperdense_check(const OperatorGraph& T, const DualVec& ystar, double M_bound,
                                         const std::vector<double>& eps_schedule = default_eps_schedule(),
                                         std::size_t grid_n = 2001) {
    const NormedSpace& E = T.space();
    require_dim(ystar.size(), E.dim(), "hyperdense_check");
    detail::check_schedule(eps_schedule);
    HyperdenseResult out;
    std::optional<DualPair> best;
    if (T.is_linear()) {
        const auto& l = T.linear();
        Eigen::VectorXd rhs(E.dim());
        for (std::size_t i = 0; i < E.dim(); ++i) rhs(i) = ystar[i] - l.b(i);
        const Vec t = detail::to_vec(solve_linear(l.A, rhs));
        if (t.all_finite() && norm(E, t) <= M_bound) {
            best = DualPair{t, T.image(t).front()};
            out.best_distance = dual_norm(E, best->xstar - ystar);
        }
    }
    if (!best || !detail::meets(out.best_distance, eps_schedule.back())) {
        Box box = Box::cube(E.dim(), -M_bound, M_bound);
        const Box dom = T.domain();
        for (std::size_t i = 0; i < box.dim(); ++i) {
            box.lo[i] = std::max(box.lo[i], dom.lo[i]);
            box.hi[i] = std::min(box.hi[i], dom.hi[i]);
        }
        GraphSearchOptions go;
        go.grid_n = grid_n;
        const auto r = search_graph(
            T,
            [&](const Vec& x, const DualVec& xs) { return norm(E, x) <= M_bound ? dual_norm(E, xs - ystar) : kInf; },
            box, go);
        if (std::isfinite(r.value) && r.value < out.best_distance) {
            best = r.pair;
            out.best_distance = r.value;
        }
    }
    if (!best) return out;
    out.best = *best;
    out.success = true;
    for (double eps : eps_schedule) {
        if (!detail::meets(out.best_distance, eps)) {
            out.success = false;
            break;
        }
        out.witnesses.push_back({*best, 0.0, eps, norm(E, best->x), out.best_distance});
    }
    return out;
}

struct HyperdenseDensityResult {
    DensityCertificate certificate;
    double M = 0.0;
    std::vector<double> betas;
    bool bounds_ok = true; // ‖s‖ <= M and ‖s*‖ <= M + ‖y‖ + ‖y*‖ + 1 for every witness
};

/// For each ε: β = ε/(2(2(M + ‖y‖) + 1)), (s, t*) ∈ gra(S + J(· - y)) with
/// ‖s‖ <= M and ‖t* - y*‖ < β, then t* = s* + z* with z* ∈ J(s - y).
inline HyperdenseDensityResult density_via_hyperdense(const OperatorGraph& S, const Vec& y, const DualVec& ystar,
                                                      const std::vector<double>& eps_schedule = default_eps_schedule(),
                                                      std::optional<double> M_bound = std::nullopt,
                                                      std::size_t grid_n = 2001) {
    const NormedSpace& E = S.space();
    const DualPair target{y, ystar};
    const double M = M_bound ? *M_bound : box_radius(E, S.domain());
    const double ny = norm(E, y);
    const OperatorGraph T = shift_plus_J(S, y);
    HyperdenseDensityResult out{{target, {}, std::nullopt, "hyperdense"}, M, {}, true};
    double worst = 0.0;
    for (double eps : eps_schedule) {
        const double beta = 0.5 * eps / (2.0 * (M + ny) + 1.0);
        out.betas.push_back(beta);
        const HyperdenseResult h = hyperdense_check(T, ystar, M, {beta}, grid_n);
        if (!h.success) {
            std::ostringstream os;
            os << "density_via_hyperdense: S + J(.-y) misses y* by " << h.best_distance << " within norm " << M
               << " (beta = " << beta << ")";
            throw SearchError(os.str());
        }
        const Vec s = h.best.x;
        // decompose t* = s* + z*
        DualVec ss, best_z;
        double dmin = kInf;
        const auto zs = duality_map(E, s - y).sample(5);
        for (const auto& sv : S.image(s)) {
            for (const auto& z : zs) {
                const double d = dual_norm(E, sv + z - h.best.xstar);
                if (d < dmin) {
                    dmin = d;
                    ss = sv;
                    best_z = z;
                }
            }
        }
        Witness w = detail::make_witness(E, {s, ss}, target, eps);
        if (!detail::meets(w.gap, eps)) {
            std::ostringstream os;
            os << "density_via_hyperdense: gap " << w.gap << " at eps = " << eps;
            throw SearchError(os.str());
        }
        if (norm(E, s) > M + 1e-12 || dual_norm(E, ss) > M + ny + dual_norm(E, ystar) + 1.0) out.bounds_ok = false;
        worst = std::max({worst, w.dist_primal, w.dist_dual});
        out.certificate.witnesses.push_back(std::move(w));
    }
    out.certificate.stable_bound = M + ny + 2.0 * dual_norm(E, ystar) + 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// A - gra(-J)

struct ApproxMintyResult {
    DualPair point;      // (s - t, s* + t*)
    DualPair witness;    // (s, s*) ∈ A
    JProjection projection;
    double gap = 0.0;
    double distance_sq = 0.0; // ‖(s - t, s* + t*) - (y, y*)‖² in the product norm
};

/// A point of A - gra(-J) within √(2ε) of the target, from an ε-witness of
/// r_L-density and the Brøndsted-Rockafellar step for j.
inline ApproxMintyResult approx_minty_difference(const OperatorGraph& A, const DualPair& target, double eps,
                                                 const DensityOptions& base = {}) {
    DensityOptions opt = base;
    opt.eps_schedule = {eps};
    const DensityResult r = certify_density(A, target, opt);
    if (const auto* ref = std::get_if<RefutationReport>(&r)) {
        std::ostringstream os;
        os << "approx_minty_difference: no witness at eps = " << eps << " (best gap " << ref->best_gap << ")";
        throw PreconditionError(os.str());
    }
    const NormedSpace& E = A.space();
    const Witness& w = std::get<DensityCertificate>(r).witnesses.front();
    const Vec u = w.pair.x - target.x;
    const DualVec ustar = target.xstar - w.pair.xstar;
    ApproxMintyResult out;
    out.witness = w.pair;
    out.gap = w.gap;
    out.projection = br_project_convex_j(E, u, ustar, w.gap);
    out.point = {w.pair.x - out.projection.t, w.pair.xstar + out.projection.tstar};
    const double p = product_norm(E, out.point.x - target.x, out.point.xstar - target.xstar);
    out.distance_sq = p * p;
    return out;
}

} // namespace rllab

#endif
