#ifndef RLLAB_VARPRINCIPLES_HPP
#define RLLAB_VARPRINCIPLES_HPP

// Ekeland's principle as a descent construction, and the Brøndsted-Rockafellar
// projection built on it.

#include <cmath>
#include <optional>
#include <sstream>

#include "rllab/error.hpp"
#include "rllab/funcspec.hpp"
#include "rllab/geometry.hpp"
#include "rllab/minimize.hpp"
#include "rllab/subdiff.hpp"

namespace rllab {

struct EkelandOptions {
    std::size_t grid_n = 2001;
    std::optional<double> inf_g;       // infimum of g over the box, computed when absent
    double precondition_slack = 1e-9;
    int max_iterations = 10000;
    double strict_decrease = 1e-10;
};

struct EkelandResult {
    Vec s;
    bool decrease_ok = false;       // g(s) + β‖s-u‖ <= g(u), checked exactly
    double strictmin_margin = kInf; // min over grid x != s of g(x) + β‖x-s‖ - g(s)
    double distance = 0.0;          // ‖s-u‖
    double g_u = 0.0, g_s = 0.0, inf_g = 0.0;
    int iterations = 0;
};

namespace detail {

// Box containing the closed ball B(u, r), clipped to box.
inline Box ball_box(const NormedSpace& E, const Vec& u, double r, const Box& box) {
    Box b = box;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double reach = E.kind() == NormKind::weighted2 ? r / std::sqrt(E.weight(i)) : r;
        b.lo[i] = std::max(box.lo[i], u[i] - reach);
        b.hi[i] = std::min(box.hi[i], u[i] + reach);
        if (b.lo[i] > b.hi[i]) throw PreconditionError("ekeland: start point lies outside the box");
    }
    return b;
}

} // namespace detail

/// From u with g(u) <= inf g + αβ, descends s_{k+1} = argmin g + β‖· - s_k‖
/// over F = {x : g(x) + β‖x-u‖ <= g(u), ‖x-u‖ <= α} until no strict decrease.
inline EkelandResult ekeland_point(const Objective& g, const NormedSpace& E, const Vec& u, double alpha, double beta,
                                   const Box& box, const EkelandOptions& opt = {}) {
    require_dim(u.size(), E.dim(), "ekeland_point");
    require_dim(box.dim(), E.dim(), "ekeland_point box");
    if (!(alpha >= 0.0) || !(beta > 0.0)) throw PreconditionError("ekeland_point: need alpha >= 0 and beta > 0");
    EkelandResult res;
    res.g_u = detail::checked(g, u);
    if (!std::isfinite(res.g_u)) throw PreconditionError("ekeland_point: g(u) is not finite");
    if (opt.inf_g) {
        res.inf_g = *opt.inf_g;
    } else {
        MinimizeOptions mo;
        mo.grid_n = opt.grid_n;
        mo.extra_starts = {u};
        res.inf_g = minimize_objective(g, box, mo).value;
    }
    if (!(res.g_u <= res.inf_g + alpha * beta + opt.precondition_slack)) {
        std::ostringstream os;
        os << "ekeland_point: g(u) - inf g = " << res.g_u - res.inf_g << " exceeds alpha*beta = " << alpha * beta;
        throw PreconditionError(os.str());
    }

    const Box sub = detail::ball_box(E, u, alpha, box);
    auto feasible = [&](const Vec& x, double gx) {
        const double d = norm(E, x - u);
        return d <= alpha && gx + beta * d <= res.g_u;
    };
    Vec s = u;
    double gs = res.g_u;
    MinimizeOptions mo;
    mo.grid_n = opt.grid_n;
    while (alpha > 0.0) {
        if (++res.iterations > opt.max_iterations) throw SearchError("ekeland_point: no fixed point after 10^4 steps");
        Objective phi = [&](const Vec& x) {
            const double gx = g(x);
            if (!std::isfinite(gx) || !feasible(x, gx)) return kInf;
            return gx + beta * norm(E, x - s);
        };
        mo.extra_starts = {s, u};
        const MinResult r = minimize_objective(phi, sub, mo);
        if (!(r.value < gs - opt.strict_decrease)) break;
        s = r.x;
        gs = detail::checked(g, s);
    }

    res.s = s;
    res.g_s = gs;
    res.distance = norm(E, s - u);
    res.decrease_ok = gs + beta * res.distance <= res.g_u;

    const Grid grid(sub, opt.grid_n);
    std::vector<double> margin(grid.size(), kInf);
    parallel_for(grid.size(), [&](std::size_t i) {
        const Vec x = grid.point(i);
        if (x == s) return;
        const double gx = g(x);
        if (std::isfinite(gx)) margin[i] = gx + beta * norm(E, x - s) - gs;
    });
    res.strictmin_margin = *std::min_element(margin.begin(), margin.end());
    return res;
}

inline EkelandResult ekeland_point(const ScalarFunc& g, const Vec& u, double alpha, double beta, const Box& box,
                                   std::size_t grid_n = 2001) {
    EkelandOptions opt;
    opt.grid_n = grid_n;
    return ekeland_point(g.objective(), NormedSpace::euclidean(g.dim()), u, alpha, beta, effective_box(g, box), opt);
}

// ---------------------------------------------------------------------------
// Brøndsted-Rockafellar

struct BRResult {
    Vec s;
    DualVec sstar;
    double dist_primal = 0.0, dist_dual = 0.0;
    bool descent_ok = false;             // f(s) - <s,u*> <= f(u) - <u,u*> + tol
    std::optional<bool> subgradient_ok;  // global inequality on the grid, claimed-convex f only
    double fenchel_gap = 0.0;            // f(u) + f*(u*) - <u,u*>
    EkelandResult ekeland;
};

inline constexpr double kBRTol = 1e-6;

/// (s, s*) ∈ gra ∂f with ‖s-u‖ <= α and ‖s*-u*‖ <= β from an ε-subgradient
/// pair with ε = f(u) + f*(u*) - <u,u*> <= αβ.
inline BRResult br_project(const ScalarFunc& f, SubdiffEngine engine, const Vec& u, const DualVec& ustar, double alpha,
                           double beta, const Box& box, std::size_t grid_n = 2001) {
    require_dim(u.size(), f.dim(), "br_project");
    require_dim(ustar.size(), f.dim(), "br_project");
    detail::check_engine(engine, f);
    const NormedSpace E = NormedSpace::euclidean(f.dim());
    const Box eff = effective_box(f, box);
    BRResult out;

    const ConjugateResult conj = fenchel_conjugate(f, ustar, eff, grid_n);
    if (conj.unbounded) throw PreconditionError("br_project: f*(u*) is +inf");
    const double fu = f.value(u);
    out.fenchel_gap = fu + conj.value.value() - pairing(u, ustar);
    if (!(out.fenchel_gap <= alpha * beta + kBRTol)) {
        std::ostringstream os;
        os << "br_project: Fenchel gap " << out.fenchel_gap << " exceeds alpha*beta = " << alpha * beta;
        throw PreconditionError(os.str());
    }

    const Objective g = [&](const Vec& x) {
        const double v = f.value(x);
        return v == kInf ? kInf : v - pairing(x, ustar);
    };
    EkelandOptions eo;
    eo.grid_n = grid_n;
    eo.inf_g = -conj.value.value();
    eo.precondition_slack = kBRTol;
    out.ekeland = ekeland_point(g, E, u, alpha, beta, eff, eo);
    Vec s = out.ekeland.s;
    DualVec ss = nearest_subgradient(engine, f, s, ustar);
    double dd = dual_norm(E, ss - ustar);

    if (dd > beta + kBRTol && f.dim() == 1) {
        // s may sit a few ulps beside the kink whose fan reaches the β-ball
        const Interval I = subdiff_interval(engine, f, s[0]);
        const double target = I.hi < ustar[0] - beta ? ustar[0] - beta : ustar[0] + beta;
        if (const auto c = snap_to_kink(f, s[0], target, 1e-6 * (1.0 + std::abs(s[0])))) {
            const Vec cs{*c};
            const DualVec cz = nearest_subgradient(engine, f, cs, ustar);
            const double cd = dual_norm(E, cz - ustar);
            if (cd < dd && norm(E, cs - u) <= alpha + kBRTol && g(cs) <= g(u) + kBRTol) {
                s = cs;
                ss = cz;
                dd = cd;
            }
        }
    }
    if (dd > beta + kBRTol) {
        std::ostringstream os;
        os << "br_project: nearest subgradient at s = " << s[0] << " is " << dd << " from u* (beta = " << beta
           << "); engine or grid too coarse";
        throw SearchError(os.str());
    }
    out.s = s;
    out.sstar = ss;
    out.dist_primal = norm(E, s - u);
    out.dist_dual = dd;
    out.descent_ok = g(s) <= g(u) + kBRTol;
    if (f.claimed_convex || engine == SubdiffEngine::convex1d) {
        out.subgradient_ok = subgradient_inequality(f, s, ss, eff, grid_n);
    }
    return out;
}

struct JProjection {
    Vec t;
    DualVec tstar;
    double dist_primal = 0.0, dist_dual = 0.0;
};

/// (t, t*) ∈ gra J with ‖t-u‖ <= √ε and ‖t*-u*‖ <= √ε when
/// j(u) + j*(u*) <= <u,u*> + ε. Hilbert norms use the closed form
/// t = (u + W⁻¹u*)/2, t* = Wt; others run the Ekeland step on j - u*.
inline JProjection br_project_convex_j(const NormedSpace& E, const Vec& u, const DualVec& ustar, double eps,
                                       std::size_t grid_n = 401) {
    require_dim(u.size(), E.dim(), "br_project_convex_j");
    require_dim(ustar.size(), E.dim(), "br_project_convex_j");
    if (!(eps >= 0.0)) throw PreconditionError("br_project_convex_j: eps must be >= 0");
    const double scale = 1.0 + norm_squared(E, u) + dual_norm_squared(E, ustar);
    const double gap = j(E, u) + j_star(E, ustar) - pairing(u, ustar);
    if (gap > eps + 1e-12 * scale) {
        std::ostringstream os;
        os << "br_project_convex_j: j(u) + j*(u*) - <u,u*> = " << gap << " exceeds eps = " << eps;
        throw PreconditionError(os.str());
    }
    JProjection out;
    if (E.is_hilbert()) {
        out.t = 0.5 * (u + riesz_inverse(E, ustar));
        out.tstar = riesz(E, out.t);
    } else {
        const double r = std::sqrt(eps);
        if (r == 0.0) {
            out.t = u;
        } else {
            const Objective g = [&](const Vec& t) { return j(E, t) - pairing(t, ustar); };
            Box box{u.raw(), u.raw()};
            for (std::size_t i = 0; i < u.size(); ++i) {
                box.lo[i] -= r;
                box.hi[i] += r;
            }
            EkelandOptions eo;
            eo.grid_n = grid_n;
            eo.inf_g = -j_star(E, ustar);
            eo.precondition_slack = 1e-12 * scale;
            out.t = ekeland_point(g, E, u, r, r, box, eo).s;
        }
        out.tstar = duality_map(E, out.t).nearest(ustar);
    }
    out.dist_primal = norm(E, out.t - u);
    out.dist_dual = dual_norm(E, out.tstar - ustar);
    const double bound = std::sqrt(eps) + kBRTol;
    if (out.dist_primal > bound || out.dist_dual > bound) {
        std::ostringstream os;
        os << "br_project_convex_j: distances (" << out.dist_primal << ", " << out.dist_dual << ") exceed sqrt(eps)";
        throw SearchError(os.str());
    }
    return out;
}

} // namespace rllab

#endif
