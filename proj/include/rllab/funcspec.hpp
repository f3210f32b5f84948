#ifndef RLLAB_FUNCSPEC_HPP
#define RLLAB_FUNCSPEC_HPP

#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "rllab/error.hpp"
#include "rllab/expr.hpp"
#include "rllab/geometry.hpp"
#include "rllab/minimize.hpp"

namespace rllab {

/// Element of ]-inf, +inf]. +inf dominates addition.
class ExtReal {
public:
    constexpr ExtReal(double v = 0.0) : v_(v) {}
    static constexpr ExtReal infinity() { return ExtReal(kInf); }

    bool is_finite() const { return std::isfinite(v_); }
    bool is_infinite() const { return v_ == kInf; }
    double value() const { return v_; }

    friend ExtReal operator+(ExtReal a, ExtReal b) {
        if (a.is_infinite() || b.is_infinite()) return infinity();
        return ExtReal(a.v_ + b.v_);
    }
    friend auto operator<=>(const ExtReal&, const ExtReal&) = default;

private:
    double v_;
};

/// f: R^n -> ]-inf, +inf] given by an expression, +inf outside domain_box.
class ScalarFunc {
public:
    ScalarFunc(expr::NodePtr ast, std::size_t dim, std::string text = {})
        : ast_(std::move(ast)), dim_(dim), text_(std::move(text)) {
        if (dim_ == 0) throw Error("ScalarFunc: dim must be >= 1");
        if (static_cast<std::size_t>(expr::arity(*ast_)) > dim_) {
            throw DimensionError("ScalarFunc: expression uses x" + std::to_string(expr::arity(*ast_)) +
                                 " but dim is " + std::to_string(dim_));
        }
        if (text_.empty()) text_ = expr::print(*ast_);
    }

    const expr::Node& ast() const { return *ast_; }
    const expr::NodePtr& ast_ptr() const { return ast_; }
    std::size_t dim() const { return dim_; }
    const std::string& text() const { return text_; }

    bool claimed_convex = false;
    bool claimed_lsc = true;
    std::optional<Box> domain_box;

    ScalarFunc& convex(bool c = true) {
        claimed_convex = c;
        return *this;
    }
    ScalarFunc& restrict_to(Box b) {
        require_dim(b.dim(), dim_, "ScalarFunc domain");
        b.validate();
        domain_box = std::move(b);
        return *this;
    }

    bool in_domain(const Vec& x) const { return !domain_box || domain_box->contains(x.span()); }

    /// Raw value as double (+inf outside the domain). Throws on NaN or -inf.
    double value(const Vec& x) const {
        require_dim(x.size(), dim_, "eval");
        if (!in_domain(x)) return kInf;
        const double v = expr::evaluate(*ast_, x.span());
        if (std::isnan(v)) throw EvalError("evaluation of '" + text_ + "' produced NaN");
        if (v == -kInf) throw EvalError("evaluation of '" + text_ + "' produced -inf");
        return v;
    }

    ExtReal eval(const Vec& x) const { return ExtReal(value(x)); }

    /// One-sided directional derivative f'(x; d).
    double directional(const Vec& x, const Vec& d) const {
        require_dim(x.size(), dim_, "directional");
        return expr::directional(*ast_, x.span(), d.span()).d;
    }

    Objective objective() const {
        return [f = *this](const Vec& x) { return f.value(x); };
    }

private:
    expr::NodePtr ast_;
    std::size_t dim_;
    std::string text_;
};

/// Parses function text; dim defaults to the highest variable used (at least 1).
inline ScalarFunc parse_func(std::string_view text, std::size_t dim = 0) {
    auto ast = expr::parse(text);
    if (dim == 0) dim = std::max(1, expr::arity(*ast));
    return ScalarFunc(std::move(ast), dim, std::string(text));
}

inline ExtReal eval(const ScalarFunc& f, const Vec& x) { return f.eval(x); }

inline Box effective_box(const ScalarFunc& f, const Box& box) {
    require_dim(box.dim(), f.dim(), "search box");
    if (!f.domain_box) return box;
    Box b = box;
    for (std::size_t i = 0; i < b.dim(); ++i) {
        b.lo[i] = std::max(b.lo[i], f.domain_box->lo[i]);
        b.hi[i] = std::min(b.hi[i], f.domain_box->hi[i]);
        if (b.lo[i] > b.hi[i]) throw SearchError("search box misses the domain");
    }
    return b;
}

/// Grid-refined minimum of f over box.
inline MinResult minimize(const ScalarFunc& f, const Box& box, std::size_t grid_n = 2001, int refine_iters = 80) {
    MinimizeOptions opt;
    opt.grid_n = grid_n;
    opt.refine_iters = refine_iters;
    return minimize_objective(f.objective(), effective_box(f, box), opt);
}

// ---------------------------------------------------------------------------
// Fenchel conjugate

struct ConjugateResult {
    ExtReal value;    // lower bound on f*(x*); +inf when unbounded above
    Vec argmax;       // maximiser of <x, x*> - f(x) in the final box
    Box final_box;
    bool unbounded = false;
};

/// f*(x*) = sup_x <x, x*> - f(x). While the maximiser sits on the search-box
/// boundary the box grows tenfold, until successive sups differ by < 1e-8;
/// a value beyond 1e12 is reported as unbounded.
inline ConjugateResult fenchel_conjugate(const ScalarFunc& f, const DualVec& xs, const Box& search_box,
                                         std::size_t grid_n = 2001) {
    require_dim(xs.size(), f.dim(), "fenchel_conjugate");
    constexpr double kUnbounded = 1e12;
    Box box = search_box;
    double prev = -kInf;
    ConjugateResult last{ExtReal(-kInf), {}, box, false};
    for (int round = 0; round < 40; ++round) {
        const Box eff = effective_box(f, box);
        const Grid grid(eff, grid_n);
        Objective neg = [&](const Vec& x) {
            const double v = f.value(x);
            return v == kInf ? kInf : v - pairing(x, xs);
        };
        MinimizeOptions opt;
        opt.grid_n = grid_n;
        MinResult r = minimize_objective(neg, eff, opt);
        const double sup = -r.value;
        if (sup > kUnbounded) return {ExtReal::infinity(), r.x, eff, true};
        if (sup - prev < 1e-8 * std::max(1.0, std::abs(sup))) return last;
        last = {ExtReal(sup), r.x, eff, false};
        prev = sup;
        bool on_open_edge = false;
        for (std::size_t i = 0; i < eff.dim(); ++i) {
            const double tol = grid.spacing(i);
            const bool lo_free = !f.domain_box || eff.lo[i] > f.domain_box->lo[i];
            const bool hi_free = !f.domain_box || eff.hi[i] < f.domain_box->hi[i];
            if ((lo_free && r.x[i] <= eff.lo[i] + tol) || (hi_free && r.x[i] >= eff.hi[i] - tol)) on_open_edge = true;
        }
        if (!on_open_edge) return last;
        box = box.scaled(10.0);
    }
    return {ExtReal::infinity(), {}, box, true};
}

// ---------------------------------------------------------------------------
// Insignificant downside

/// f(x) >= -a0‖x‖² - b0‖x‖ - c0 with a0 < ½, checked on a grid.
struct DownsideCertificate {
    double a0 = 0.0, b0 = 0.0, c0 = 0.0;
    Box validity_box;
    double worst_violation = kInf; // max over the grid of (bound - f); <= 0 means valid
    bool valid() const { return a0 < 0.5 && worst_violation <= 0.0; }
};

inline DownsideCertificate verify_downside(const ScalarFunc& f, DownsideCertificate cert, const Box& box,
                                           std::size_t grid_n, const NormedSpace& E) {
    if (!(cert.a0 < 0.5)) throw PreconditionError("downside certificate needs a0 < 1/2");
    require_dim(E.dim(), f.dim(), "verify_downside");
    const Grid grid(box, grid_n);
    std::vector<double> viol(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const Vec x = grid.point(i);
        const double fx = f.value(x);
        if (fx == kInf) {
            viol[i] = -kInf;
            return;
        }
        const double nx = norm(E, x);
        viol[i] = -cert.a0 * nx * nx - cert.b0 * nx - cert.c0 - fx;
    });
    cert.worst_violation = *std::max_element(viol.begin(), viol.end());
    cert.validity_box = box;
    return cert;
}

inline DownsideCertificate verify_downside(const ScalarFunc& f, DownsideCertificate cert, const Box& box,
                                           std::size_t grid_n = 2001) {
    return verify_downside(f, std::move(cert), box, grid_n, NormedSpace::euclidean(f.dim()));
}

/// Norm bound M = b/2a + sqrt(b² + 4a(c + m + 1))/2a + ‖y‖ + 2 with
/// a = ½ - a0, b = ‖y‖ + ‖y*‖ + b0, c = c0 - j(y), m = inf(f + j(·-y) - y*).
inline double theorem3_bound(const NormedSpace& E, const DownsideCertificate& cert, const Vec& y,
                             const DualVec& ystar, double m) {
    const double a = 0.5 - cert.a0;
    if (!(a > 0.0)) throw PreconditionError("theorem3_bound: a0 must be < 1/2");
    const double ny = norm(E, y);
    const double b = ny + dual_norm(E, ystar) + cert.b0;
    const double c = cert.c0 - j(E, y);
    const double disc = b * b + 4.0 * a * (c + m + 1.0);
    if (disc < 0.0) throw PreconditionError("theorem3_bound: negative discriminant (m is not an infimum)");
    return b / (2.0 * a) + std::sqrt(disc) / (2.0 * a) + ny + 2.0;
}

// ---------------------------------------------------------------------------
// Convexity audit

struct ConvexityAudit {
    bool passed = true;
    double worst_excess = -kInf; // max of f(mid) - (f(a)+f(b))/2
    Vec a, b;
};

/// Random midpoint test of a claimed-convex flag.
inline ConvexityAudit audit_convexity(const ScalarFunc& f, const Box& box, std::size_t samples = 1000,
                                      std::uint64_t seed = 0, double tol = 1e-9) {
    std::mt19937_64 rng(seed);
    ConvexityAudit out;
    const Box eff = effective_box(f, box);
    std::vector<std::uniform_real_distribution<double>> dist;
    for (std::size_t i = 0; i < eff.dim(); ++i) dist.emplace_back(eff.lo[i], eff.hi[i]);
    for (std::size_t k = 0; k < samples; ++k) {
        Vec a(eff.dim()), b(eff.dim());
        for (std::size_t i = 0; i < eff.dim(); ++i) {
            a[i] = dist[i](rng);
            b[i] = dist[i](rng);
        }
        const Vec mid = 0.5 * (a + b);
        const double fa = f.value(a), fb = f.value(b), fm = f.value(mid);
        const double excess = fm - 0.5 * (fa + fb);
        const double scale = std::max({1.0, std::abs(fa), std::abs(fb)});
        if (excess > out.worst_excess) {
            out.worst_excess = excess;
            out.a = a;
            out.b = b;
        }
        if (excess > tol * scale) out.passed = false;
    }
    return out;
}

} // namespace rllab

#endif
