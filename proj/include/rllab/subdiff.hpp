#ifndef RLLAB_SUBDIFF_HPP
#define RLLAB_SUBDIFF_HPP

// Subdifferential engines. One-sided derivatives come from exact forward-mode
// directional derivatives of the expression tree; abs and max use their
// one-sided rules, so kinks are resolved without difference quotients.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rllab/error.hpp"
#include "rllab/funcspec.hpp"
#include "rllab/operators.hpp"

namespace rllab {

enum class SubdiffEngine { convex1d, smooth, polynomial, piecewise };

inline std::string to_string(SubdiffEngine e) {
    switch (e) {
    case SubdiffEngine::convex1d: return "convex1d";
    case SubdiffEngine::smooth: return "smooth";
    case SubdiffEngine::polynomial: return "polynomial";
    case SubdiffEngine::piecewise: return "piecewise";
    }
    return "?";
}

inline SubdiffEngine parse_engine(std::string_view s) {
    if (s == "convex1d") return SubdiffEngine::convex1d;
    if (s == "smooth") return SubdiffEngine::smooth;
    if (s == "polynomial") return SubdiffEngine::polynomial;
    if (s == "piecewise") return SubdiffEngine::piecewise;
    throw Error("unknown engine '" + std::string(s) + "'");
}

inline constexpr double kKinkGap = 1e-5;

struct OneSided {
    double left;  // f'_-(x)
    double right; // f'_+(x)
    bool kink() const { return std::abs(right - left) > kKinkGap; }
};

inline OneSided one_sided(const ScalarFunc& f, double x) {
    const Vec p{x};
    return {-f.directional(p, Vec{-1.0}), f.directional(p, Vec{1.0})};
}

/// Independent numeric estimate of f'_+(x) (side = +1) or f'_-(x) (side = -1):
/// one-sided differences on the step ladder 1e-2 ... 1e-6, Richardson-extrapolated.
inline double richardson_one_sided(const ScalarFunc& f, double x, int side) {
    constexpr int L = 5;
    const double fx = f.value(Vec{x});
    double T[L][L] = {};
    double best = 0.0, best_err = kInf;
    for (int i = 0; i < L; ++i) {
        const double h = side * std::pow(10.0, -2 - i);
        T[i][0] = (f.value(Vec{x + h}) - fx) / h;
        double p = 1.0;
        for (int k = 1; k <= i; ++k) {
            p *= 10.0;
            T[i][k] = T[i][k - 1] + (T[i][k - 1] - T[i - 1][k - 1]) / (p - 1.0);
        }
        if (i > 0) {
            const double err = std::abs(T[i][i] - T[i - 1][i - 1]);
            if (err < best_err) {
                best_err = err;
                best = T[i][i];
            }
        }
    }
    return best;
}

namespace detail {

inline Box audit_box(const ScalarFunc& f) { return f.domain_box ? *f.domain_box : Box::cube(f.dim(), -10, 10); }

inline void check_engine(SubdiffEngine e, const ScalarFunc& f) {
    const std::string tag = "engine " + to_string(e) + " vs '" + f.text() + "': ";
    switch (e) {
    case SubdiffEngine::smooth:
        if (!expr::is_smooth(f.ast())) throw PreconditionError(tag + "abs/max make the function nonsmooth");
        return;
    case SubdiffEngine::polynomial:
        if (!expr::is_polynomial(f.ast())) throw PreconditionError(tag + "not a polynomial");
        return;
    case SubdiffEngine::convex1d:
        if (f.dim() != 1) throw PreconditionError(tag + "convex1d is one-dimensional");
        if (!f.claimed_convex && !audit_convexity(f, audit_box(f)).passed) {
            throw PreconditionError(tag + "midpoint convexity audit failed");
        }
        return;
    case SubdiffEngine::piecewise:
        if (f.dim() != 1) throw PreconditionError(tag + "piecewise is one-dimensional");
        return;
    }
}

inline std::vector<DualVec> subdiff_unchecked(SubdiffEngine e, const ScalarFunc& f, const Vec& x, int k) {
    if (!f.in_domain(x)) throw PreconditionError("subdiff_at: x outside the domain of '" + f.text() + "'");
    if (e == SubdiffEngine::smooth || e == SubdiffEngine::polynomial) {
        DualVec g(f.dim());
        for (std::size_t i = 0; i < f.dim(); ++i) {
            Vec d(f.dim(), 0.0);
            d[i] = 1.0;
            g[i] = f.directional(x, d);
        }
        return {g};
    }
    const OneSided d = one_sided(f, x[0]);
    if (!d.kink()) return {DualVec{0.5 * (d.left + d.right)}};
    const double lo = std::min(d.left, d.right), hi = std::max(d.left, d.right);
    std::vector<DualVec> out;
    for (int i = 0; i <= k + 1; ++i) {
        out.push_back(DualVec{i == k + 1 ? hi : lo + (hi - lo) * i / static_cast<double>(k + 1)});
    }
    return out;
}

// Kink candidates of a 1-D expression: zeros of abs arguments and ties inside max.
inline void collect_switches(const expr::Node& n, std::vector<const expr::Node*>& abs_args,
                             std::vector<std::pair<const expr::Node*, const expr::Node*>>& ties) {
    if (n.op == expr::Op::abs) abs_args.push_back(n.args[0].get());
    if (n.op == expr::Op::max) {
        for (std::size_t i = 0; i < n.args.size(); ++i) {
            for (std::size_t j = i + 1; j < n.args.size(); ++j) ties.emplace_back(n.args[i].get(), n.args[j].get());
        }
    }
    for (const auto& a : n.args) collect_switches(*a, abs_args, ties);
}

} // namespace detail

/// Finite representative set of ∂f(x); at a 1-D kink, the endpoints of
/// [f'_-, f'_+] plus k interior points.
inline std::vector<DualVec> subdiff_at(SubdiffEngine e, const ScalarFunc& f, const Vec& x, int k = 5) {
    require_dim(x.size(), f.dim(), "subdiff_at");
    detail::check_engine(e, f);
    return detail::subdiff_unchecked(e, f, x, k);
}

struct Interval {
    double lo, hi;
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    double clamp(double v) const { return std::clamp(v, lo, hi); }
};

/// 1-D: the closed interval spanned by the engine's subgradients at x.
inline Interval subdiff_interval(SubdiffEngine e, const ScalarFunc& f, double x) {
    if (f.dim() != 1) throw DimensionError("subdiff_interval is one-dimensional");
    const auto s = detail::subdiff_unchecked(e, f, Vec{x}, 0);
    return {s.front()[0], s.back()[0]};
}

/// Member of ∂f(x) nearest to target.
inline DualVec nearest_subgradient(SubdiffEngine e, const ScalarFunc& f, const Vec& x, const DualVec& target) {
    require_dim(target.size(), f.dim(), "nearest_subgradient");
    if (f.dim() == 1) return DualVec{subdiff_interval(e, f, x[0]).clamp(target[0])};
    return detail::subdiff_unchecked(e, f, x, 0).front();
}

/// Bisection on [lo, hi] for c with f'_-(c) <= target <= f'_+(c), assuming a
/// nondecreasing derivative (convex f). Empty when target is not bracketed.
inline std::optional<double> locate_kink(const ScalarFunc& f, double lo, double hi, double target) {
    if (f.dim() != 1) throw DimensionError("locate_kink is one-dimensional");
    auto inside = [&](double c) {
        const OneSided d = one_sided(f, c);
        return d.left <= target && target <= d.right;
    };
    if (inside(lo)) return lo;
    if (inside(hi)) return hi;
    if (one_sided(f, lo).right > target || one_sided(f, hi).left < target) return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const OneSided d = one_sided(f, mid);
        if (d.left <= target && target <= d.right) return mid;
        if (d.right < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the jump sits between two adjacent doubles
    return one_sided(f, hi).left <= target ? hi : lo;
}

/// A point within `radius` of x whose subdifferential contains target, when
/// x itself sits a few ulps beside the kink that does.
inline std::optional<double> snap_to_kink(const ScalarFunc& f, double x, double target, double radius) {
    const auto c = locate_kink(f, x - radius, x + radius, target);
    if (!c || !f.in_domain(Vec{*c})) return std::nullopt;
    return c;
}

/// Points of box where the 1-D engine sees a kink, found from the abs/max
/// switching sets of the expression.
inline std::vector<double> find_kinks(const ScalarFunc& f, const Box& box, std::size_t scan = 4001) {
    if (f.dim() != 1) return {};
    std::vector<const expr::Node*> abs_args;
    std::vector<std::pair<const expr::Node*, const expr::Node*>> ties;
    detail::collect_switches(f.ast(), abs_args, ties);
    std::vector<std::function<double(double)>> switches;
    for (const auto* a : abs_args) {
        switches.push_back([a](double x) { return expr::evaluate(*a, std::span<const double>(&x, 1)); });
    }
    for (const auto& [a, b] : ties) {
        switches.push_back([a, b](double x) {
            const std::span<const double> p(&x, 1);
            return expr::evaluate(*a, p) - expr::evaluate(*b, p);
        });
    }
    const Box eff = effective_box(f, box);
    const Grid grid(eff, scan);
    std::vector<double> out;
    for (const auto& sw : switches) {
        double xa = grid.coord(0, 0), va = sw(xa);
        if (va == 0.0) out.push_back(xa);
        for (std::size_t i = 1; i < grid.per_axis(); ++i) {
            const double xb = grid.coord(0, i), vb = sw(xb);
            if (vb == 0.0) {
                out.push_back(xb);
            } else if (va != 0.0 && (va < 0) != (vb < 0)) {
                double lo = xa, hi = xb, vlo = va;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    const double vm = sw(mid);
                    if (vm == 0.0) {
                        lo = hi = mid;
                        break;
                    }
                    if ((vm < 0) == (vlo < 0)) {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                }
                // pick the endpoint the engine actually reports as a kink
                const double c = one_sided(f, lo).kink() ? lo : hi;
                out.push_back(c);
            }
            xa = xb;
            va = vb;
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::erase_if(out, [&](double c) { return !one_sided(f, c).kink(); });
    return out;
}

/// ∂f as an analytic operator graph on box.
inline OperatorGraph subdiff_operator(SubdiffEngine e, const ScalarFunc& f, const Box& box) {
    detail::check_engine(e, f);
    const Box eff = effective_box(f, box);
    std::vector<Vec> hints;
    if (e == SubdiffEngine::convex1d || e == SubdiffEngine::piecewise) {
        for (double c : find_kinks(f, eff)) hints.push_back(Vec{c});
    }
    return analytic_graph(NormedSpace::euclidean(f.dim()), eff,
                          [e, f](const Vec& x, int k) { return detail::subdiff_unchecked(e, f, x, k); },
                          "subdiff(" + f.text() + ")", std::move(hints));
}

/// Sampled graph of ∂f: domain grid and seeded points, plus the full fan at
/// every kink located in the box.
inline OperatorGraph subdiff_graph(SubdiffEngine e, const ScalarFunc& f, const Box& box, std::size_t budget,
                                   std::uint64_t seed = 0, int density_k = 5) {
    const OperatorGraph op = subdiff_operator(e, f, box);
    OperatorGraph sample = graph_sample(op, budget, seed, density_k);
    std::vector<DualPair> pairs = sample.pairs();
    for (double c : find_kinks(f, op.domain())) {
        for (auto& z : detail::subdiff_unchecked(e, f, Vec{c}, density_k)) pairs.push_back({Vec{c}, std::move(z)});
    }
    return sampled_graph(op.space(), std::move(pairs), op.name());
}

/// Global subgradient inequality f(y) >= f(x) + <y - x, x*> - tol on a grid.
inline bool subgradient_inequality(const ScalarFunc& f, const Vec& x, const DualVec& xs, const Box& box,
                                   std::size_t grid_n = 2001, double tol = 1e-8) {
    const double fx = f.value(x);
    const Grid grid(effective_box(f, box), grid_n);
    std::vector<char> ok(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const Vec y = grid.point(i);
        ok[i] = f.value(y) >= fx + pairing(y - x, xs) - tol;
    });
    return std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
}

// ---------------------------------------------------------------------------
// Weak-subdifferential axioms

struct WeakAxiomViolation {
    std::string axiom; // "i" or "ii"
    std::string f, h;
    Vec x;
    double excess; // distance beyond tolerance
};

struct WeakAxiomReport {
    std::size_t checks_i = 0, checks_ii = 0;
    std::vector<WeakAxiomViolation> violations;
    bool passed() const { return violations.empty(); }
};

namespace detail {

inline double dist_to_hull(const std::vector<DualVec>& set, const DualVec& z) {
    if (z.size() == 1) {
        double lo = kInf, hi = -kInf;
        for (const auto& s : set) {
            lo = std::min(lo, s[0]);
            hi = std::max(hi, s[0]);
        }
        return std::max({0.0, lo - z[0], z[0] - hi});
    }
    double d = kInf;
    for (const auto& s : set) d = std::min(d, norm(NormedSpace::euclidean(z.size()), Vec((s - z).raw())));
    return d;
}

} // namespace detail

/// Axiom (i): 0 ∈ ∂f(x) at grid-detected strict global minimisers of f and f + h.
/// Axiom (ii): ∂(f+h)(x) ⊆ ∂f(x) + ∂h(x) at grid points, slack 1e-6.
/// h must be convex and continuous; ∂h comes from the convex1d engine in 1-D
/// and from the smooth engine otherwise.
inline WeakAxiomReport weak_axiom_test(SubdiffEngine e, const std::vector<ScalarFunc>& f_corpus,
                                       const std::vector<ScalarFunc>& h_corpus, const Box& box, std::size_t grid_n = 201,
                                       double slack = 1e-6) {
    for (const auto& h : h_corpus) {
        if (!audit_convexity(h, box).passed) throw PreconditionError("weak_axiom_test: h = '" + h.text() + "' is not convex");
    }
    WeakAxiomReport rep;
    auto h_engine = [](const ScalarFunc& h) { return h.dim() == 1 ? SubdiffEngine::convex1d : SubdiffEngine::smooth; };

    auto check_i = [&](const ScalarFunc& g, const std::string& fname, const std::string& hname) {
        const MinResult m = minimize(g, box, grid_n);
        // strict: every probe around the minimiser is strictly larger
        const double r = 1e-3 * (1.0 + norm(NormedSpace::euclidean(g.dim()), m.x));
        for (std::size_t a = 0; a < g.dim(); ++a) {
            for (double sgn : {-1.0, 1.0}) {
                Vec y = m.x;
                y[a] += sgn * r;
                if (!(g.value(y) > m.value)) return;
            }
        }
        ++rep.checks_i;
        Vec x = m.x;
        const DualVec zero(g.dim(), 0.0);
        double d = detail::dist_to_hull(detail::subdiff_unchecked(e, g, x, 5), zero);
        if (d > slack && g.dim() == 1) {
            if (const auto c = snap_to_kink(g, x[0], 0.0, 1e-6 * (1.0 + std::abs(x[0])))) {
                if (g.value(Vec{*c}) <= m.value + 1e-12 * (1.0 + std::abs(m.value))) {
                    x = Vec{*c};
                    d = detail::dist_to_hull(detail::subdiff_unchecked(e, g, x, 5), zero);
                }
            }
        }
        if (d > slack) rep.violations.push_back({"i", fname, hname, x, d});
    };

    for (const auto& f : f_corpus) {
        detail::check_engine(e, f);
        check_i(f, f.text(), "");
        for (const auto& h : h_corpus) {
            require_dim(h.dim(), f.dim(), "weak_axiom_test");
            ScalarFunc fh(expr::make(expr::Op::add, {f.ast_ptr(), h.ast_ptr()}), f.dim());
            fh.domain_box = f.domain_box;
            fh.claimed_convex = f.claimed_convex && h.claimed_convex;
            const SubdiffEngine sum_engine =
                e == SubdiffEngine::convex1d && !fh.claimed_convex ? SubdiffEngine::piecewise : e;
            const SubdiffEngine he = h_engine(h);
            check_i(fh, f.text(), h.text());
            const Grid grid(effective_box(f, box), grid_n);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const Vec x = grid.point(i);
                const auto lhs = detail::subdiff_unchecked(sum_engine, fh, x, 5);
                const auto sf = detail::subdiff_unchecked(e, f, x, 5);
                const auto sh = detail::subdiff_unchecked(he, h, x, 5);
                std::vector<DualVec> sum;
                for (const auto& a : sf) {
                    for (const auto& b : sh) sum.push_back(a + b);
                }
                ++rep.checks_ii;
                double worst = 0.0;
                for (const auto& z : lhs) worst = std::max(worst, detail::dist_to_hull(sum, z));
                if (worst > slack) rep.violations.push_back({"ii", f.text(), h.text(), x, worst});
            }
        }
    }
    return rep;
}

} // namespace rllab

#endif
