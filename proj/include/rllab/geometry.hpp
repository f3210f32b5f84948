#ifndef RLLAB_GEOMETRY_HPP
#define RLLAB_GEOMETRY_HPP

// Primal/dual geometry of a finite-dimensional normed space: norms, the
// pairing, j = ½‖·‖², its conjugate, the duality map J = ∂j and the
// r_L functional r_L(x, x*) = j(x) + j*(x*) + <x, x*>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rllab/error.hpp"

namespace rllab {

struct PrimalTag {};
struct DualTag {};

/// Coordinate vector living in E (PrimalTag) or E* (DualTag).
template <class Tag>
class Coords {
public:
    Coords() = default;
    explicit Coords(std::size_t n, double fill = 0.0) : c_(n, fill) {}
    Coords(std::initializer_list<double> xs) : c_(xs) {}
    explicit Coords(std::vector<double> xs) : c_(std::move(xs)) {}

    std::size_t size() const { return c_.size(); }
    double operator[](std::size_t i) const { return c_[i]; }
    double& operator[](std::size_t i) { return c_[i]; }
    std::span<const double> span() const { return c_; }
    const std::vector<double>& raw() const { return c_; }
    std::vector<double>& raw() { return c_; }

    bool all_finite() const {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
    }

    Coords& operator+=(const Coords& o) {
        require_dim(o.size(), size(), "vector +=");
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    Coords& operator-=(const Coords& o) {
        require_dim(o.size(), size(), "vector -=");
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Coords& operator*=(double a) {
        for (double& v : c_) v *= a;
        return *this;
    }

    friend Coords operator+(Coords a, const Coords& b) { return a += b; }
    friend Coords operator-(Coords a, const Coords& b) { return a -= b; }
    friend Coords operator*(double a, Coords b) { return b *= a; }
    friend Coords operator-(Coords a) { return a *= -1.0; }
    friend bool operator==(const Coords&, const Coords&) = default;

    /// Lexicographic order on coordinates; used for deterministic tie-breaks.
    friend bool lex_less(const Coords& a, const Coords& b) {
        return std::lexicographical_compare(a.c_.begin(), a.c_.end(), b.c_.begin(), b.c_.end());
    }

private:
    std::vector<double> c_;
};

using Vec = Coords<PrimalTag>;
using DualVec = Coords<DualTag>;

struct DualPair {
    Vec x;
    DualVec xstar;
    friend bool operator==(const DualPair&, const DualPair&) = default;
};

enum class NormKind { p1, p2, pinf, weighted2 };

inline const char* to_string(NormKind k) {
    switch (k) {
    case NormKind::p1: return "p1";
    case NormKind::p2: return "p2";
    case NormKind::pinf: return "pinf";
    case NormKind::weighted2: return "w2";
    }
    return "?";
}

class NormedSpace {
public:
    NormedSpace(std::size_t dim, NormKind kind, std::vector<double> weights = {})
        : dim_(dim), kind_(kind), weights_(std::move(weights)) {
        if (dim_ == 0) throw Error("NormedSpace: dim must be >= 1");
        if (kind_ == NormKind::weighted2) {
            require_dim(weights_.size(), dim_, "NormedSpace weights");
            for (double w : weights_) {
                if (!(w > 0.0) || !std::isfinite(w)) {
                    throw Error("NormedSpace: weights must be positive and finite");
                }
            }
        } else if (!weights_.empty()) {
            throw Error("NormedSpace: weights only apply to weighted2");
        }
    }

    static NormedSpace euclidean(std::size_t n) { return {n, NormKind::p2}; }
    static NormedSpace real_line() { return {1, NormKind::p2}; }

    std::size_t dim() const { return dim_; }
    NormKind kind() const { return kind_; }
    const std::vector<double>& weights() const { return weights_; }
    bool is_hilbert() const { return kind_ == NormKind::p2 || kind_ == NormKind::weighted2; }
    double weight(std::size_t i) const { return kind_ == NormKind::weighted2 ? weights_[i] : 1.0; }

    friend bool operator==(const NormedSpace&, const NormedSpace&) = default;

private:
    std::size_t dim_;
    NormKind kind_;
    std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Norms and pairing

inline double pairing(const Vec& x, const DualVec& xs) {
    require_dim(xs.size(), x.size(), "pairing");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * xs[i];
    return s;
}

/// ‖x‖². For the Hilbert norms this avoids a sqrt so that identities such as
/// r_L(x, -x) = 0 hold bit-exactly.
inline double norm_squared(const NormedSpace& E, const Vec& x) {
    require_dim(x.size(), E.dim(), "norm");
    switch (E.kind()) {
    case NormKind::p2:
    case NormKind::weighted2: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += E.weight(i) * x[i] * x[i];
        return s;
    }
    case NormKind::p1: {
        double s = 0.0;
        for (double v : x.raw()) s += std::abs(v);
        return s * s;
    }
    case NormKind::pinf: {
        double m = 0.0;
        for (double v : x.raw()) m = std::max(m, std::abs(v));
        return m * m;
    }
    }
    return 0.0;
}

inline double dual_norm_squared(const NormedSpace& E, const DualVec& xs) {
    require_dim(xs.size(), E.dim(), "dual_norm");
    switch (E.kind()) {
    case NormKind::p2:
    case NormKind::weighted2: {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) s += xs[i] * xs[i] / E.weight(i);
        return s;
    }
    case NormKind::p1: { // dual is pinf
        double m = 0.0;
        for (double v : xs.raw()) m = std::max(m, std::abs(v));
        return m * m;
    }
    case NormKind::pinf: { // dual is p1
        double s = 0.0;
        for (double v : xs.raw()) s += std::abs(v);
        return s * s;
    }
    }
    return 0.0;
}

inline double norm(const NormedSpace& E, const Vec& x) {
    require_dim(x.size(), E.dim(), "norm");
    switch (E.kind()) {
    case NormKind::p1: {
        double s = 0.0;
        for (double v : x.raw()) s += std::abs(v);
        return s;
    }
    case NormKind::pinf: {
        double m = 0.0;
        for (double v : x.raw()) m = std::max(m, std::abs(v));
        return m;
    }
    default: return std::sqrt(norm_squared(E, x));
    }
}

inline double dual_norm(const NormedSpace& E, const DualVec& xs) {
    require_dim(xs.size(), E.dim(), "dual_norm");
    switch (E.kind()) {
    case NormKind::p1: {
        double m = 0.0;
        for (double v : xs.raw()) m = std::max(m, std::abs(v));
        return m;
    }
    case NormKind::pinf: {
        double s = 0.0;
        for (double v : xs.raw()) s += std::abs(v);
        return s;
    }
    default: return std::sqrt(dual_norm_squared(E, xs));
    }
}

inline double j(const NormedSpace& E, const Vec& x) { return 0.5 * norm_squared(E, x); }
inline double j_star(const NormedSpace& E, const DualVec& xs) { return 0.5 * dual_norm_squared(E, xs); }

/// r_L(x, x*) = ½‖x‖² + ½‖x*‖² + <x, x*>. Hilbert norms use the completed
/// square ½‖x + W⁻¹x*‖², which is exact at x* = -Wx; other norms clamp the
/// round-off below zero (the value is >= 0 by Fenchel-Young).
inline double rl(const NormedSpace& E, const Vec& x, const DualVec& xs) {
    require_dim(x.size(), E.dim(), "rl");
    require_dim(xs.size(), E.dim(), "rl");
    if (E.is_hilbert()) {
        double s = 0.0;
        for (std::size_t i = 0; i < E.dim(); ++i) {
            const double w = E.weight(i);
            const double d = w == 1.0 ? x[i] + xs[i] : x[i] + xs[i] / w;
            s += w * d * d;
        }
        return 0.5 * s;
    }
    return std::max(0.0, j(E, x) + j_star(E, xs) + pairing(x, xs));
}

/// r_L of the displacement candidate - target.
inline double rl_gap(const NormedSpace& E, const DualPair& candidate, const DualPair& target) {
    require_dim(candidate.x.size(), target.x.size(), "rl_gap");
    return rl(E, candidate.x - target.x, candidate.xstar - target.xstar);
}

/// Riesz map E -> E* of a Hilbert norm (x ↦ Wx). Equals J in Hilbert mode.
inline DualVec riesz(const NormedSpace& E, const Vec& x) {
    if (!E.is_hilbert()) throw Error("riesz: requires a Hilbert norm");
    require_dim(x.size(), E.dim(), "riesz");
    DualVec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = E.weight(i) * x[i];
    return out;
}

inline Vec riesz_inverse(const NormedSpace& E, const DualVec& xs) {
    if (!E.is_hilbert()) throw Error("riesz_inverse: requires a Hilbert norm");
    require_dim(xs.size(), E.dim(), "riesz_inverse");
    Vec out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] / E.weight(i);
    return out;
}

/// Norm of (a, b) in E × E*: sqrt(‖a‖² + ‖b‖*²).
inline double product_norm(const NormedSpace& E, const Vec& a, const DualVec& b) {
    return std::sqrt(norm_squared(E, a) + dual_norm_squared(E, b));
}

// ---------------------------------------------------------------------------
// Duality map

/// The set J(x). Smooth norms give one point; p1 and pinf give a polytope
/// face stored by its vertices, with interior points handled by contains().
class JFace {
public:
    JFace(NormedSpace E, Vec x, std::vector<DualVec> vertices, std::vector<std::size_t> free_coords)
        : E_(std::move(E)), x_(std::move(x)), vertices_(std::move(vertices)),
          free_(std::move(free_coords)) {}

    const Vec& point() const { return x_; }
    const std::vector<DualVec>& vertices() const { return vertices_; }
    bool is_singleton() const { return vertices_.size() == 1; }

    /// <x, z*> = ‖x‖² and ‖z*‖* = ‖x‖, both to tol (scaled by max(1, ‖x‖²)).
    bool contains(const DualVec& zs, double tol = 1e-9) const {
        const double nx2 = norm_squared(E_, x_);
        const double scale = std::max(1.0, nx2);
        if (std::abs(pairing(x_, zs) - nx2) > tol * scale) return false;
        return std::abs(dual_norm(E_, zs) - std::sqrt(nx2)) <= tol * std::sqrt(scale);
    }

    /// Member of J(x) closest to target in the dual norm.
    DualVec nearest(const DualVec& target) const {
        require_dim(target.size(), E_.dim(), "JFace::nearest");
        if (is_singleton()) return vertices_.front();
        const double r = norm(E_, x_);
        if (E_.kind() == NormKind::p1) {
            // J(x) is a box: fixed coordinates r·sign(x_i), free ones in [-r, r].
            DualVec z = vertices_.front();
            for (std::size_t i : free_) z[i] = std::clamp(target[i], -r, r);
            return z;
        }
        // pinf: r · conv{sign(x_i) e_i : i active}; l1-nearest point on a scaled simplex.
        DualVec z(E_.dim(), 0.0);
        std::vector<double> w(free_.size()), lam(free_.size());
        double total = 0.0;
        for (std::size_t k = 0; k < free_.size(); ++k) {
            const std::size_t i = free_[k];
            const double sg = x_[i] >= 0.0 ? 1.0 : -1.0;
            w[k] = sg * target[i];
            lam[k] = std::max(w[k], 0.0);
            total += lam[k];
        }
        if (total > r) {
            double excess = total - r;
            for (std::size_t k = 0; k < lam.size() && excess > 0.0; ++k) {
                const double cut = std::min(lam[k], excess);
                lam[k] -= cut;
                excess -= cut;
            }
        } else {
            lam[0] += r - total;
        }
        for (std::size_t k = 0; k < free_.size(); ++k) {
            const std::size_t i = free_[k];
            z[i] = (x_[i] >= 0.0 ? 1.0 : -1.0) * lam[k];
        }
        return z;
    }

    /// Finite inner approximation: vertices plus 2k+1 points along each face direction.
    std::vector<DualVec> sample(int k = 5) const {
        if (is_singleton()) return vertices_;
        const double r = norm(E_, x_);
        std::vector<DualVec> out;
        const int m = 2 * k + 1;
        if (E_.kind() == NormKind::p1) {
            // tensor grid over the free coordinates
            std::vector<int> idx(free_.size(), 0);
            while (true) {
                DualVec z = vertices_.front();
                for (std::size_t a = 0; a < free_.size(); ++a) {
                    z[free_[a]] = -r + 2.0 * r * idx[a] / (m - 1);
                }
                out.push_back(std::move(z));
                std::size_t a = 0;
                while (a < idx.size() && ++idx[a] == m) idx[a++] = 0;
                if (a == idx.size()) break;
            }
            return out;
        }
        // pinf: barycentric grid with denominator m-1 on the active simplex
        const int den = m - 1;
        std::vector<int> parts(free_.size(), 0);
        auto emit = [&](const std::vector<int>& p) {
            DualVec z(E_.dim(), 0.0);
            for (std::size_t a = 0; a < free_.size(); ++a) {
                const std::size_t i = free_[a];
                z[i] = (x_[i] >= 0.0 ? 1.0 : -1.0) * r * p[a] / den;
            }
            out.push_back(std::move(z));
        };
        auto rec = [&](auto&& self, std::size_t a, int left) -> void {
            if (a + 1 == parts.size()) {
                parts[a] = left;
                emit(parts);
                return;
            }
            for (int v = 0; v <= left; ++v) {
                parts[a] = v;
                self(self, a + 1, left - v);
            }
        };
        rec(rec, 0, den);
        return out;
    }

private:
    NormedSpace E_;
    Vec x_;
    std::vector<DualVec> vertices_;
    std::vector<std::size_t> free_;
};

/// J(x) = ∂(½‖·‖²)(x). `zero_tol` decides which coordinates count as zero
/// (p1) or as attaining the max (pinf), relative to ‖x‖.
inline JFace duality_map(const NormedSpace& E, const Vec& x, double zero_tol = 1e-12) {
    require_dim(x.size(), E.dim(), "duality_map");
    if (E.is_hilbert()) return JFace(E, x, {riesz(E, x)}, {});
    const double r = norm(E, x);
    if (r == 0.0) return JFace(E, x, {DualVec(E.dim(), 0.0)}, {});
    const double thr = zero_tol * r;
    std::vector<std::size_t> free;
    if (E.kind() == NormKind::p1) {
        DualVec base(E.dim(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(x[i]) <= thr) {
                free.push_back(i);
            } else {
                base[i] = x[i] > 0 ? r : -r;
            }
        }
        std::vector<DualVec> verts;
        const std::size_t nv = std::size_t{1} << free.size();
        for (std::size_t mask = 0; mask < nv; ++mask) {
            DualVec z = base;
            for (std::size_t a = 0; a < free.size(); ++a) z[free[a]] = (mask >> a) & 1 ? r : -r;
            verts.push_back(std::move(z));
        }
        return JFace(E, x, std::move(verts), std::move(free));
    }
    std::vector<DualVec> verts;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) >= r - thr) {
            free.push_back(i);
            DualVec z(E.dim(), 0.0);
            z[i] = x[i] > 0 ? r : -r;
            verts.push_back(std::move(z));
        }
    }
    return JFace(E, x, std::move(verts), std::move(free));
}

// ---------------------------------------------------------------------------
// Boxes

struct Box {
    std::vector<double> lo, hi;

    static Box cube(std::size_t n, double a, double b) {
        return {std::vector<double>(n, a), std::vector<double>(n, b)};
    }
    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> x, double slack = 0.0) const {
        if (x.size() != lo.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
        }
        return true;
    }
    void validate() const {
        if (lo.empty() || lo.size() != hi.size()) throw Error("Box: malformed bounds");
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
                throw Error("Box: bounds must be finite with lo <= hi");
            }
        }
    }
    Box scaled(double factor) const {
        Box b = *this;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            const double c = 0.5 * (lo[i] + hi[i]);
            const double h = 0.5 * (hi[i] - lo[i]) * factor;
            b.lo[i] = c - h;
            b.hi[i] = c + h;
        }
        return b;
    }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Largest norm of a point of the box (attained at a corner).
inline double box_radius(const NormedSpace& E, const Box& b) {
    Vec corner(b.dim());
    for (std::size_t i = 0; i < b.dim(); ++i) corner[i] = std::max(std::abs(b.lo[i]), std::abs(b.hi[i]));
    return norm(E, corner);
}

} // namespace rllab

#endif
