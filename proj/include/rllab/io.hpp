#ifndef RLLAB_IO_HPP
#define RLLAB_IO_HPP

// JSON conversions and the operator registry used by job files and the CLI.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rllab/density.hpp"
#include "rllab/error.hpp"
#include "rllab/geometry.hpp"
#include "rllab/operators.hpp"
#include "rllab/subdiff.hpp"

namespace rllab {

using json = nlohmann::ordered_json;

/// Malformed job or graph description.
struct SchemaError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Scalars and vectors

/// Comma separated numbers, e.g. "1,2.5,-3".
inline std::vector<double> parse_numbers(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw SchemaError("not a number: '" + tok + "'");
        }
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
        if (used != tok.size()) throw SchemaError("not a number: '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw SchemaError("empty number list");
    return out;
}

inline std::vector<double> numbers_from_json(const json& j, const char* what) {
    if (j.is_number()) return {j.get<double>()};
    if (j.is_string()) return parse_numbers(j.get<std::string>());
    if (!j.is_array() || j.empty()) throw SchemaError(std::string(what) + ": expected a number array");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw SchemaError(std::string(what) + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

template <class Tag>
Coords<Tag> coords_from_json(const json& j, std::size_t dim, const char* what) {
    auto v = numbers_from_json(j, what);
    require_dim(v.size(), dim, what);
    return Coords<Tag>(std::move(v));
}

template <class Tag>
json to_json(const Coords<Tag>& c) {
    return json(c.raw());
}

inline json to_json(const DualPair& p) { return json{{"x", to_json(p.x)}, {"xstar", to_json(p.xstar)}}; }

/// A pair is {"x": [...], "xstar": [...]} or [[...], [...]]; in 1-D also [x, x*] or "x,x*".
inline DualPair pair_from_json(const json& j, std::size_t dim) {
    if (j.is_object()) {
        if (!j.contains("x") || !j.contains("xstar")) throw SchemaError("pair needs keys x and xstar");
        return {coords_from_json<PrimalTag>(j["x"], dim, "pair x"), coords_from_json<DualTag>(j["xstar"], dim, "pair xstar")};
    }
    if (j.is_array() && j.size() == 2 && j[0].is_array()) {
        return {coords_from_json<PrimalTag>(j[0], dim, "pair x"), coords_from_json<DualTag>(j[1], dim, "pair xstar")};
    }
    const auto v = numbers_from_json(j, "pair");
    if (v.size() != 2 * dim) throw SchemaError("pair: expected " + std::to_string(2 * dim) + " numbers");
    return {Vec(std::vector<double>(v.begin(), v.begin() + dim)), DualVec(std::vector<double>(v.begin() + dim, v.end()))};
}

// ---------------------------------------------------------------------------
// Spaces and boxes

/// "p2", "p1:3", "pinf:2", "w2:1,4" (weights give the dimension); dim defaults to 1.
inline NormedSpace parse_space(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    auto dim_of = [&]() -> std::size_t {
        if (rest.empty()) return 1;
        const auto v = parse_numbers(rest);
        if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0])) throw SchemaError("bad dimension in space '" + text + "'");
        return static_cast<std::size_t>(v[0]);
    };
    if (kind == "p1") return {dim_of(), NormKind::p1};
    if (kind == "p2") return {dim_of(), NormKind::p2};
    if (kind == "pinf") return {dim_of(), NormKind::pinf};
    if (kind == "w2") {
        if (rest.empty()) throw SchemaError("w2 space needs weights, e.g. w2:1,2");
        auto w = parse_numbers(rest);
        const std::size_t n = w.size();
        try {
            return {n, NormKind::weighted2, std::move(w)};
        } catch (const DimensionError&) {
            throw;
        } catch (const Error& e) {
            throw SchemaError(e.what());
        }
    }
    throw SchemaError("unknown space '" + text + "' (use p1, p2, pinf or w2)");
}

inline NormedSpace space_from_json(const json& j) {
    if (j.is_string()) return parse_space(j.get<std::string>());
    if (!j.is_object() || !j.contains("norm")) throw SchemaError("space: expected a string or {norm, dim}");
    std::string text = j["norm"].get<std::string>();
    if (j.contains("weights")) {
        std::ostringstream os;
        const auto w = numbers_from_json(j["weights"], "space weights");
        for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
        text += ":" + os.str();
    } else if (j.contains("dim")) {
        text += ":" + std::to_string(j["dim"].get<std::size_t>());
    }
    return parse_space(text);
}

inline std::string space_string(const NormedSpace& E) {
    std::ostringstream os;
    os << to_string(E.kind()) << ":";
    if (E.kind() == NormKind::weighted2) {
        for (std::size_t i = 0; i < E.dim(); ++i) os << (i ? "," : "") << E.weights()[i];
    } else {
        os << E.dim();
    }
    return os.str();
}

/// {"lo": [...], "hi": [...]}, or "lo1,...,lon,hi1,...,hin" / a flat array of 2n numbers.
inline Box box_from_json(const json& j, std::size_t dim) {
    Box b;
    if (j.is_object()) {
        if (!j.contains("lo") || !j.contains("hi")) throw SchemaError("box needs keys lo and hi");
        b.lo = numbers_from_json(j["lo"], "box lo");
        b.hi = numbers_from_json(j["hi"], "box hi");
        if (b.lo.size() == 1 && dim > 1) b = Box::cube(dim, b.lo[0], b.hi[0]);
    } else {
        const auto v = numbers_from_json(j, "box");
        if (v.size() == 2 && dim > 1) {
            b = Box::cube(dim, v[0], v[1]);
        } else {
            if (v.size() != 2 * dim) throw SchemaError("box: expected " + std::to_string(2 * dim) + " numbers");
            b.lo.assign(v.begin(), v.begin() + dim);
            b.hi.assign(v.begin() + dim, v.end());
        }
    }
    require_dim(b.lo.size(), dim, "box");
    require_dim(b.hi.size(), dim, "box");
    try {
        b.validate();
    } catch (const Error& e) {
        throw SchemaError(e.what());
    }
    return b;
}

inline json to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

// ---------------------------------------------------------------------------
// Operator registry

inline const std::vector<std::string>& operator_names() {
    static const std::vector<std::string> names{"identity", "zero", "neg_identity", "identity_halfline", "linear",
                                                "diagonal_ladder", "cos", "sin", "power", "subdiff", "sampled"};
    return names;
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok |= k == a;
        if (!ok) throw SchemaError(where + ": unknown key '" + k + "'");
    }
}

inline Eigen::MatrixXd matrix_from_json(const json& j, std::size_t n) {
    if (!j.is_array() || j.size() != n) throw SchemaError("matrix: expected " + std::to_string(n) + " rows");
    Eigen::MatrixXd A(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = numbers_from_json(j[i], "matrix row");
        require_dim(row.size(), n, "matrix row");
        for (std::size_t k = 0; k < n; ++k) A(i, k) = row[k];
    }
    return A;
}

} // namespace detail

/// Engine used when none is named: convex1d for claimed-convex 1-D functions,
/// then polynomial, smooth or piecewise by what the expression allows.
inline SubdiffEngine auto_engine(const ScalarFunc& f) {
    if (f.claimed_convex && f.dim() == 1) return SubdiffEngine::convex1d;
    if (expr::is_polynomial(f.ast())) return SubdiffEngine::polynomial;
    if (expr::is_smooth(f.ast()) || f.dim() != 1) return SubdiffEngine::smooth;
    return SubdiffEngine::piecewise;
}

/// Builds an operator graph from its JSON description:
///   {"operator": name, "domain": box, ...operator parameters, "sample": budget}
/// A string is read as a path to a JSON file holding such an object.
/// "sample" replaces the graph by a seeded finite sample of that size.
inline OperatorGraph graph_from_json(const json& spec, const NormedSpace& E, std::uint64_t seed = 0);

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("'" + path + "': " + e.what());
    }
}

inline OperatorGraph graph_from_json(const json& spec, const NormedSpace& E, std::uint64_t seed) {
    if (spec.is_string()) return graph_from_json(read_json_file(spec.get<std::string>()), E, seed);
    if (!spec.is_object() || !spec.contains("operator")) throw SchemaError("graph: expected an object with 'operator'");
    detail::check_keys(spec, {"operator", "domain", "matrix", "offset", "N", "f", "engine", "convex", "exponent", "pairs", "sample"},
                       "graph");
    const std::string op = spec["operator"].get<std::string>();
    const std::size_t n = E.dim();
    const Box dom = spec.contains("domain") ? box_from_json(spec["domain"], n) : Box::cube(n, -10, 10);
    auto need_1d = [&] {
        if (n != 1) throw DimensionError("operator '" + op + "' is one-dimensional");
    };

    std::optional<OperatorGraph> G;
    if (op == "identity") {
        G = identity_graph(E, dom);
    } else if (op == "zero") {
        G = zero_graph(E, dom);
    } else if (op == "neg_identity") {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < n; ++i) A(i, i) = -E.weight(i);
        G = linear_graph(E, std::move(A), dom, "neg_identity");
    } else if (op == "identity_halfline") {
        Box half = dom;
        for (double& v : half.lo) v = std::max(v, 0.0);
        half.validate();
        // analytic, so the graph is empty off the half space
        G = analytic_graph(E, half, [E](const Vec& x, int) { return std::vector<DualVec>{riesz(E, x)}; },
                           "identity_halfline");
    } else if (op == "linear") {
        if (!spec.contains("matrix")) throw SchemaError("linear operator needs 'matrix'");
        Eigen::MatrixXd A = detail::matrix_from_json(spec["matrix"], n);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        if (spec.contains("offset")) {
            const auto v = numbers_from_json(spec["offset"], "offset");
            require_dim(v.size(), n, "offset");
            for (std::size_t i = 0; i < n; ++i) b(i) = v[i];
        }
        G = linear_graph(E, std::move(A), std::move(b), dom);
    } else if (op == "diagonal_ladder") {
        const std::size_t N = spec.value("N", n);
        if (N != n) throw DimensionError("diagonal_ladder: N must equal the space dimension");
        G = diagonal_ladder(N, dom.hi[0]);
    } else if (op == "cos" || op == "sin") {
        need_1d();
        if (op == "cos") {
            G = scalar_graph([](double x) { return std::cos(x); }, dom, "cos");
        } else {
            G = scalar_graph([](double x) { return std::sin(x); }, dom, "sin");
        }
    } else if (op == "power") {
        need_1d();
        const double p = spec.value("exponent", 3.0);
        G = scalar_graph([p](double x) { return std::pow(x, p); }, dom, "power");
    } else if (op == "subdiff") {
        if (!spec.contains("f")) throw SchemaError("subdiff operator needs 'f'");
        auto f = parse_func(spec["f"].get<std::string>(), n);
        if (spec.value("convex", false)) f.convex();
        const auto engine = spec.contains("engine") ? parse_engine(spec["engine"].get<std::string>()) : auto_engine(f);
        G = subdiff_operator(engine, f, dom);
    } else if (op == "sampled") {
        if (!spec.contains("pairs") || !spec["pairs"].is_array()) throw SchemaError("sampled graph needs 'pairs'");
        std::vector<DualPair> ps;
        for (const auto& p : spec["pairs"]) ps.push_back(pair_from_json(p, n));
        if (ps.empty()) throw SchemaError("sampled graph has no pairs");
        G = sampled_graph(E, std::move(ps), "sampled");
    } else {
        throw SchemaError("unknown operator '" + op + "'");
    }
    if (spec.contains("sample")) {
        const auto budget = spec["sample"].get<std::size_t>();
        G = graph_sample(*G, budget, seed);
    }
    return *G;
}

// ---------------------------------------------------------------------------
// Results

inline json to_json(const Witness& w) {
    return json{{"pair", to_json(w.pair)},  {"gap", w.gap},           {"eps", w.eps},
                {"dist_primal", w.dist_primal}, {"dist_dual", w.dist_dual}};
}

inline json to_json(const DensityCertificate& c) {
    json ws = json::array();
    for (const auto& w : c.witnesses) ws.push_back(to_json(w));
    json out{{"kind", "certificate"}, {"target", to_json(c.target)}, {"method", c.method}, {"witnesses", ws}};
    out["stable_bound"] = c.stable_bound ? json(*c.stable_bound) : json(nullptr);
    return out;
}

inline json to_json(const RefutationReport& r) {
    return json{{"kind", "refutation"},  {"target", to_json(r.target)}, {"box", to_json(r.box)},
                {"grid_n", r.grid_n},    {"eps", r.eps},                {"best_gap", r.best_gap},
                {"slack", r.slack},      {"delta", r.delta},            {"conclusive", r.conclusive()},
                {"best_pair", to_json(r.best_pair)}};
}

inline json to_json(const DensityResult& r) {
    return std::visit([](const auto& v) { return to_json(v); }, r);
}

/// (ε, gap, ‖s−y‖, ‖s*−y*‖) rows of a certificate, one per witness.
inline std::string certificate_csv(const std::vector<DensityResult>& results) {
    std::ostringstream os;
    os.precision(17);
    os << "target,eps,gap,dist_primal,dist_dual\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (const auto* c = std::get_if<DensityCertificate>(&results[i])) {
            for (const auto& w : c->witnesses) {
                os << i << "," << w.eps << "," << w.gap << "," << w.dist_primal << "," << w.dist_dual << "\n";
            }
        }
    }
    return os.str();
}

} // namespace rllab

#endif
