#ifndef RLLAB_JOBS_HPP
#define RLLAB_JOBS_HPP

// Job files, dispatch to the library, report assembly and the examples suite.

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rllab/density.hpp"
#include "rllab/io.hpp"
#include "rllab/parallel.hpp"
#include "rllab/polar.hpp"
#include "rllab/varprinciples.hpp"

namespace rllab {

inline constexpr const char* kReportSchema = "rl-lab/report.v1";
inline constexpr const char* kJobSchema = "rl-lab/job.v1";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitNegative = 2 };

struct RunOptions {
    bool canonical = false; // drop wall time so reports compare byte for byte
};

struct RunReport {
    json report;
    int exit_code = kExitOk;
    std::string csv; // command-specific table, empty when not applicable
};

namespace detail {

inline const std::vector<std::string>& common_job_keys() {
    static const std::vector<std::string> k{"schema", "command", "space", "seed", "threads", "outputs"};
    return k;
}

inline const std::map<std::string, std::vector<std::string>>& command_keys() {
    static const std::map<std::string, std::vector<std::string>> k{
        {"certify", {"graph", "target", "targets", "eps", "box", "grid"}},
        {"certify-subdiff", {"f", "engine", "convex", "downside", "target", "targets", "eps", "box", "grid"}},
        {"minty", {"graph", "ystar", "box", "grid", "ladder", "k"}},
        {"hyperdense", {"graph", "y", "ystar", "eps", "M", "grid"}},
        {"polar", {"graph", "point", "region", "audit", "delta"}},
        {"ekeland", {"f", "u", "alpha", "beta", "box", "grid"}},
        {"br", {"f", "engine", "convex", "u", "ustar", "alpha", "beta", "box", "grid"}},
        {"examples", {}},
    };
    return k;
}

} // namespace detail

/// Schema check: required keys present, no unknown keys, output block well formed.
inline void validate_job(const json& job) {
    if (!job.is_object()) throw SchemaError("job must be a JSON object");
    if (!job.contains("command") || !job["command"].is_string()) throw SchemaError("job: missing 'command'");
    if (!job.contains("space")) throw SchemaError("job: missing 'space'");
    const std::string cmd = job["command"].get<std::string>();
    const auto& table = detail::command_keys();
    const auto it = table.find(cmd);
    if (it == table.end()) throw SchemaError("job: unknown command '" + cmd + "'");
    for (const auto& [k, v] : job.items()) {
        const auto& c = detail::common_job_keys();
        if (std::find(c.begin(), c.end(), k) != c.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), k) != it->second.end()) continue;
        throw SchemaError("job: unknown key '" + k + "' for command '" + cmd + "'");
    }
    if (job.contains("schema") && job["schema"] != kJobSchema) throw SchemaError("job: unsupported schema version");
    for (const char* k : {"seed", "threads", "grid", "k"}) {
        if (job.contains(k) && !(job[k].is_number_integer() && job[k].get<std::int64_t>() >= 0)) {
            throw SchemaError(std::string("job: ") + k + " must be a non-negative integer");
        }
    }
    if (job.contains("outputs")) {
        if (!job["outputs"].is_object()) throw SchemaError("job: outputs must be an object");
        detail::check_keys(job["outputs"], {"json", "csv"}, "outputs");
    }
    for (const char* k : {"graph", "f"}) {
        if (job.contains(k) && !job[k].is_string() && !job[k].is_object()) {
            throw SchemaError(std::string("job: '") + k + "' must be a string or object");
        }
    }
    if (job.contains("grid") && job["grid"].get<std::size_t>() < 2) throw SchemaError("job: grid must be >= 2");
}

namespace detail {

struct JobContext {
    const json& job;
    NormedSpace E;
    std::uint64_t seed;

    std::size_t grid(std::size_t def) const { return job.value("grid", def); }
    Box box(std::size_t def_dim, double half = 10.0) const {
        return job.contains("box") ? box_from_json(job["box"], def_dim) : Box::cube(def_dim, -half, half);
    }
    std::vector<double> eps() const {
        if (!job.contains("eps")) return default_eps_schedule();
        auto v = numbers_from_json(job["eps"], "eps");
        check_schedule(v);
        return v;
    }
    double number(const char* key) const {
        if (!job.contains(key)) throw SchemaError(std::string("job: missing '") + key + "'");
        if (!job[key].is_number()) throw SchemaError(std::string("job: '") + key + "' must be a number");
        return job[key].get<double>();
    }
    template <class Tag>
    Coords<Tag> coords(const char* key) const {
        if (!job.contains(key)) throw SchemaError(std::string("job: missing '") + key + "'");
        return coords_from_json<Tag>(job[key], E.dim(), key);
    }
    std::vector<DualPair> targets() const {
        std::vector<DualPair> out;
        if (job.contains("target")) out.push_back(pair_from_json(job["target"], E.dim()));
        if (job.contains("targets")) {
            if (!job["targets"].is_array()) throw SchemaError("job: targets must be an array");
            for (const auto& t : job["targets"]) out.push_back(pair_from_json(t, E.dim()));
        }
        if (out.empty()) throw SchemaError("job: needs 'target' or 'targets'");
        return out;
    }
    ScalarFunc func() const {
        if (!job.contains("f") || !job["f"].is_string()) throw SchemaError("job: missing function text 'f'");
        auto f = parse_func(job["f"].get<std::string>(), E.dim());
        if (job.value("convex", false)) f.convex();
        return f;
    }
    SubdiffEngine engine(const ScalarFunc& f) const {
        if (!job.contains("engine")) return auto_engine(f);
        try {
            return parse_engine(job["engine"].get<std::string>());
        } catch (const Error& e) {
            throw SchemaError(e.what());
        }
    }
    OperatorGraph graph() const {
        if (!job.contains("graph")) throw SchemaError("job: missing 'graph'");
        return graph_from_json(job["graph"], E, seed);
    }
    json graph_spec() const {
        if (!job.contains("graph")) return nullptr;
        return job["graph"].is_string() ? read_json_file(job["graph"].get<std::string>()) : job["graph"];
    }
};

inline json ekeland_json(const EkelandResult& r) {
    return json{{"s", to_json(r.s)},         {"decrease_ok", r.decrease_ok}, {"strictmin_margin", r.strictmin_margin},
                {"distance", r.distance},    {"g_u", r.g_u},                 {"g_s", r.g_s},
                {"inf_g", r.inf_g},          {"iterations", r.iterations}};
}

inline RunReport run_certify(const JobContext& c) {
    const OperatorGraph A = c.graph();
    DensityOptions opt;
    opt.eps_schedule = c.eps();
    opt.search_box = c.box(c.E.dim());
    opt.grid_n = c.grid(opt.grid_n);
    RunReport out;
    std::vector<DensityResult> results;
    json arr = json::array();
    std::size_t refuted = 0;
    for (const auto& t : c.targets()) {
        results.push_back(certify_density(A, t, opt));
        refuted += std::holds_alternative<RefutationReport>(results.back()) ? 1 : 0;
        arr.push_back(to_json(results.back()));
    }
    out.report["results"] = json{{"certified", results.size() - refuted}, {"refuted", refuted}, {"targets", arr}};
    out.exit_code = refuted ? kExitNegative : kExitOk;
    out.csv = certificate_csv(results);
    return out;
}

inline RunReport run_certify_subdiff(const JobContext& c) {
    const ScalarFunc f = c.func();
    const SubdiffEngine e = c.engine(f);
    DownsideCertificate cert{0.0, 0.0, 0.0, {}, kInf};
    if (c.job.contains("downside")) {
        const json& d = c.job["downside"];
        check_keys(d, {"a0", "b0", "c0"}, "downside");
        cert.a0 = d.value("a0", 0.0);
        cert.b0 = d.value("b0", 0.0);
        cert.c0 = d.value("c0", 0.0);
    }
    SubdiffDensityOptions opt;
    opt.eps_schedule = c.eps();
    opt.search_box = c.box(f.dim());
    opt.grid_n = c.grid(opt.grid_n);
    RunReport out;
    std::vector<DensityResult> results;
    json arr = json::array();
    for (const auto& t : c.targets()) {
        SubdiffPipelineTrace tr;
        const auto cert_out = certify_subdiff_density(f, e, cert, t, opt, &tr);
        json j = to_json(cert_out);
        j["trace"] = json{{"m", tr.m}, {"M", tr.M}, {"u", to_json(tr.u)}, {"box", to_json(tr.box)}, {"betas", tr.betas}};
        arr.push_back(std::move(j));
        results.emplace_back(cert_out);
    }
    out.report["results"] = json{{"engine", to_string(e)}, {"certified", results.size()}, {"targets", arr}};
    out.csv = certificate_csv(results);
    return out;
}

inline RunReport run_minty(const JobContext& c) {
    RunReport out;
    if (c.job.contains("ladder")) {
        const auto Ns = numbers_from_json(c.job["ladder"], "ladder");
        const std::size_t k = c.job.value("k", std::size_t{0});
        json rows = json::array();
        std::ostringstream csv;
        csv.precision(17);
        csv << "N,k,preimage_norm,residual_sq\n";
        for (double Nd : Ns) {
            if (!(Nd >= 1) || Nd != std::floor(Nd)) throw SchemaError("ladder sizes must be positive integers");
            const auto N = static_cast<std::size_t>(Nd);
            const auto row = minty_dense({diagonal_ladder(N)}, {ladder_target(N)}, k).front();
            rows.push_back(json{{"N", row.N}, {"k", row.k}, {"preimage_norm", row.preimage_norm},
                                {"residual_sq", row.residual_sq}});
            csv << row.N << ',' << row.k << ',' << row.preimage_norm << ',' << row.residual_sq << '\n';
        }
        out.report["results"] = json{{"ladder", rows}};
        out.csv = csv.str();
        return out;
    }
    const OperatorGraph S = c.graph();
    const DualVec ystar = c.coords<DualTag>("ystar");
    const auto r = minty_exact(S, ystar, c.box(c.E.dim()), c.grid(2001));
    out.report["results"] = json{{"success", r.success}, {"s", to_json(r.s)}, {"sstar", to_json(r.sstar)},
                                 {"residual", r.residual}, {"gap", r.gap}, {"tolerance", kMintyTol}};
    out.exit_code = r.success ? kExitOk : kExitNegative;
    return out;
}

inline RunReport run_hyperdense(const JobContext& c) {
    const OperatorGraph S = c.graph();
    const Vec y = c.coords<PrimalTag>("y");
    const DualVec ystar = c.coords<DualTag>("ystar");
    std::optional<double> M;
    if (c.job.contains("M")) M = c.number("M");
    RunReport out;
    try {
        const auto r = density_via_hyperdense(S, y, ystar, c.eps(), M, c.grid(2001));
        out.report["results"] = json{{"success", true}, {"M", r.M}, {"betas", r.betas}, {"bounds_ok", r.bounds_ok},
                                     {"certificate", to_json(r.certificate)}};
        out.exit_code = r.bounds_ok ? kExitOk : kExitNegative;
        out.csv = certificate_csv({r.certificate});
    } catch (const SearchError& e) {
        out.report["results"] = json{{"success", false}, {"reason", e.what()}};
        out.exit_code = kExitNegative;
    }
    return out;
}

inline RunReport run_polar(const JobContext& c) {
    const OperatorGraph A = c.graph();
    const json spec = c.graph_spec();
    MaximalityOptions mo;
    if (spec.is_object() && spec.value("operator", std::string()) == "subdiff" && c.E.dim() == 1) {
        const Box dom = spec.contains("domain") ? box_from_json(spec["domain"], 1) : Box::cube(1, -10, 10);
        mo.extra_x = find_kinks(parse_func(spec["f"].get<std::string>(), 1), dom);
    }
    if (c.job.contains("delta")) mo.delta = c.number("delta");
    RunReport out;
    json res = json::object();
    if (c.job.contains("point")) {
        const DualPair p = pair_from_json(c.job["point"], c.E.dim());
        const OperatorGraph S = A.is_sampled() ? A : graph_sample(A, 2001, c.seed);
        const PolarQuery q = polar_membership(S, p);
        json v = nullptr;
        if (q.violator) v = json{{"sample", to_json(q.violator->sample)}, {"value", q.violator->value}};
        res["point"] = json{{"point", to_json(p)}, {"in", q.in}, {"violator", v}, {"worst_value", q.worst_value},
                            {"sample_size", S.pairs().size()}};
    }
    if (c.job.contains("region")) {
        const json& r = c.job["region"];
        if (!r.is_object()) throw SchemaError("region must be an object");
        check_keys(r, {"box", "grid"}, "region");
        const Box box = r.contains("box") ? box_from_json(r["box"], 2) : Box{{-10, -2}, {10, 2}};
        const std::size_t grid = r.value("grid", std::size_t{400});
        const OperatorGraph S = audit_sample(A, box, grid, mo);
        const PolarRegion reg = polar_region(S, box, grid);
        res["region"] = json{{"box", to_json(box)}, {"grid", grid}, {"sample_size", S.pairs().size()},
                             {"cells_in", reg.count_in()}, {"cell_diagonal", reg.cell_diagonal()}};
        out.csv = reg.to_csv();
        if (c.job.value("audit", false)) {
            const auto rep = maximality_audit(A, box, grid, mo);
            json viol = json::array();
            for (const auto& v : rep.violations) viol.push_back(json{{"point", to_json(v.point)}, {"distance", v.distance}});
            res["audit"] = json{{"consistent_with_maximal", rep.consistent_with_maximal()},
                                {"delta", rep.delta},
                                {"polar_cells", rep.polar_cells},
                                {"max_distance", rep.max_distance},
                                {"violations", viol}};
            if (!rep.consistent_with_maximal()) out.exit_code = kExitNegative;
        }
    }
    if (res.empty()) throw SchemaError("polar job needs 'point' or 'region'");
    out.report["results"] = std::move(res);
    return out;
}

inline RunReport run_ekeland(const JobContext& c) {
    const ScalarFunc g = c.func();
    const Vec u = c.coords<PrimalTag>("u");
    const double alpha = c.number("alpha"), beta = c.number("beta");
    const auto r = ekeland_point(g, u, alpha, beta, c.box(g.dim()), c.grid(2001));
    RunReport out;
    const bool ok = r.decrease_ok && r.distance <= alpha + 1e-9 && r.strictmin_margin >= -1e-8;
    out.report["results"] = ekeland_json(r);
    out.report["results"]["bounds_ok"] = ok;
    out.exit_code = ok ? kExitOk : kExitNegative;
    return out;
}

inline RunReport run_br(const JobContext& c) {
    const ScalarFunc f = c.func();
    const SubdiffEngine e = c.engine(f);
    const Vec u = c.coords<PrimalTag>("u");
    const DualVec ustar = c.coords<DualTag>("ustar");
    const double alpha = c.number("alpha"), beta = c.number("beta");
    const auto r = br_project(f, e, u, ustar, alpha, beta, c.box(f.dim()), c.grid(2001));
    const bool ok = r.dist_primal <= alpha + kBRTol && r.dist_dual <= beta + kBRTol && r.descent_ok &&
                    r.subgradient_ok.value_or(true);
    RunReport out;
    out.report["results"] = json{{"s", to_json(r.s)},
                                 {"sstar", to_json(r.sstar)},
                                 {"dist_primal", r.dist_primal},
                                 {"dist_dual", r.dist_dual},
                                 {"descent_ok", r.descent_ok},
                                 {"subgradient_ok", r.subgradient_ok ? json(*r.subgradient_ok) : json(nullptr)},
                                 {"fenchel_gap", r.fenchel_gap},
                                 {"bounds_ok", ok},
                                 {"ekeland", ekeland_json(r.ekeland)}};
    out.exit_code = ok ? kExitOk : kExitNegative;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Examples suite

struct ExampleEntry {
    std::string id;
    std::string quantity;
    json expected;
    double tolerance = 0.0; // numeric entries; 0 means exact
    std::function<json()> observe;
};

inline bool entry_matches(const json& expected, const json& observed, double tol) {
    if (expected.is_number() && observed.is_number()) {
        return std::abs(expected.get<double>() - observed.get<double>()) <= tol;
    }
    return expected == observed;
}

/// The baked table of expected verdicts and values.
inline std::vector<ExampleEntry> example_table() {
    const Box line = Box::cube(1, -10, 10);
    auto poly = [line](const char* text) { return subdiff_operator(SubdiffEngine::polynomial, parse_func(text), line); };
    std::vector<ExampleEntry> t;

    t.push_back({"neg_quarter_square_stable", "stable certificates for f = -0.25 x^2 at 5 targets", 5, 0.0, [] {
                     const auto f = parse_func("-0.25*x1^2");
                     int ok = 0;
                     for (auto [y, ys] : {std::pair{-2.0, 1.0}, {-1.0, -1.0}, {0.0, 0.0}, {1.0, 2.0}, {2.0, -2.0}}) {
                         const auto c = certify_subdiff_density(f, SubdiffEngine::polynomial, {0.25, 0, 0, {}, kInf},
                                                                {Vec{y}, DualVec{ys}});
                         bool good = c.stable_bound.has_value() && c.witnesses.size() == 3;
                         for (const auto& w : c.witnesses) good &= w.gap < w.eps;
                         ok += good ? 1 : 0;
                     }
                     return json(ok);
                 }});
    t.push_back({"neg_half_square_bound", "refutation lower bound for f = -0.5 x^2 at (0, 1)", 0.5, 1e-9, [poly] {
                     const auto r = certify_density(poly("-0.5*x1^2"), {Vec{0}, DualVec{1}});
                     if (const auto* ref = std::get_if<RefutationReport>(&r)) return json(ref->delta);
                     return json("certified");
                 }});
    t.push_back({"neg_square_gap", "gap at the witness for f = -x^2, target (2, 3)", 0.0, 1e-20, [poly] {
                     const auto r = certify_density(poly("-1*x1^2"), {Vec{2}, DualVec{3}});
                     if (const auto* c = std::get_if<DensityCertificate>(&r)) return json(c->witnesses.back().gap);
                     return json("refuted");
                 }});
    t.push_back({"neg_square_witness", "witness s = -(y + y*) for f = -x^2, target (2, 3)", -5.0, 1e-6, [poly] {
                     const auto r = certify_density(poly("-1*x1^2"), {Vec{2}, DualVec{3}});
                     if (const auto* c = std::get_if<DensityCertificate>(&r)) return json(c->witnesses.back().pair.x[0]);
                     return json("refuted");
                 }});
    t.push_back({"cubic_bound", "refutation lower bound for f = x^3 at (0, -1)", 0.5 * (11.0 / 12) * (11.0 / 12), 1e-6,
                 [poly] {
                     const auto r = certify_density(poly("x1^3"), {Vec{0}, DualVec{-1}});
                     if (const auto* ref = std::get_if<RefutationReport>(&r)) return json(ref->delta);
                     return json("certified");
                 }});
    t.push_back({"sin_polar", "polar cells of the sin derivative graph over [-10,10]x[-2,2], grid 400", 0, 0.0, [] {
                     std::vector<DualPair> ps;
                     for (int i = 0; i <= 4000; ++i) {
                         const double x = -10.0 + 20.0 * i / 4000.0;
                         ps.push_back({Vec{x}, DualVec{std::cos(x)}});
                     }
                     const auto reg = polar_region(sampled_graph(NormedSpace::real_line(), ps), Box{{-10, -2}, {10, 2}}, 400);
                     return json(reg.count_in());
                 }});
    for (std::size_t N : {10u, 100u, 1000u}) {
        t.push_back({"ladder_norm_" + std::to_string(N), "preimage norm on the diagonal ladder, N = " + std::to_string(N),
                     std::sqrt(double(N)), 1e-12 * std::sqrt(double(N)), [N] {
                         return json(minty_dense({diagonal_ladder(N)}, {ladder_target(N)}).front().preimage_norm);
                     }});
    }
    {
        double tail = 0.0;
        for (int n = 100; n >= 11; --n) tail += 1.0 / (double(n) * n);
        t.push_back({"ladder_truncated", "residual squared on N = 100 truncated to k = 10", tail, 1e-12, [] {
                         return json(minty_dense({diagonal_ladder(100)}, {ladder_target(100)}, 10).front().residual_sq);
                     }});
    }
    t.push_back({"rockafellar", "maximality violations for |x|, x^2/2, max(x,0), |x|+x^2/2", 0, 0.0, [line] {
                     std::size_t total = 0;
                     for (const char* text : {"abs(x1)", "0.5*x1^2", "max(x1, 0)", "abs(x1) + 0.5*x1^2"}) {
                         auto f = parse_func(text);
                         f.convex();
                         MaximalityOptions o;
                         o.extra_x = find_kinks(f, line);
                         total += maximality_audit(subdiff_operator(SubdiffEngine::convex1d, f, line),
                                                   Box{{-10, -2}, {10, 2}}, 400, o)
                                      .violations.size();
                     }
                     return json(total);
                 }});
    return t;
}

/// Runs every table entry; mismatches are listed as a diff in the report.
inline RunReport examples_suite() {
    RunReport out;
    json entries = json::array(), diff = json::array();
    for (const auto& e : example_table()) {
        json observed;
        try {
            observed = e.observe();
        } catch (const std::exception& ex) {
            observed = std::string("error: ") + ex.what();
        }
        const bool pass = entry_matches(e.expected, observed, e.tolerance);
        entries.push_back(json{{"id", e.id}, {"quantity", e.quantity}, {"expected", e.expected},
                               {"tolerance", e.tolerance}, {"observed", observed}, {"pass", pass}});
        if (!pass) diff.push_back(json{{"id", e.id}, {"expected", e.expected}, {"observed", observed}});
    }
    out.report["results"] = json{{"entries", entries}, {"passed", entries.size() - diff.size()},
                                 {"failed", diff.size()}, {"diff", diff}};
    out.exit_code = diff.empty() ? kExitOk : kExitNegative;
    return out;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Validates and runs one job. Operational errors are reported with exit code 1.
inline RunReport run(const json& job, const RunOptions& ropt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport out;
    json head{{"schema", kReportSchema}};
    head["command"] = job.is_object() && job.contains("command") ? job["command"] : json(nullptr);
    std::uint64_t seed = 0;
    if (job.is_object() && job.contains("seed") && job["seed"].is_number_integer() && job["seed"].get<std::int64_t>() >= 0) seed = job["seed"].get<std::uint64_t>();
    head["seed"] = seed;
    head["parameters"] = job;
    std::string status;
    try {
        validate_job(job);
        if (job.contains("threads")) set_threads(job["threads"].get<unsigned>());
        const detail::JobContext ctx{job, space_from_json(job["space"]), seed};
        head["space"] = space_string(ctx.E);
        const std::string cmd = job["command"].get<std::string>();
        if (cmd == "certify") out = detail::run_certify(ctx);
        else if (cmd == "certify-subdiff") out = detail::run_certify_subdiff(ctx);
        else if (cmd == "minty") out = detail::run_minty(ctx);
        else if (cmd == "hyperdense") out = detail::run_hyperdense(ctx);
        else if (cmd == "polar") out = detail::run_polar(ctx);
        else if (cmd == "ekeland") out = detail::run_ekeland(ctx);
        else if (cmd == "br") out = detail::run_br(ctx);
        else out = examples_suite();
        status = out.exit_code == kExitOk ? "ok" : "negative";
    } catch (const SchemaError& e) {
        out = {};
        out.exit_code = kExitError;
        status = "schema_error";
        head["error"] = e.what();
    } catch (const std::exception& e) {
        out = {};
        out.exit_code = kExitError;
        status = "error";
        head["error"] = e.what();
    }
    json report = head;
    report["status"] = status;
    report["exit_code"] = out.exit_code;
    report["results"] = out.report.contains("results") ? out.report["results"] : json(nullptr);
    if (!ropt.canonical) {
        report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    out.report = std::move(report);
    return out;
}

} // namespace rllab

#endif
