// rl-lab: command-line front end. Every subcommand builds a job object and
// hands it to rllab::run, so flags and job files share one code path.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rllab/jobs.hpp"

using rllab::json;

namespace {

struct Globals {
    std::string space = "p2";
    std::uint64_t seed = 0;
    std::optional<unsigned> threads;
    std::string json_out, csv_out;
    bool canonical = false;
};

// A graph argument is inline JSON, a path to a JSON file, or a registry name.
json graph_arg(const std::string& s) {
    if (!s.empty() && s.front() == '{') return json::parse(s);
    if (std::filesystem::exists(s)) return s;
    return json{{"operator", s}};
}

struct Args {
    std::string graph, f, engine, eps, box, y, ystar, u, ustar, point, ladder;
    std::vector<std::string> targets;
    std::optional<double> alpha, beta, M, a0, b0, c0, delta;
    std::optional<std::size_t> grid, k, sample;
    bool convex = false, region = false, audit = false;
    std::string job_path;
};

void add_graph(CLI::App* c, Args& a) {
    c->add_option("--graph", a.graph, "graph: inline JSON, JSON file or operator name");
    c->add_option("--f", a.f, "function text; uses the subdifferential graph when --graph is absent");
    c->add_option("--engine", a.engine, "convex1d|smooth|polynomial|piecewise");
    c->add_option("--sample", a.sample, "replace the graph by a seeded sample of this size");
}

void add_box_grid(CLI::App* c, Args& a) {
    c->add_option("--box", a.box, "search box lo1,..,lon,hi1,..,hin");
    c->add_option("--grid", a.grid, "grid points per axis");
}

json build_graph(const Args& a) {
    json g;
    if (!a.graph.empty()) {
        g = graph_arg(a.graph);
    } else if (!a.f.empty()) {
        g = json{{"operator", "subdiff"}, {"f", a.f}};
        if (!a.engine.empty()) g["engine"] = a.engine;
    } else {
        return nullptr;
    }
    if (a.sample) {
        if (g.is_string()) g = rllab::read_json_file(g.get<std::string>());
        g["sample"] = *a.sample;
    }
    return g;
}

json build_job(const std::string& cmd, const Args& a) {
    json j{{"command", cmd}};
    auto put = [&](const char* k, const std::string& v) {
        if (!v.empty()) j[k] = v;
    };
    auto put_num = [&](const char* k, const auto& v) {
        if (v) j[k] = *v;
    };
    if (cmd == "certify" || cmd == "minty" || cmd == "hyperdense" || cmd == "polar") {
        const json g = build_graph(a);
        if (!g.is_null()) j["graph"] = g;
    } else {
        put("f", a.f);
        put("engine", a.engine);
        if (a.convex) j["convex"] = true;
    }
    if (!a.targets.empty()) {
        j["targets"] = json::array();
        for (const auto& t : a.targets) j["targets"].push_back(t);
    }
    if (!a.eps.empty()) j["eps"] = rllab::parse_numbers(a.eps);
    if (cmd != "polar") {
        put("box", a.box);
        put_num("grid", a.grid);
    }
    put("y", a.y);
    put("ystar", a.ystar);
    put("u", a.u);
    put("ustar", a.ustar);
    put_num("alpha", a.alpha);
    put_num("beta", a.beta);
    put_num("M", a.M);
    put_num("k", a.k);
    if (!a.ladder.empty()) j["ladder"] = rllab::parse_numbers(a.ladder);
    if (a.a0 || a.b0 || a.c0) j["downside"] = json{{"a0", a.a0.value_or(0)}, {"b0", a.b0.value_or(0)}, {"c0", a.c0.value_or(0)}};
    if (cmd == "polar") {
        put("point", a.point);
        if (a.region || a.audit) {
            json r = json::object();
            if (!a.box.empty()) r["box"] = a.box;
            if (a.grid) r["grid"] = *a.grid;
            j["region"] = r;
        }
        if (a.audit) j["audit"] = true;
        put_num("delta", a.delta);
    }
    return j;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rllab::Error("cannot write '" + path + "'");
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rl-lab: r_L-density, variational principles and monotone polars"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--space", g.space, "normed space: p1|p2|pinf[:dim] or w2:w1,..,wn")->capture_default_str();
    app.add_option("--seed", g.seed, "seed for sampling (echoed in the report)")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (default: hardware count)");
    app.add_option("--json-out", g.json_out, "write the JSON report here instead of stdout");
    app.add_option("--csv-out", g.csv_out, "write the command's CSV table here");
    app.add_flag("--canonical", g.canonical, "omit wall time so reports are byte-identical across runs");

    Args a;
    auto* certify = app.add_subcommand("certify", "r_L-density certificates or refutations for a graph");
    add_graph(certify, a);
    certify->add_option("--target", a.targets, "target y,ystar (repeatable)");
    certify->add_option("--eps", a.eps, "eps schedule, e.g. 1e-2,1e-4,1e-6");
    add_box_grid(certify, a);

    auto* csub = app.add_subcommand("certify-subdiff", "stable certificates through the subdifferential pipeline");
    csub->add_option("--f", a.f, "function text")->required();
    csub->add_option("--engine", a.engine, "convex1d|smooth|polynomial|piecewise");
    csub->add_flag("--convex", a.convex, "declare f convex");
    csub->add_option("--a0", a.a0, "downside quadratic coefficient (< 1/2)");
    csub->add_option("--b0", a.b0, "downside linear coefficient");
    csub->add_option("--c0", a.c0, "downside constant");
    csub->add_option("--target", a.targets, "target y,ystar (repeatable)");
    csub->add_option("--eps", a.eps, "eps schedule");
    add_box_grid(csub, a);

    auto* minty = app.add_subcommand("minty", "solve (S + Id)s = y* or run the diagonal ladder");
    add_graph(minty, a);
    minty->add_option("--ystar", a.ystar, "dual target");
    minty->add_option("--ladder", a.ladder, "ladder sizes, e.g. 10,100,1000");
    minty->add_option("--k", a.k, "truncate the ladder preimage to k coordinates");
    add_box_grid(minty, a);

    auto* hyper = app.add_subcommand("hyperdense", "density through the hyperdense range of S + J(. - y)");
    add_graph(hyper, a);
    hyper->add_option("--y", a.y, "primal target");
    hyper->add_option("--ystar", a.ystar, "dual target");
    hyper->add_option("--eps", a.eps, "eps schedule");
    hyper->add_option("--M", a.M, "norm bound on preimages");
    hyper->add_option("--grid", a.grid, "grid points per axis");

    auto* polar = app.add_subcommand("polar", "monotone polar membership, region and maximality audit");
    add_graph(polar, a);
    polar->add_option("--point", a.point, "query x,xs");
    polar->add_flag("--region", a.region, "evaluate the polar over --box on a --grid");
    polar->add_flag("--audit", a.audit, "maximality audit over the region");
    polar->add_option("--delta", a.delta, "audit distance threshold (default 2 cell diagonals)");
    polar->add_option("--box", a.box, "region xlo,xslo,xhi,xshi");
    polar->add_option("--grid", a.grid, "cells per axis");

    auto* ek = app.add_subcommand("ekeland", "Ekeland point of g from an approximate minimiser");
    ek->add_option("--f", a.f, "function text g")->required();
    ek->add_option("--u", a.u, "starting point")->required();
    ek->add_option("--alpha", a.alpha, "alpha")->required();
    ek->add_option("--beta", a.beta, "beta")->required();
    add_box_grid(ek, a);

    auto* br = app.add_subcommand("br", "Brondsted-Rockafellar projection of an eps-subgradient pair");
    br->add_option("--f", a.f, "function text")->required();
    br->add_option("--engine", a.engine, "convex1d|smooth|polynomial|piecewise");
    br->add_flag("--convex", a.convex, "declare f convex");
    br->add_option("--u", a.u, "point u")->required();
    br->add_option("--ustar", a.ustar, "approximate subgradient u*")->required();
    br->add_option("--alpha", a.alpha, "primal radius")->required();
    br->add_option("--beta", a.beta, "dual radius")->required();
    add_box_grid(br, a);

    app.add_subcommand("examples", "run the built-in examples table");

    auto* runjob = app.add_subcommand("run", "run a job file");
    runjob->add_option("job", a.job_path, "job JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rllab::kExitError;
    }

    rllab::RunOptions ropt{g.canonical};
    rllab::RunReport rep;
    json job;
    try {
        auto* sub = app.get_subcommands().front();
        if (sub->get_name() == "run") {
            job = rllab::read_json_file(a.job_path);
        } else {
            job = build_job(sub->get_name(), a);
            job["space"] = g.space;
            job["seed"] = g.seed;
        }
        if (g.threads && job.is_object()) job["threads"] = *g.threads;
        rep = rllab::run(job, ropt);
    } catch (const std::exception& e) {
        std::cerr << "rl-lab: " << e.what() << "\n";
        return rllab::kExitError;
    }

    std::string json_out = g.json_out, csv_out = g.csv_out;
    if (job.is_object() && job.contains("outputs") && job["outputs"].is_object()) {
        if (json_out.empty()) json_out = job["outputs"].value("json", std::string());
        if (csv_out.empty()) csv_out = job["outputs"].value("csv", std::string());
    }
    const std::string text = rep.report.dump(2) + "\n";
    try {
        if (json_out.empty()) {
            std::cout << text;
        } else {
            write_file(json_out, text);
        }
        if (!csv_out.empty()) write_file(csv_out, rep.csv);
    } catch (const std::exception& e) {
        std::cerr << "rl-lab: " << e.what() << "\n";
        return rllab::kExitError;
    }
    if (rep.report.contains("error")) std::cerr << "rl-lab: " << rep.report["error"].get<std::string>() << "\n";
    return rep.exit_code;
}
