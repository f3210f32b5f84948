#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "rllab/jobs.hpp"

using namespace rllab;

namespace {

json job(std::string cmd, json extra = json::object()) {
    json j{{"command", cmd}, {"space", "p2:1"}};
    for (auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

int cli(const std::string& args, std::string* out = nullptr) {
    const std::string path = testing::TempDir() + "rl_lab_cli_out.txt";
    const std::string cmd = std::string(RLLAB_CLI) + " " + args + " > " + path + " 2>/dev/null";
    const int st = std::system(cmd.c_str());
    if (out) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string job_path(const char* name) { return std::string(RLLAB_SOURCE_DIR) + "/jobs/" + name; }

} // namespace

TEST(ParseSpace, Examples) {
    EXPECT_EQ(parse_space("p2"), NormedSpace::real_line());
    EXPECT_EQ(parse_space("pinf:3"), NormedSpace(3, NormKind::pinf));
    EXPECT_EQ(parse_space("p1:2").kind(), NormKind::p1);
    const auto w = parse_space("w2:1,4");
    EXPECT_EQ(w.dim(), 2u);
    EXPECT_EQ(w.weight(1), 4.0);
    EXPECT_EQ(space_string(w), "w2:1,4");
    EXPECT_EQ(space_string(parse_space("p1:5")), "p1:5");
    EXPECT_EQ(space_from_json(json{{"norm", "p2"}, {"dim", 3}}), NormedSpace::euclidean(3));
    for (const char* bad : {"p3", "p2:0", "p2:1.5", "w2", "w2:1,-1", "p2:x"}) {
        EXPECT_THROW(parse_space(bad), SchemaError) << bad;
    }
}

TEST(PairFromJson, Forms) {
    const DualPair want{Vec{1}, DualVec{-2}};
    EXPECT_EQ(pair_from_json(json::parse(R"({"x":[1],"xstar":[-2]})"), 1), want);
    EXPECT_EQ(pair_from_json(json::parse("[[1],[-2]]"), 1), want);
    EXPECT_EQ(pair_from_json(json::parse("[1,-2]"), 1), want);
    EXPECT_EQ(pair_from_json("1,-2", 1), want);
    EXPECT_EQ(pair_from_json("1,2,3,4", 2), (DualPair{Vec{1, 2}, DualVec{3, 4}}));
    EXPECT_THROW(pair_from_json("1,2,3", 1), SchemaError);
    EXPECT_THROW(pair_from_json(json::parse(R"({"x":[1]})"), 1), SchemaError);
    EXPECT_THROW(pair_from_json(json::parse("[[1],[2,3]]"), 1), DimensionError);
    EXPECT_THROW(parse_numbers("1,,2"), SchemaError);
    EXPECT_THROW(parse_numbers("1e"), SchemaError);
}

TEST(BoxFromJson, Forms) {
    EXPECT_EQ(box_from_json(json::parse("[-1, 2]"), 1), (Box{{-1}, {2}}));
    EXPECT_EQ(box_from_json(json::parse("[-1, 2]"), 3), Box::cube(3, -1, 2));
    EXPECT_EQ(box_from_json("-1,-2,1,2", 2), (Box{{-1, -2}, {1, 2}}));
    EXPECT_EQ(box_from_json(json::parse(R"({"lo":[0],"hi":[1]})"), 1), (Box{{0}, {1}}));
    EXPECT_THROW(box_from_json(json::parse("[2, 1]"), 1), SchemaError);
}

TEST(GraphRegistry, EveryOperatorBuilds) {
    const NormedSpace R = NormedSpace::real_line();
    for (const auto& name : operator_names()) {
        json spec{{"operator", name}};
        if (name == "linear") spec["matrix"] = json::parse("[[2]]");
        if (name == "subdiff") spec["f"] = "abs(x1)";
        if (name == "sampled") spec["pairs"] = json::parse("[[0, 0], [1, 1]]");
        const OperatorGraph G = graph_from_json(spec, R);
        EXPECT_FALSE(G.image(Vec{1}).empty()) << name;
    }
    const auto neg = graph_from_json(json{{"operator", "neg_identity"}}, R);
    EXPECT_EQ(neg.image(Vec{3}).front()[0], -3.0);
    const auto half = graph_from_json(json{{"operator", "identity_halfline"}}, R);
    EXPECT_TRUE(half.image(Vec{-1}).empty());
    const auto pw = graph_from_json(json{{"operator", "power"}, {"exponent", 3}}, R);
    EXPECT_EQ(pw.image(Vec{2}).front()[0], 8.0);
    const auto lin = graph_from_json(json::parse(R"({"operator":"linear","matrix":[[1,2],[3,4]],"offset":[1,1]})"),
                                     NormedSpace::euclidean(2));
    EXPECT_EQ(lin.image(Vec{1, 1}).front(), (DualVec{4, 8}));
    const auto s = graph_from_json(json{{"operator", "cos"}, {"sample", 50}}, R, 7);
    EXPECT_TRUE(s.is_sampled());
    EXPECT_EQ(s.pairs().size(), 50u);
    for (const auto& p : s.pairs()) EXPECT_EQ(p.xstar[0], std::cos(p.x[0]));
}

TEST(GraphRegistry, Rejections) {
    const NormedSpace R = NormedSpace::real_line();
    EXPECT_THROW(graph_from_json(json{{"operator", "nope"}}, R), SchemaError);
    EXPECT_THROW(graph_from_json(json{{"operator", "identity"}, {"colour", 1}}, R), SchemaError);
    EXPECT_THROW(graph_from_json(json{{"operator", "linear"}}, R), SchemaError);
    EXPECT_THROW(graph_from_json(json{{"operator", "cos"}}, NormedSpace::euclidean(2)), DimensionError);
    EXPECT_THROW(graph_from_json(json{{"operator", "sampled"}, {"pairs", json::array()}}, R), SchemaError);
    EXPECT_THROW(graph_from_json(json{{"f", "x1"}}, R), SchemaError);
}

TEST(ValidateJob, Schema) {
    EXPECT_NO_THROW(validate_job(job("examples")));
    EXPECT_THROW(validate_job(json{{"command", "examples"}}), SchemaError);
    EXPECT_THROW(validate_job(json{{"space", "p2"}}), SchemaError);
    EXPECT_THROW(validate_job(job("frobnicate")), SchemaError);
    EXPECT_THROW(validate_job(job("examples", {{"graph", "x"}})), SchemaError);
    EXPECT_THROW(validate_job(job("certify", {{"u", 1}})), SchemaError);
    EXPECT_THROW(validate_job(job("certify", {{"seed", -1}})), SchemaError);
    EXPECT_THROW(validate_job(job("certify", {{"grid", 1}})), SchemaError);
    EXPECT_THROW(validate_job(job("certify", {{"outputs", {{"pdf", "x"}}}})), SchemaError);
    EXPECT_THROW(validate_job(json::array()), SchemaError);
}

TEST(Run, ExitCodes) {
    const json sub = {{"operator", "subdiff"}, {"f", "-0.5*x1^2"}};
    EXPECT_EQ(run(job("certify", {{"graph", {{"operator", "identity"}}}, {"target", "1,1"}})).exit_code, 0);
    EXPECT_EQ(run(job("certify", {{"graph", sub}, {"target", "0,1"}})).exit_code, 2);

    EXPECT_EQ(run(job("certify-subdiff", {{"f", "abs(x1)"}, {"convex", true}, {"engine", "convex1d"}, {"target", "0,0.5"}}))
                  .exit_code,
              0);
    // a0 = 0.5 is not an insignificant downside
    EXPECT_EQ(run(job("certify-subdiff", {{"f", "-0.5*x1^2"}, {"downside", {{"a0", 0.5}}}, {"target", "0,1"}})).exit_code, 1);

    EXPECT_EQ(run(job("minty", {{"graph", {{"operator", "zero"}}}, {"ystar", 3}})).exit_code, 0);
    // S + Id = 0 has range {0}
    EXPECT_EQ(run(job("minty", {{"graph", {{"operator", "neg_identity"}}}, {"ystar", 1}})).exit_code, 2);
    EXPECT_EQ(run(job("minty", {{"ladder", {10}}})).exit_code, 0);

    EXPECT_EQ(run(job("hyperdense", {{"graph", {{"operator", "identity"}}}, {"y", 1}, {"ystar", 0.5}})).exit_code, 0);
    EXPECT_EQ(run(job("hyperdense", {{"graph", {{"operator", "neg_identity"}}}, {"y", 0}, {"ystar", 1}})).exit_code, 2);

    const json region = {{"box", "-2,-2,2,2"}, {"grid", 100}};
    EXPECT_EQ(run(job("polar", {{"graph", {{"operator", "identity"}}}, {"point", "1,-1"}})).exit_code, 0);
    EXPECT_EQ(run(job("polar", {{"graph", {{"operator", "identity"}}}, {"region", region}, {"audit", true}})).exit_code, 0);
    EXPECT_EQ(run(job("polar", {{"graph", {{"operator", "identity_halfline"}}}, {"region", region}, {"audit", true}}))
                  .exit_code,
              2);
    EXPECT_EQ(run(job("polar", {{"graph", {{"operator", "cos"}}}, {"region", region}, {"audit", true}})).exit_code, 1);
    EXPECT_EQ(run(job("polar", {{"graph", {{"operator", "identity"}}}})).exit_code, 1);

    EXPECT_EQ(run(job("ekeland", {{"f", "x1^2"}, {"u", 0.1}, {"alpha", 1}, {"beta", 0.1}})).exit_code, 0);
    // g(u) - inf g = 1 > αβ
    EXPECT_EQ(run(job("ekeland", {{"f", "x1^2"}, {"u", 1}, {"alpha", 0.1}, {"beta", 0.1}})).exit_code, 1);

    EXPECT_EQ(run(job("br", {{"f", "abs(x1)"}, {"convex", true}, {"u", 0.05}, {"ustar", 0.9}, {"alpha", 0.5}, {"beta", 0.5}}))
                  .exit_code,
              0);
    EXPECT_EQ(run(job("examples")).exit_code, 0);
    EXPECT_EQ(run(json{{"command", "certify"}}).exit_code, 1);
}

TEST(Run, ReportShape) {
    const auto r = run(job("certify", {{"graph", {{"operator", "identity"}}}, {"targets", json::array({"1,1", "0,-2"})}, {"seed", 9}}));
    EXPECT_EQ(r.report["schema"], kReportSchema);
    EXPECT_EQ(r.report["command"], "certify");
    EXPECT_EQ(r.report["seed"], 9);
    EXPECT_EQ(r.report["space"], "p2:1");
    EXPECT_EQ(r.report["status"], "ok");
    EXPECT_EQ(r.report["exit_code"], 0);
    EXPECT_TRUE(r.report.contains("wall_time_s"));
    EXPECT_EQ(r.report["parameters"]["targets"].size(), 2u);
    EXPECT_EQ(r.report["results"]["certified"], 2);
    // csv: header plus one row per witness
    EXPECT_EQ(std::count(r.csv.begin(), r.csv.end(), '\n'), 7);
    EXPECT_EQ(r.csv.substr(0, r.csv.find('\n')), "target,eps,gap,dist_primal,dist_dual");

    const auto bad = run(json{{"command", "certify"}, {"space", "p2"}, {"bogus", 1}});
    EXPECT_EQ(bad.report["status"], "schema_error");
    EXPECT_NE(bad.report["error"].get<std::string>().find("bogus"), std::string::npos);
    EXPECT_TRUE(bad.report["results"].is_null());
    EXPECT_FALSE(run(job("examples"), {true}).report.contains("wall_time_s"));
}

TEST(Run, QuadraticJobs) {
    auto r = run(read_json_file(job_path("certify_quadratic_quarter.json")), {true});
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.report["results"]["certified"], 5);
    for (const auto& t : r.report["results"]["targets"]) {
        EXPECT_EQ(t["kind"], "certificate");
        EXPECT_EQ(t["witnesses"].size(), 3u);
    }
    r = run(read_json_file(job_path("certify_quadratic_half.json")), {true});
    EXPECT_EQ(r.exit_code, 2);
    const auto& ref = r.report["results"]["targets"][0];
    EXPECT_EQ(ref["kind"], "refutation");
    EXPECT_NEAR(ref["delta"].get<double>(), 0.5, 1e-9);
    r = run(read_json_file(job_path("malformed_missing_space.json")), {true});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(r.report["status"], "schema_error");
}

TEST(RunProperty, DeterministicAcrossRunsAndThreads) {
    for (const char* name : {"certify_quadratic_quarter.json", "polar_sin.json", "subdiff_pipeline.json", "br_abs.json"}) {
        json j = read_json_file(job_path(name));
        j.erase("outputs");
        const auto a = run(j, {true});
        const auto b = run(j, {true});
        EXPECT_EQ(a.report.dump(), b.report.dump()) << name;
        EXPECT_EQ(a.csv, b.csv) << name;
        j["threads"] = 3;
        auto c = run(j, {true});
        c.report["parameters"].erase("threads");
        EXPECT_EQ(a.report["results"].dump(), c.report["results"].dump()) << name;
        set_threads(0);
    }
}

TEST(ExamplesSuite, TableMatches) {
    const auto r = examples_suite();
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.report["results"]["failed"], 0);
    EXPECT_GE(r.report["results"]["entries"].size(), 11u);
    for (const auto& e : r.report["results"]["entries"]) EXPECT_TRUE(e["pass"].get<bool>()) << e.dump();
}

TEST(ExamplesSuite, MismatchIsReported) {
    EXPECT_TRUE(entry_matches(json(0.5), json(0.5 + 1e-10), 1e-9));
    EXPECT_FALSE(entry_matches(json(0.5), json(0.5 + 1e-8), 1e-9));
    EXPECT_FALSE(entry_matches(json(0), json("certified"), 0.0));
    EXPECT_TRUE(entry_matches(json(5), json(5), 0.0));
}

TEST(Cli, ExitCodesPerSubcommand) {
    EXPECT_EQ(cli("--canonical certify --f='-0.25*x1^2' --target=1,1 --target=-1,0"), 0);
    EXPECT_EQ(cli("--canonical certify --f='-0.5*x1^2' --target=0,1"), 2);
    EXPECT_EQ(cli("certify-subdiff --f='abs(x1)' --convex --engine convex1d --target=0,0.5"), 0);
    EXPECT_EQ(cli("certify-subdiff --f='-0.5*x1^2' --a0 0.5 --target=0,1"), 1);
    EXPECT_EQ(cli("minty --ladder 10,100"), 0);
    EXPECT_EQ(cli("minty --graph neg_identity --ystar 1"), 2);
    EXPECT_EQ(cli("hyperdense --graph identity --y 1 --ystar 0.5"), 0);
    EXPECT_EQ(cli("polar --graph identity --point=1,-1"), 0);
    EXPECT_EQ(cli("polar --graph identity_halfline --region --audit --box=-2,-2,2,2 --grid 100"), 2);
    EXPECT_EQ(cli("ekeland --f 'x1^2' --u 0.1 --alpha 1 --beta 0.1"), 0);
    EXPECT_EQ(cli("br --f 'abs(x1)' --convex --u 0.05 --ustar 0.9 --alpha 0.5 --beta 0.5"), 0);
    EXPECT_EQ(cli("run " + job_path("certify_quadratic_half.json")), 2);
    EXPECT_EQ(cli("run " + job_path("malformed_missing_space.json")), 1);
    EXPECT_EQ(cli("run /nonexistent.json"), 1);
    EXPECT_EQ(cli("--space p7 examples"), 1);
    EXPECT_EQ(cli("nosuchcommand"), 1);
}

TEST(Cli, OutputsAndCanonical) {
    const std::string dir = testing::TempDir();
    EXPECT_EQ(cli("--canonical --json-out " + dir + "r.json --csv-out " + dir + "r.csv polar --graph " +
                  "'{\"operator\":\"cos\",\"sample\":4001}' --region --box=-10,-2,10,2 --grid 40"),
              0);
    const json r = read_json_file(dir + "r.json");
    EXPECT_EQ(r["results"]["region"]["cells_in"], 0);
    EXPECT_FALSE(r.contains("wall_time_s"));
    std::ifstream csv(dir + "r.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "x,xstar,in");

    std::string a, b;
    EXPECT_EQ(cli("--canonical minty --ladder 10", &a), 0);
    EXPECT_EQ(cli("--canonical minty --ladder 10", &b), 0);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a.empty());
}
