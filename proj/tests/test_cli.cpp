#include "catch_amalgamated.hpp"

#include "starrisk/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace starrisk;
using namespace starrisk::cli;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status;
    std::string out;
    std::string err;
    Json report() const { return Json::parse(status == 2 ? err : out); }
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / ("starrisk_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

Outcome run_text(const std::string& command, const std::string& csv, const std::string& spec,
                 std::uint64_t seed = 20210) {
    RunConfig cfg;
    cfg.command = command;
    if (!csv.empty()) cfg.input = write_file("in.csv", csv);
    cfg.spec = write_file("spec.json", spec);
    cfg.seed = seed;
    std::ostringstream out, err;
    const int status = run(cfg, out, err);
    return {status, out.str(), err.str()};
}

const char* kUniform4 = "state,prob,a,k\ns1,0.25,1,7\ns2,0.25,2,7\ns3,0.25,3,7\ns4,0.25,4,7\n";

Outcome run_binary(const std::string& args) {
    const auto out_path = (scratch() / "stdout.txt").string();
    const auto err_path = (scratch() / "stderr.txt").string();
    const std::string cmd = std::string(STARRISK_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int raw = std::system(cmd.c_str());
    auto slurp = [](const std::string& p) {
        std::ifstream f(p);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    return {WEXITSTATUS(raw), slurp(out_path), slurp(err_path)};
}

}  // namespace

TEST_CASE("csv parsing") {
    std::istringstream ok("state,prob,x,y\nup,0.3,1,2\n\ndown,0.7,-1,4.5\n");
    const auto sc = parse_csv(ok);
    CHECK(sc.columns == std::vector<std::string>{"x", "y"});
    CHECK(sc.states == std::vector<std::string>{"up", "down"});
    CHECK(sc.column("y")[1] == 4.5);
    CHECK(sc.space->prob(0) == 0.3);
    CHECK_THROWS_AS(sc.column("z"), ArgumentError);

    std::istringstream bad_header("name,p,x\na,1,2\n");
    CHECK_THROWS_AS(parse_csv(bad_header), ParseError);
    std::istringstream bad_number("state,prob,x\na,0.5,1\nb,0.5,abc\n");
    try {
        parse_csv(bad_number);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("row 3"));
        CHECK_THAT(e.what(), ContainsSubstring("x"));
    }
    std::istringstream short_row("state,prob,x\na,0.5\n");
    CHECK_THROWS_AS(parse_csv(short_row), ParseError);
    std::istringstream bad_sum("state,prob,x\na,0.5,1\nb,0.4,2\n");
    CHECK_THROWS_AS(parse_csv(bad_sum), ValidationError);
    std::istringstream dup("state,prob,x,x\na,1,1,2\n");
    CHECK_THROWS_AS(parse_csv(dup), ParseError);
    std::istringstream empty("state,prob,x\n");
    CHECK_THROWS_AS(parse_csv(empty), ParseError);
}

TEST_CASE("spec parsing") {
    SpecParser p{InfConvConfig{}};
    const auto ms = p.parse(Json::parse(R"({"measures": [
        {"name": "v", "kind": "var", "beta": 0.5},
        {"kind": "es", "beta": 0.5},
        {"name": "s", "kind": "sup", "members": ["v", {"kind": "mean"}]},
        {"name": "c", "kind": "choquet", "members": ["v", "s"], "capacity": {"type": "order_statistic", "r": 1}},
        {"name": "e", "kind": "entropic", "lambda": 2}
    ]})"));
    REQUIRE(ms.size() == 5);
    CHECK(ms[0].name() == "v");
    const LossProfile x(StateSpace::uniform(4), {1, 2, 3, 4});
    CHECK(ms[0](x) == 2);
    CHECK(ms[1](x) == 3.5);
    CHECK(ms[2](x) == 2.5);
    CHECK(ms[3](x) == 2);
    SpecParser q{InfConvConfig{}};
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"measures": []})")), ParseError);
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"items": []})")), ParseError);
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"measures": [{"kind": "var"}]})")), ParseError);
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"measures": [{"kind": "var", "beta": "high"}]})")), ParseError);
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"measures": [{"kind": "sup", "members": ["nobody"]}]})")), ParseError);
    CHECK_THROWS_AS(q.parse(Json::parse(R"({"measures": [{"kind": "var", "beta": 1.5}]})")), DomainError);
}

TEST_CASE("eval examples") {
    const auto one = run_text("eval", kUniform4, R"({"measures": [{"name": "v", "kind": "var", "beta": 0.5}], "columns": ["a"]})");
    REQUIRE(one.status == 0);
    const auto r1 = one.report();
    CHECK(r1["results"][0]["value"] == 2);
    const auto two = run_text("eval", kUniform4, R"({"measures": [{"kind": "var", "beta": 0.5}, {"kind": "es", "beta": 0.5},
        {"kind": "entropic", "lambda": 1}, {"kind": "worst_case"}]})");
    REQUIRE(two.status == 0);
    const auto r2 = two.report();
    REQUIRE(r2["results"].size() == 8);
    CHECK(r2["results"][0]["column"] == "a");
    CHECK(r2["results"][0]["value"] == 2);
    CHECK(r2["results"][2]["value"] == 3.5);
    for (std::size_t i = 0; i < 8; ++i) {
        if (r2["results"][i]["column"] == "k") CHECK(r2["results"][i]["value"] == 7);
    }
    CHECK(r2["seed"] == 20210);
}

TEST_CASE("report numbers match library calls to the emitted digits") {
    const auto o = run_text("eval", "state,prob,x\na,0.3,0.1\nb,0.3,1.7\nc,0.4,-2.3\n",
                            R"({"measures": [{"kind": "entropic", "lambda": 0.7}, {"kind": "es", "beta": 0.35}]})");
    REQUIRE(o.status == 0);
    const auto r = o.report();
    const LossProfile x(StateSpace::make({0.3, 0.3, 0.4}), {0.1, 1.7, -2.3});
    CHECK(r["results"][0]["value"].get<double>() == round15(entropic_measure(0.7)(x)));
    CHECK(r["results"][1]["value"].get<double>() == round15(es_measure(0.35)(x)));
    CHECK(num(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("exit statuses") {
    const std::string var_spec = R"({"measures": [{"kind": "var", "beta": 0.5}], "properties": [%s], "probes": 80})";
    auto with_props = [&](const std::string& p) {
        std::string s = var_spec;
        s.replace(s.find("%s"), 2, p);
        return s;
    };
    CHECK(run_text("axioms", kUniform4, with_props(R"("star_shaped")")).status == 0);
    const auto convex = run_text("axioms", kUniform4, with_props(R"("convex")"));
    REQUIRE(convex.status == 1);
    CHECK(convex.report()["reports"][0]["witness"]["profiles"].size() == 2);
    const auto bad_prop = run_text("axioms", kUniform4, with_props(R"("lipschitz")"));
    CHECK(bad_prop.status == 2);
    CHECK(bad_prop.report()["error"] == "argument_error");
    const auto bad_csv = run_text("eval", "state,prob,x\na,0.5,1\nb,0.5,\n", R"({"measures": [{"kind": "mean"}]})");
    CHECK(bad_csv.status == 2);
    CHECK(bad_csv.report()["error"] == "parse_error");
    CHECK(run_text("eval", "state,prob,x\na,0.5,1\nb,0.6,1\n", R"({"measures": [{"kind": "mean"}]})").report()["error"] ==
          "validation_error");
    CHECK(run_text("eval", kUniform4, "{not json").status == 2);
    CHECK(run_text("eval", "", R"({"measures": [{"kind": "mean"}]})").status == 2);
    CHECK(run_text("frobnicate", kUniform4, R"({"measures": [{"kind": "mean"}]})").status == 2);
    const auto refused = run_text("infconv", "state,prob,x\na,0.5,0\nb,0.5,2\n",
                                  R"({"measures": [{"kind": "var", "beta": 0.5}, {"kind": "var", "beta": 0.5}]})");
    CHECK(refused.status == 1);
    CHECK(refused.report()["refused"] == true);
    const auto forced = run_text("infconv", "state,prob,x\na,0.5,0\nb,0.5,2\n",
                                 R"({"measures": [{"kind": "var", "beta": 0.5}, {"kind": "var", "beta": 0.5}],
                                    "normality_override": true})");
    CHECK(forced.status == 0);
}

TEST_CASE("envelope command on an ecb blend") {
    const auto o = run_text("envelope", "",
                            R"({"measures": [{"kind": "ecb_blend", "weight": 0.5,
                                "members": [{"kind": "es", "beta": 0.5}, {"kind": "es", "beta": 0.9}]}],
                                "probes": 20, "random_ys": 10})");
    REQUIRE(o.status == 0);
    const auto r = o.report();
    CHECK(r["envelopes"][0]["verdict"] == "holds_on_sample");
    CHECK(r["envelopes"][0]["rows"].size() == 20);
}

TEST_CASE("optimize and margin commands") {
    const auto o = run_text("optimize", "state,prob,a,b\ns1,0.25,1,0\ns2,0.25,2,0\ns3,0.25,3,5\ns4,0.25,4,5\n",
                            R"({"measures": [{"kind": "var", "beta": 0.5}], "robust": true,
                                "portfolio": {"pricing": [0.25, 0.25, 0.25, 0.25], "budget": 10}})");
    REQUIRE(o.status == 0);
    const auto r = o.report();
    CHECK(r["actions"][0]["argmin"] == "b");
    CHECK(r["actions"][0]["value"] == 0);
    CHECK(r["portfolio"][0]["routes_agree"] == true);
    const auto m = run_text("margin", "state,prob,x\na,0.5,0\nb,0.5,2\n",
                            R"({"measures": [{"kind": "es", "beta": 0.5}, {"kind": "worst_case"}], "admissible": [[0], [1]]})");
    REQUIRE(m.status == 0);
    CHECK(m.report()["margins"][0]["margin"] == 2);
    CHECK(run_text("margin", "state,prob,x\na,0.5,0\nb,0.5,2\n",
                   R"({"measures": [{"kind": "mean"}], "admissible": [[3]]})")
              .status == 2);
}

TEST_CASE("repeated runs are byte identical") {
    const std::string spec = R"({"measures": [{"kind": "var", "beta": 0.75}, {"kind": "es", "beta": 0.5}], "probes": 30})";
    for (const char* c : {"axioms", "aggregate", "envelope"}) {
        const auto a = run_text(c, kUniform4, spec, 99);
        const auto b = run_text(c, kUniform4, spec, 99);
        CHECK(a.status == b.status);
        CHECK(a.out == b.out);
    }
    const auto c1 = run_text("axioms", kUniform4, spec, 1);
    const auto c2 = run_text("axioms", kUniform4, spec, 2);
    CHECK(c1.report()["seed"] != c2.report()["seed"]);
}

TEST_CASE("binary front end") {
    const std::string golden = STARRISK_GOLDEN_DIR;
    const auto ok = run_binary("eval --input " + golden + "/uniform4.csv --spec " + golden + "/eval.spec.json");
    CHECK(ok.status == 0);
    CHECK(Json::parse(ok.out)["results"][1]["value"] == 2);
    CHECK(run_binary("eval --input " + golden + "/uniform4.csv").status == 2);
    CHECK(run_binary("").status == 2);
    const auto out_file = (scratch() / "report.json").string();
    const auto written =
        run_binary("eval --input " + golden + "/uniform4.csv --spec " + golden + "/eval.spec.json --out " + out_file);
    CHECK(written.status == 0);
    CHECK(written.out.empty());
    std::ifstream f(out_file);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == ok.out);
    const auto pretty =
        run_binary("eval --input " + golden + "/uniform4.csv --spec " + golden + "/eval.spec.json --pretty");
    CHECK(Json::parse(pretty.out) == Json::parse(ok.out));
    CHECK(pretty.out.find("\n  ") != std::string::npos);
}
