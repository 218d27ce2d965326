#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nhclt/experiment.hpp"

using namespace nhclt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("nhclt_test_" + name);
    fs::remove_all(p);
    return p;
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
    for (const auto& e : errors)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("minimal inventory config gets defaults") {
    auto p = parse_config(R"({"kind":"inventory","c":0.1,"c_h":0.2,"c_p":0.9,"n":20})");
    REQUIRE(p.config);
    const auto& r = p.config->resolved;
    CHECK(r.at("grid_step").get<double>() == doctest::Approx(1.0 / 400.0));
    CHECK(r.at("demand").at("kind") == "uniform");
    CHECK(r.at("start_state").get<double>() == 0.0);
    CHECK(r.at("seed") == 1);
    CHECK(p.config->kind == ExperimentKind::Inventory);
}

TEST_CASE("config violations are all reported") {
    auto p = parse_config(R"({"kind":"inventory","c":0.95,"c_h":0.2,"c_p":0.9,"extra":true,"N":5})");
    CHECK_FALSE(p.config);
    CHECK(mentions(p.errors, "c_p"));
    CHECK(mentions(p.errors, "config.n: required"));
    CHECK(mentions(p.errors, "config.extra: unknown field"));
    CHECK(mentions(p.errors, "config.N"));
    CHECK(p.errors.size() >= 4);
}

TEST_CASE("unknown kind names the allowed kinds") {
    auto p = parse_config(R"({"kind":"bogus"})");
    CHECK_FALSE(p.config);
    CHECK(mentions(p.errors, "allowed: coeff, decompose, inventory, altsub, clt, counterexample"));
    auto m = parse_config("{not json");
    CHECK(mentions(m.errors, "malformed JSON"));
    auto c = parse_config(R"({"kind":"altsub","n":5})", std::string("clt"));
    CHECK(mentions(c.errors, "conflicts with subcommand"));
}

TEST_CASE("model block validation") {
    auto p = parse_config(R"({"kind":"clt","n":10,"N":200,"model":{"type":"counterexample","grid":[1.0]}})");
    CHECK(mentions(p.errors, "single-point grid"));
    auto q = parse_config(R"({"kind":"clt","n":10,"N":200,"model":{"type":"random","m":3}})");
    CHECK(mentions(q.errors, "config.model.m"));
    auto ok = parse_config(R"({"kind":"clt","n":10,"N":200,"model":{"type":"random"}})", std::nullopt, 9);
    REQUIRE(ok.config);
    CHECK(ok.config->seed == 9);
    CHECK(ok.config->resolved.at("model").at("seed") == 9);
}

TEST_CASE("counterexample run: even n is degenerate") {
    auto p = parse_config(R"({"kind":"counterexample","n":8,"N":300})");
    REQUIRE(p.config);
    auto cfg = *p.config;
    cfg.out_dir = scratch("even");
    auto res = run_experiment(cfg);
    CHECK(res.exit_code == kExitPass);
    const auto& r = res.report.at("results");
    CHECK(r.at("exact").at("var_Sn").get<double>() == 0.0);
    CHECK(r.at("clt").at("degenerate").get<bool>());
    CHECK(res.report.at("config") == p.config->original);
    CHECK(res.report.at("version") == NHCLT_VERSION);
    CHECK(fs::exists(cfg.out_dir / "report.json"));
    CHECK_FALSE(fs::exists(cfg.out_dir / "report.json.tmp"));
}

TEST_CASE("reruns are byte identical for any worker count") {
    const char* text = R"({"kind":"altsub","n":60,"grid_points":101,"N":400,"seed":5})";
    auto p = parse_config(text);
    REQUIRE(p.config);
    auto a = *p.config, b = *p.config;
    a.out_dir = scratch("w1");
    a.workers = 1;
    b.out_dir = scratch("w3");
    b.workers = 3;
    auto ra = run_experiment(a), rb = run_experiment(b);
    CHECK(ra.exit_code == rb.exit_code);
    for (const char* f : {"report.json", "totals.csv", "thresholds.csv", "histogram.csv"})
        CHECK(slurp(a.out_dir / f) == slurp(b.out_dir / f));
}

TEST_CASE("certificate failure and runtime error exit codes") {
    // Impossible KS threshold: certificate failure.
    auto p = parse_config(R"({"kind":"clt","n":6,"N":200,"ks_max":1e-9,"model":{"type":"random","states":3}})");
    REQUIRE(p.config);
    CHECK(run_experiment(*p.config).exit_code == kExitCertificateFail);
    auto q = parse_config(R"({"kind":"coeff","random":{"states":3,"n":4,"count":5}})");
    REQUIRE(q.config);
    auto rq = run_experiment(*q.config);
    CHECK(rq.exit_code == kExitPass);
    // Grid too coarse for the threshold solver: runtime error with an error report.
    auto bad = parse_config(R"({"kind":"altsub","n":5,"grid_points":5})");
    REQUIRE(bad.config);
    auto rb = run_experiment(*bad.config);
    CHECK(rb.exit_code == kExitRuntimeError);
    CHECK(rb.report.contains("error"));
}

TEST_CASE("decompose run on a random instance") {
    auto p = parse_config(R"({"kind":"decompose","n":6,"model":{"type":"random","states":3,"m":1}})");
    REQUIRE(p.config);
    auto cfg = *p.config;
    cfg.out_dir = scratch("dec");
    auto res = run_experiment(cfg);
    CHECK(res.exit_code == kExitPass);
    CHECK(fs::exists(cfg.out_dir / "decomposition.csv"));
    CHECK(res.report.at("certificates").size() > 10);
}
