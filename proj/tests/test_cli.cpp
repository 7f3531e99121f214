#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "pmc/config.hpp"
#include "pmc/report.hpp"
#include "pmc/run.hpp"

using namespace pmc;
using nlohmann::json;

namespace {

std::string config(const std::string& name) { return std::string(PMC_CONFIG_DIR) + "/" + name; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pmcgraph_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  int code;
  json report;
};

Outcome run_to_file(const std::string& sub, const std::string& cfg,
                    std::vector<std::string> overrides = {}, const std::string& tag = "r") {
  RunOptions opt;
  opt.subcommand = sub;
  opt.config_path = config(cfg);
  opt.out_report = scratch(tag + ".json").string();
  opt.overrides = std::move(overrides);
  std::ostringstream log;
  const int code = run(opt, log);
  return {code, json::parse(slurp(*opt.out_report))};
}

json minimal_doc() { return json::parse(slurp(config("minimal.json"))); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("overrides") {
    json doc = minimal_doc();
    apply_override(doc, "solver.tol_inner=1e-9");
    apply_override(doc, "pmc.expr=0.25*sin(z)");
    apply_override(doc, "grid.shape=[17,17]");
    CHECK(doc["solver"]["tol_inner"].get<double>() == 1e-9);
    CHECK(doc["pmc"]["expr"] == "0.25*sin(z)");
    json typed = doc;
    apply_override(typed, "grid.topology=dirichlet");
    CHECK(typed["grid"]["topology"] == "dirichlet");
    CHECK_THROWS_AS(parse_config(typed), ConfigError);
    typed = doc;
    apply_override(typed, "pmc.expr=0.5");
    CHECK(typed["pmc"]["expr"] == 0.5);
    CHECK(parse_config(typed).pmc.expr == "0.5");
    const RunConfig cfg = parse_config(doc);
    CHECK(cfg.grid.shape[0] == 17);
    CHECK(cfg.solver.tol_inner == 1e-9);
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
  }

  TEST_CASE("validation") {
    json doc = minimal_doc();
    doc["colour"] = "blue";
    CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("colour"), ConfigError);

    doc = minimal_doc();
    doc["version"] = 2;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["solver"]["tol_inner"] = -1;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["grid"]["shape"] = {1, 33};
    CHECK_THROWS(parse_config(doc));

    CHECK_THROWS_AS(load_config(config("does_not_exist.json")), ConfigError);
  }

  TEST_CASE("canonical json") {
    const json j = {{"b", 0.1}, {"a", {1, 2}}, {"c", std::nan("")}};
    const std::string s = canonical_json(j);
    CHECK(s.find("\"a\"") < s.find("\"b\""));
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(s.find("null") != std::string::npos);
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("solve succeeds and is deterministic") {
    const Outcome a = run_to_file("solve", "minimal.json", {"grid.shape=[17,17]"}, "det_a");
    const Outcome b = run_to_file("solve", "minimal.json", {"grid.shape=[17,17]"}, "det_b");
    CHECK(a.code == kExitOk);
    CHECK(a.report["converged"] == true);
    CHECK(a.report["artifact_version"] == "1.0.0");
    CHECK(a.report["config_hash"].get<std::string>().size() == 64);
    CHECK(slurp(scratch("det_a.json")) == slurp(scratch("det_b.json")));

    const Outcome c = run_to_file("solve", "minimal.json", {"grid.shape=[9,9]"}, "det_c");
    CHECK(c.report["config_hash"] != a.report["config_hash"]);
  }

  TEST_CASE("exit codes") {
    CHECK(run_to_file("solve", "minimal.json", {"solver.tol_inner=-1"}).code == kExitConfigInvalid);
    CHECK(run_to_file("frobnicate", "minimal.json").code == kExitConfigInvalid);
    CHECK(run_to_file("check-barrier", "minimal.json", {"grid.shape=[9,9]"}).code == kExitOk);

    const Outcome swapped = run_to_file("check-barrier", "minimal.json",
                                        {"grid.shape=[9,9]", "barrier.u1=0.5", "barrier.u0=-0.5"});
    CHECK(swapped.code == kExitCheckFailed);
    CHECK(swapped.report.contains("violating_node"));

    const Outcome bad_barrier = run_to_file(
        "solve", "minimal.json", {"grid.shape=[9,9]", "pmc.expr=5", "solver.barrier_allowance=0"});
    CHECK(bad_barrier.code == kExitSolverFailure);

    CHECK(run_to_file("check-monotone", "torus_sine.json").code == kExitCheckFailed);
    CHECK(run_to_file("check-monotone", "horosphere.json").code == kExitOk);

    RunOptions opt;
    opt.subcommand = "solve";
    opt.config_path = config("minimal.json");
    opt.overrides = {"grid.shape=[9,9]"};
    opt.out_report = "/nonexistent_dir/report.json";
    std::ostringstream log;
    CHECK(run(opt, log) == kExitConfigInvalid);
  }

  TEST_CASE("failed solve keeps the best iterate") {
    const Outcome o = run_to_file("solve", "torus_sine.json",
                                  {"grid.shape=[16,16]", "solver.max_outer=2"}, "failed");
    CHECK(o.code == kExitSolverFailure);
    CHECK(o.report["converged"] == false);
    CHECK(o.report["residual_history"].size() >= 1);
    REQUIRE(o.report["best_iterate_path"].is_string());
    CHECK(std::filesystem::exists(o.report["best_iterate_path"].get<std::string>()));
    CHECK(o.report.contains("solve"));
  }

  TEST_CASE("quasi solve reports tilt and graphicality") {
    const Outcome o = run_to_file("solve", "quasi.json", {"grid.shape=[16,16]"}, "quasi");
    CHECK(o.code == kExitOk);
    CHECK(o.report["min_theta"].get<double>() > 0.0);
    CHECK(o.report["graphical"] == true);

    const Outcome bad = run_to_file("solve", "quasi.json", {"grid.shape=[16,16]", "pmc.h1=z"});
    CHECK(bad.code == kExitSolverFailure);
  }

  TEST_CASE("reparam and transform") {
    const Outcome r = run_to_file("reparam", "warped.json", {}, "reparam");
    CHECK(r.code == kExitOk);
    CHECK(r.report["max_round_trip_error"].get<double>() <= 1e-8);
    CHECK(r.report["s_strictly_increasing"] == true);

    const Outcome t = run_to_file("transform", "horosphere.json", {"transform.samples=3"}, "tr");
    CHECK(t.code == kExitOk);
    CHECK(t.report["round_trip_error"].get<double>() <= 1e-12);
    CHECK(run_to_file("transform", "minimal.json").code == kExitConfigInvalid);
  }

  TEST_CASE("eval-residual reads a field written by solve") {
    RunOptions opt;
    opt.subcommand = "solve";
    opt.config_path = config("minimal.json");
    opt.overrides = {"grid.shape=[9,9]"};
    opt.out_report = scratch("field_solve.json").string();
    opt.out_field = scratch("field.csv").string();
    std::ostringstream log;
    REQUIRE(run(opt, log) == kExitOk);

    const Outcome e = run_to_file("eval-residual", "minimal.json",
                                  {"inputs.field=" + *opt.out_field}, "eval");
    CHECK(e.code == kExitOk);
    CHECK(e.report["sup_residual"].get<double>() <= 1e-8);
    CHECK(run_to_file("eval-residual", "minimal.json").code == kExitConfigInvalid);
  }

  TEST_CASE("diagnose") {
    const Outcome d = run_to_file("diagnose", "minimal.json",
                                  {"grid.shape=[9,9]", "diagnose.levels=2"}, "diag");
    CHECK(d.code == kExitOk);
    CHECK(d.report["diagnostics"]["suspected_non_graphical"] == false);
  }
}
