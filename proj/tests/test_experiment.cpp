#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cluster_games/experiment.hpp"

using namespace cluster_games;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = CLUSTER_GAMES_CONFIG_DIR;

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("config schema errors") {
  CHECK_THROWS_AS(load_json_file(kConfigDir + "/does_not_exist.json"),
                  ConfigError);

  CHECK_THROWS_AS(build_experiment(json::parse("{}")), ConfigError);
  CHECK_THROWS_AS(
      build_experiment(json::parse(R"({"game": {}, "scenario": {}})")),
      ConfigError);
  CHECK_THROWS_AS(build_experiment(json::parse(
                      R"({"game": {"type": "mystery",
                           "agents_per_cluster": [1],
                           "dims_per_cluster": [1]}})")),
                  ConfigError);
  CHECK_THROWS_AS(build_experiment(json::parse(
                      R"({"game": {"type": "random_quadratic",
                           "agents_per_cluster": [1],
                           "dims_per_cluster": [1]},
                          "graph": {"inter": {"type": "hypercube"}}})")),
                  ConfigError);
  CHECK_THROWS_AS(build_experiment(json::parse(
                      R"({"game": {"type": "random_quadratic",
                           "agents_per_cluster": [1],
                           "dims_per_cluster": [1]},
                          "solver": {"gamma": 2.0}})")),
                  ConfigError);

  // Exit code 1 through the library entry point.
  CHECK(run_experiment(kConfigDir + "/does_not_exist.json") == 1);
}

TEST_CASE("explicit edge-list graph records") {
  const json j = json::parse(
      R"({"type": "edges", "nodes": 2,
          "edges": [[0, 0], [1, 1], [0, 1], [1, 0]]})");
  const DirectedGraph g = graph_from_json(j, 2, "graph.inter");
  CHECK(g.has_all_self_loops());
  CHECK(is_strongly_connected(g));

  CHECK_THROWS_AS(graph_from_json(j, 3, "graph.inter"), ConfigError);
  const json dup = json::parse(
      R"({"type": "edges", "nodes": 2, "edges": [[0, 1], [0, 1]]})");
  CHECK_THROWS_AS(graph_from_json(dup, 2, "graph.inter"), ConfigError);
}

TEST_CASE("set records parse") {
  const ConvexSet box = set_from_json(json::parse(
      R"({"type": "box", "lower": [0, "-inf"], "upper": [1, null]})"));
  Eigen::VectorXd x(2);
  x << 5, -7;
  const Eigen::VectorXd p = box.project(x);
  CHECK(p(0) == 1.0);
  CHECK(p(1) == -7.0);

  CHECK_THROWS_AS(set_from_json(json::parse(R"({"type": "cone"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      set_from_json(json::parse(
          R"({"type": "box", "lower": [0], "upper": [1, 2]})")),
      ConfigError);
}

TEST_CASE("scenario JSON round trip") {
  const MicrogridScenario sc =
      scenario_generate(ScenarioParams::desk_default(), 42);
  json j = sc;
  const MicrogridScenario back = j.get<MicrogridScenario>();
  CHECK(back.demand == sc.demand);
  CHECK(back.mgs[2].generators[1].b == sc.mgs[2].generators[1].b);
  CHECK(back.mgs[0].batteries[0].eta == sc.mgs[0].batteries[0].eta);

  json cfg;
  cfg["explicit"] = j;
  const MicrogridScenario from_cfg = scenario_from_config(cfg);
  CHECK(from_cfg.demand == sc.demand);
}

TEST_CASE("bundled quadratic_small experiment") {
  const fs::path dir = fresh_dir("cg_quadratic_small");
  RunOverrides overrides;
  overrides.outdir = dir.string();
  const int code =
      run_experiment(kConfigDir + "/quadratic_small.json", overrides);
  CHECK(code == 0);

  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(first_line(metrics) ==
        "round,optimality_gap,consensus_error,tracking_error,iterate_change");

  // Final recorded gap is tiny.
  const auto last_nl = metrics.find_last_of('\n', metrics.size() - 2);
  std::istringstream last_row(metrics.substr(last_nl + 1));
  std::string cell;
  std::getline(last_row, cell, ',');  // round
  std::getline(last_row, cell, ',');  // optimality_gap
  CHECK(std::stod(cell) <= 1e-8);

  // The equilibrium file carries the hand-computed solution.
  std::istringstream ne(slurp(dir / "ne.csv"));
  std::getline(ne, cell, ',');
  CHECK(std::stod(cell) == Approx(8.0 / 15.0).margin(1e-9));
  std::getline(ne, cell, ',');
  CHECK(std::stod(cell) == Approx(28.0 / 15.0).margin(1e-9));

  const std::string svg = slurp(dir / "convergence.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(fs::exists(dir / "costs.csv"));
  CHECK(fs::exists(dir / "z_final.csv"));

  // Bit-identical rerun.
  const fs::path dir2 = fresh_dir("cg_quadratic_small_2");
  overrides.outdir = dir2.string();
  CHECK(run_experiment(kConfigDir + "/quadratic_small.json", overrides) == 0);
  CHECK(slurp(dir2 / "metrics.csv") == metrics);
  CHECK(slurp(dir2 / "ne.csv") == slurp(dir / "ne.csv"));
}

TEST_CASE("gamma ablation artifact") {
  const fs::path dir = fresh_dir("cg_ablation");
  RunOverrides overrides;
  overrides.outdir = dir.string();
  overrides.max_rounds = 4000;
  const int code =
      run_gamma_ablation(kConfigDir + "/quadratic_small.json", overrides);
  CHECK(code == 0);

  for (const char* tag : {"0.1", "0.5", "0.9", "1.0"})
    CHECK(fs::exists(dir / (std::string("metrics_gamma_") + tag + ".csv")));

  const std::string combined = slurp(dir / "ablation_metrics.csv");
  CHECK(first_line(combined) ==
        "gamma,round,optimality_gap,consensus_error,tracking_error,"
        "iterate_change");

  // Identical seeds give identical round-0 metrics across the legs.
  std::string row01, row10;
  std::istringstream lines(combined);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("0.1,0,", 0) == 0) row01 = line.substr(4);
    if (line.rfind("1.0,0,", 0) == 0) row10 = line.substr(4);
  }
  REQUIRE(!row01.empty());
  CHECK(row01 == row10);

  const std::string summary = slurp(dir / "ablation_summary.csv");
  CHECK(first_line(summary) == "gamma,outcome,rounds,final_gap");
  CHECK(summary.find("\n0.5,converged") != std::string::npos);
  CHECK(fs::exists(dir / "ablation.svg"));
}
