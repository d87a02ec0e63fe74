#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cluster_games/config.hpp"
#include "cluster_games/csv.hpp"
#include "cluster_games/svg.hpp"

namespace cluster_games {

inline int log_level() {
  static const int level = [] {
    const char* e = std::getenv("CLUSTER_GAMES_LOG");
    return e ? std::atoi(e) : 0;
  }();
  return level;
}

inline void log_note(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[cluster-games] " << msg << "\n";
}

/// CLI-level overrides applied on top of the config file.
struct RunOverrides {
  std::optional<std::string> outdir;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_rounds;
};

/// Everything a run needs, assembled from one config file.
struct BuiltExperiment {
  ClusterGame game;
  WeightMatrix R;
  std::vector<WeightMatrix> Cs;
  SolverConfig solver;
  FixedPointOptions oracle;
  std::string outdir;
  std::optional<MicrogridScenario> scenario;
  std::optional<MicrogridIndex> mg_index;
};

inline BuiltExperiment build_experiment(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("top-level config must be an object");
  const bool has_game = cfg.contains("game");
  const bool has_scenario = cfg.contains("scenario");
  if (has_game == has_scenario)
    throw ConfigError("config needs exactly one of 'game' or 'scenario'");

  std::optional<MicrogridScenario> scenario;
  std::optional<MicrogridIndex> mg_index;
  std::optional<ClusterGame> game;
  if (has_game) {
    game = quadratic_game_from_config(cfg.at("game")).game;
  } else {
    scenario = scenario_from_config(cfg.at("scenario"));
    CompiledMicrogrid compiled = compile_game(*scenario);
    mg_index = compiled.index;
    game = std::move(compiled.game);
  }

  const json graph_cfg =
      cfg.contains("graph") ? cfg.at("graph") : json::object();
  const json inter_cfg = graph_cfg.contains("inter") ? graph_cfg.at("inter")
                                                     : json::object();
  const json intra_cfg = graph_cfg.contains("intra") ? graph_cfg.at("intra")
                                                     : json::object();
  const auto& layout = game->layout();
  const DirectedGraph inter =
      graph_from_json(inter_cfg, layout.agent_count(), "graph.inter");
  WeightMatrix R = [&] {
    try {
      return uniform_row_stochastic(inter);
    } catch (const MissingSelfLoop& e) {
      throw ConfigError(std::string("graph.inter: ") + e.what());
    }
  }();

  std::vector<WeightMatrix> Cs;
  for (int h = 0; h < layout.cluster_count(); ++h) {
    const DirectedGraph intra =
        graph_from_json(intra_cfg, layout.agents_in(h), "graph.intra");
    try {
      Cs.push_back(uniform_column_stochastic(intra));
    } catch (const MissingSelfLoop& e) {
      throw ConfigError(std::string("graph.intra: ") + e.what());
    }
  }

  BuiltExperiment built{
      std::move(*game),
      std::move(R),
      std::move(Cs),
      solver_from_config(cfg.contains("solver") ? cfg.at("solver")
                                                : json::object()),
      oracle_from_config(cfg.contains("oracle") ? cfg.at("oracle")
                                                : json::object()),
      detail::get_or<std::string>(
          cfg.contains("output") ? cfg.at("output") : json::object(),
          "outdir", "out"),
      std::move(scenario),
      std::move(mg_index)};
  return built;
}

/// Consensus estimate of the joint action: cluster blocks averaged over the
/// owning cluster's agents (feasible by convexity of each X_h).
inline Eigen::VectorXd assemble_estimate(const GameLayout& layout,
                                         const Eigen::MatrixXd& z) {
  Eigen::VectorXd x(layout.total_dim());
  for (int h = 0; h < layout.cluster_count(); ++h) {
    Eigen::VectorXd block = Eigen::VectorXd::Zero(layout.dim_of(h));
    for (int i = layout.first_agent(h);
         i < layout.first_agent(h) + layout.agents_in(h); ++i)
      block += z.row(i).segment(layout.offset(h), layout.dim_of(h))
                   .transpose();
    x.segment(layout.offset(h), layout.dim_of(h)) =
        block / layout.agents_in(h);
  }
  return x;
}

namespace detail {

inline constexpr const char* kMetricsHeader =
    "round,optimality_gap,consensus_error,tracking_error,iterate_change";

inline void write_metrics_csv(const std::string& path,
                              const std::vector<RoundMetrics>& metrics) {
  auto out = open_output(path);
  out << kMetricsHeader << "\n";
  for (const auto& m : metrics)
    out << m.round << "," << format_double(m.optimality_gap) << ","
        << format_double(m.consensus_error) << ","
        << format_double(m.tracking_error) << ","
        << format_double(m.iterate_change) << "\n";
}

inline void write_vector_csv(const std::string& path,
                             const Eigen::VectorXd& v) {
  auto out = open_output(path);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << (i ? "," : "") << format_double(v(i));
  out << "\n";
}

struct CostTrace {
  std::vector<int> rounds;
  std::vector<std::vector<double>> costs;  // per record, one entry per cluster
};

inline void write_costs_csv(const std::string& path, const CostTrace& trace) {
  auto out = open_output(path);
  const std::size_t clusters =
      trace.costs.empty() ? 0 : trace.costs.front().size();
  out << "round";
  for (std::size_t h = 0; h < clusters; ++h) out << ",cost_" << (h + 1);
  out << "\n";
  for (std::size_t r = 0; r < trace.rounds.size(); ++r) {
    out << trace.rounds[r];
    for (double c : trace.costs[r]) out << "," << format_double(c);
    out << "\n";
  }
}

inline void write_convergence_svg(const std::string& path,
                                  const std::vector<RoundMetrics>& metrics,
                                  const CostTrace& costs) {
  auto out = open_output(path);
  SvgSeries gap{"optimality gap", "#1f77b4", {}};
  for (const auto& m : metrics)
    gap.points.emplace_back(m.round, m.optimality_gap);

  static const char* palette[] = {"#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf"};
  std::vector<SvgSeries> cost_series;
  const std::size_t clusters =
      costs.costs.empty() ? 0 : costs.costs.front().size();
  for (std::size_t h = 0; h < clusters; ++h) {
    SvgSeries s{"cluster " + std::to_string(h + 1), palette[h % 6], {}};
    for (std::size_t r = 0; r < costs.rounds.size(); ++r)
      s.points.emplace_back(costs.rounds[r], costs.costs[r][h]);
    cost_series.push_back(std::move(s));
  }

  const int w = 640, h = 420;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * w
      << "\" height=\"" << h << "\">\n";
  std::ostringstream left, right;
  write_line_chart(left, {gap},
                   {"Optimality gap", "round", "||z - x*|| (phi-weighted)",
                    true, w, h});
  write_line_chart(right, cost_series,
                   {"Per-cluster total cost", "round", "cost", false, w, h});
  out << "<svg x=\"0\" y=\"0\">" << left.str() << "</svg>\n";
  out << "<svg x=\"" << w << "\" y=\"0\">" << right.str() << "</svg>\n";
  out << "</svg>\n";
}

inline void write_schedule_csv(const std::string& path,
                               const MicrogridScenario& sc,
                               const MicrogridIndex& idx,
                               const Eigen::VectorXd& x) {
  auto out = open_output(path);
  out << "t,unit,kind,value\n";
  for (int t = 1; t <= sc.horizon; ++t) {
    for (int h = 0; h < sc.mg_count(); ++h) {
      const std::string mg = "mg" + std::to_string(h + 1);
      for (int g = 0; g < static_cast<int>(sc.mgs[h].generators.size()); ++g)
        out << t << "," << mg << "_gen" << (g + 1) << ",PR,"
            << format_double(x(idx.pr(h, g, t))) << "\n";
      for (int b = 0; b < static_cast<int>(sc.mgs[h].batteries.size()); ++b)
        out << t << "," << mg << "_bat" << (b + 1) << ",PB,"
            << format_double(x(idx.pb(h, b, t))) << "\n";
      out << t << "," << mg << ",PG," << format_double(x(idx.pg(h, t)))
          << "\n";
      out << t << "," << mg << ",PS," << format_double(x(idx.ps(h, t)))
          << "\n";
    }
  }
}

inline void write_state_csv(const std::string& path,
                            const Eigen::MatrixXd& z) {
  auto out = open_output(path);
  write_matrix_csv(out, z);
}

/// Cost of cluster h at the assembled estimate: the MG objective for
/// microgrid runs, the cluster average cost otherwise.
inline double cluster_total_cost(const BuiltExperiment& built, int h,
                                 const Eigen::VectorXd& x) {
  if (built.scenario) return mg_objective(*built.scenario, h, x);
  return built.game.cluster_cost(h, x);
}

}  // namespace detail

/// Loads a config, computes the full-information equilibrium, runs the
/// distributed solver against it, and writes metrics.csv, ne.csv,
/// costs.csv, convergence.svg, z_final.csv and (for microgrid runs)
/// schedule.csv into the output directory. Exit codes: 0 converged,
/// 1 config error, 2 no convergence.
inline int run_experiment(const std::string& config_path,
                          const RunOverrides& overrides = {}) {
  std::optional<BuiltExperiment> maybe_built;
  try {
    json cfg = load_json_file(config_path);
    maybe_built = build_experiment(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  BuiltExperiment& built = *maybe_built;
  if (overrides.outdir) built.outdir = *overrides.outdir;
  if (overrides.seed) built.solver.seed = *overrides.seed;
  if (overrides.max_rounds) built.solver.max_rounds = *overrides.max_rounds;

  std::filesystem::create_directories(built.outdir);
  const auto path = [&](const std::string& name) {
    return (std::filesystem::path(built.outdir) / name).string();
  };

  log_note("computing full-information equilibrium");
  Eigen::VectorXd xstar;
  try {
    xstar = fixed_point_ne(built.game, built.oracle);
  } catch (const NoConvergence& e) {
    std::cerr << "equilibrium oracle failed: " << e.what() << "\n";
    return 2;
  }
  detail::write_vector_csv(path("ne.csv"), xstar);

  detail::CostTrace costs;
  const RecordHook hook = [&](const SolverState& state,
                              const RoundMetrics& m) {
    const Eigen::VectorXd x = assemble_estimate(built.game.layout(), state.z);
    std::vector<double> row;
    for (int h = 0; h < built.game.layout().cluster_count(); ++h)
      row.push_back(detail::cluster_total_cost(built, h, x));
    costs.rounds.push_back(m.round);
    costs.costs.push_back(std::move(row));
  };

  log_note("running distributed solver");
  bool converged = false;
  std::vector<RoundMetrics> metrics;
  Eigen::MatrixXd z_final;
  try {
    RunResult result =
        run(built.game, built.R, built.Cs, built.solver, xstar, hook);
    converged = result.converged;
    metrics = std::move(result.metrics);
    z_final = std::move(result.state.z);
  } catch (const NonFiniteIterate& e) {
    std::cerr << "solver diverged: " << e.what() << "\n";
    detail::write_metrics_csv(path("metrics.csv"), e.metrics());
    detail::write_costs_csv(path("costs.csv"), costs);
    return 2;
  }

  detail::write_metrics_csv(path("metrics.csv"), metrics);
  detail::write_costs_csv(path("costs.csv"), costs);
  detail::write_convergence_svg(path("convergence.svg"), metrics, costs);
  detail::write_state_csv(path("z_final.csv"), z_final);
  if (built.scenario) {
    const Eigen::VectorXd x =
        assemble_estimate(built.game.layout(), z_final);
    detail::write_schedule_csv(path("schedule.csv"), *built.scenario,
                               *built.mg_index, x);
  }
  log_note(converged ? "converged" : "stopped at max_rounds");
  return converged ? 0 : 2;
}

/// Repeats the configured experiment for gamma in {0.1, 0.5, 0.9, 1.0}.
/// Divergence of the gamma = 1 leg is recorded in the summary rather than
/// failing the command. Exit codes: 0 when every gamma < 1 leg converged,
/// 1 config error, 2 otherwise.
inline int run_gamma_ablation(const std::string& config_path,
                              const RunOverrides& overrides = {}) {
  std::optional<BuiltExperiment> maybe_built;
  try {
    json cfg = load_json_file(config_path);
    maybe_built = build_experiment(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  BuiltExperiment& built = *maybe_built;
  if (overrides.outdir) built.outdir = *overrides.outdir;
  if (overrides.seed) built.solver.seed = *overrides.seed;
  if (overrides.max_rounds) built.solver.max_rounds = *overrides.max_rounds;

  std::filesystem::create_directories(built.outdir);
  const auto path = [&](const std::string& name) {
    return (std::filesystem::path(built.outdir) / name).string();
  };

  log_note("computing full-information equilibrium");
  Eigen::VectorXd xstar;
  try {
    xstar = fixed_point_ne(built.game, built.oracle);
  } catch (const NoConvergence& e) {
    std::cerr << "equilibrium oracle failed: " << e.what() << "\n";
    return 2;
  }
  detail::write_vector_csv(path("ne.csv"), xstar);

  const std::vector<double> gammas = {0.1, 0.5, 0.9, 1.0};
  auto combined = open_output(path("ablation_metrics.csv"));
  combined << "gamma," << detail::kMetricsHeader << "\n";
  auto summary = open_output(path("ablation_summary.csv"));
  summary << "gamma,outcome,rounds,final_gap\n";

  std::vector<SvgSeries> gap_series;
  static const char* palette[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728"};
  bool sub_one_converged = true;

  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const double gamma = gammas[gi];
    SolverConfig leg = built.solver;
    leg.gamma = gamma;
    char tag[16];
    std::snprintf(tag, sizeof(tag), "%.1f", gamma);
    log_note(std::string("gamma ablation leg ") + tag);

    std::vector<RoundMetrics> metrics;
    std::string outcome;
    int rounds = 0;
    try {
      RunResult result = run(built.game, built.R, built.Cs, leg, xstar);
      metrics = std::move(result.metrics);
      rounds = result.state.round;
      outcome = result.converged ? "converged" : "max_rounds";
      if (gamma < 1.0 && !result.converged) sub_one_converged = false;
    } catch (const NonFiniteIterate& e) {
      metrics = e.metrics();
      rounds = e.round();
      outcome = "nonfinite_round_" + std::to_string(e.round());
      if (gamma < 1.0) sub_one_converged = false;
    }

    detail::write_metrics_csv(path(std::string("metrics_gamma_") + tag +
                                   ".csv"),
                              metrics);
    for (const auto& m : metrics)
      combined << tag << "," << m.round << ","
               << format_double(m.optimality_gap) << ","
               << format_double(m.consensus_error) << ","
               << format_double(m.tracking_error) << ","
               << format_double(m.iterate_change) << "\n";
    const double final_gap =
        metrics.empty() ? 0.0 : metrics.back().optimality_gap;
    summary << tag << "," << outcome << "," << rounds << ","
            << format_double(final_gap) << "\n";

    SvgSeries s{std::string("gamma ") + tag, palette[gi % 4], {}};
    for (const auto& m : metrics)
      s.points.emplace_back(m.round, m.optimality_gap);
    gap_series.push_back(std::move(s));
  }

  auto svg = open_output(path("ablation.svg"));
  write_line_chart(svg, gap_series,
                   {"Optimality gap by averaging parameter", "round",
                    "||z - x*|| (phi-weighted)", true, 760, 460});
  return sub_one_converged ? 0 : 2;
}

}  // namespace cluster_games
