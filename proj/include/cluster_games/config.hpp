#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cluster_games/errors.hpp"
#include "cluster_games/game.hpp"
#include "cluster_games/graph.hpp"
#include "cluster_games/microgrid.hpp"
#include "cluster_games/oracle.hpp"
#include "cluster_games/sets.hpp"
#include "cluster_games/solver.hpp"

namespace cluster_games {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

namespace detail {

inline const json& require(const json& j, const std::string& key,
                           const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing required key '" + key + "'");
  return j.at(key);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

/// Bound entry: number, or null / "inf" / "-inf" for unbounded.
inline double bound_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf")
      return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("bound string must be 'inf' or '-inf', got '" + s + "'");
  }
  if (j.is_number()) return j.get<double>();
  throw ConfigError("bound must be a number, null, 'inf' or '-inf'");
}

inline Eigen::VectorXd vector_from_json(const json& j,
                                        const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(where + ": expected numeric entries");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& j,
                                        const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(where + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

/// Typed convex-set record:
///   {"type":"box","lower":[...],"upper":[...]}   (null/"inf" = unbounded)
///   {"type":"halfspace","a":[...],"b":0.5}
///   {"type":"affine","A":[[...]],"b":[...]}
///   {"type":"intersection","members":[...]}
///   {"type":"full_space","dim":2}
inline ConvexSet set_from_json(const json& j) {
  const std::string type =
      detail::require(j, "type", "set").get<std::string>();
  try {
    if (type == "box") {
      const json& lo = detail::require(j, "lower", "box set");
      const json& hi = detail::require(j, "upper", "box set");
      if (!lo.is_array() || !hi.is_array() || lo.size() != hi.size())
        throw ConfigError("box set: lower/upper must be equal-length arrays");
      Eigen::VectorXd lower(lo.size()), upper(hi.size());
      for (std::size_t i = 0; i < lo.size(); ++i) {
        lower(i) = detail::bound_from_json(lo[i]);
        upper(i) = detail::bound_from_json(hi[i]);
      }
      return ConvexSet::box(std::move(lower), std::move(upper));
    }
    if (type == "halfspace")
      return ConvexSet::halfspace(
          detail::vector_from_json(detail::require(j, "a", "halfspace"),
                                   "halfspace a"),
          detail::require(j, "b", "halfspace").get<double>());
    if (type == "affine")
      return ConvexSet::affine(
          detail::matrix_from_json(detail::require(j, "A", "affine"),
                                   "affine A"),
          detail::vector_from_json(detail::require(j, "b", "affine"),
                                   "affine b"));
    if (type == "intersection") {
      const json& members = detail::require(j, "members", "intersection");
      std::vector<ConvexSet> sets;
      for (const auto& m : members) sets.push_back(set_from_json(m));
      return ConvexSet::intersection(std::move(sets));
    }
    if (type == "full_space")
      return ConvexSet::full_space(
          detail::require(j, "dim", "full_space").get<int>());
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("invalid set record: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw ConfigError(std::string("invalid set record: ") + e.what());
  }
  throw ConfigError("unknown set type '" + type + "'");
}

/// Graph record: {"type":"cycle"|"complete"} or
/// {"type":"random","extra_edge_prob":p,"seed":s} or
/// {"type":"edges","nodes":n,"edges":[[f,t],...]}. Node count must equal n.
inline DirectedGraph graph_from_json(const json& j, int n,
                                     const std::string& where) {
  const std::string type = detail::get_or<std::string>(j, "type", "cycle");
  if (type == "cycle") return directed_cycle(n);
  if (type == "complete") return complete_graph(n);
  if (type == "random") {
    const double prob = detail::get_or<double>(j, "extra_edge_prob", 0.2);
    Rng rng(detail::get_or<std::uint64_t>(j, "seed", 1));
    return random_strongly_connected(n, prob, rng);
  }
  if (type == "edges") {
    const int nodes = detail::require(j, "nodes", where).get<int>();
    if (nodes != n)
      throw ConfigError(where + ": 'nodes' must equal the agent count " +
                        std::to_string(n));
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : detail::require(j, "edges", where))
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    try {
      return DirectedGraph(nodes, std::move(edges));
    } catch (const InvalidSpec& ex) {
      throw ConfigError(where + ": " + ex.what());
    }
  }
  throw ConfigError(where + ": unknown graph type '" + type + "'");
}

// --- microgrid scenario (de)serialization --------------------------------

inline void to_json(json& j, const Generator& g) {
  j = json{{"a", g.a},           {"b", g.b},
           {"c", g.c},           {"pr_min", g.pr_min},
           {"pr_max", g.pr_max}};
}

inline void from_json(const json& j, Generator& g) {
  g.a = detail::require(j, "a", "generator").get<double>();
  g.b = detail::require(j, "b", "generator").get<double>();
  g.c = detail::require(j, "c", "generator").get<double>();
  g.pr_min = detail::require(j, "pr_min", "generator").get<double>();
  g.pr_max = detail::require(j, "pr_max", "generator").get<double>();
}

inline void to_json(json& j, const Battery& b) {
  j = json{{"a", b.a},           {"b", b.b},
           {"c", b.c},           {"pb_min", b.pb_min},
           {"pb_max", b.pb_max}, {"pc_max", b.pc_max},
           {"eta", b.eta},       {"pc_init", b.pc_init},
           {"pc_des", b.pc_des}, {"eps", b.eps}};
}

inline void from_json(const json& j, Battery& b) {
  b.a = detail::require(j, "a", "battery").get<double>();
  b.b = detail::require(j, "b", "battery").get<double>();
  b.c = detail::require(j, "c", "battery").get<double>();
  b.pb_min = detail::require(j, "pb_min", "battery").get<double>();
  b.pb_max = detail::require(j, "pb_max", "battery").get<double>();
  b.pc_max = detail::require(j, "pc_max", "battery").get<double>();
  b.eta = detail::require(j, "eta", "battery").get<double>();
  b.pc_init = detail::require(j, "pc_init", "battery").get<double>();
  b.pc_des = detail::require(j, "pc_des", "battery").get<double>();
  b.eps = detail::require(j, "eps", "battery").get<double>();
}

inline void to_json(json& j, const MicrogridScenario& sc) {
  json mgs = json::array();
  for (const auto& mg : sc.mgs)
    mgs.push_back(
        json{{"generators", mg.generators}, {"batteries", mg.batteries}});
  json demand = json::array();
  for (Eigen::Index h = 0; h < sc.demand.rows(); ++h) {
    json row = json::array();
    for (Eigen::Index t = 0; t < sc.demand.cols(); ++t)
      row.push_back(sc.demand(h, t));
    demand.push_back(std::move(row));
  }
  j = json{{"horizon", sc.horizon},
           {"zeta", sc.zeta},
           {"varrho", sc.varrho},
           {"pg_max", sc.pg_max},
           {"smoothing_eps", sc.smoothing_eps},
           {"mgs", std::move(mgs)},
           {"demand", std::move(demand)}};
}

inline void from_json(const json& j, MicrogridScenario& sc) {
  sc.horizon = detail::require(j, "horizon", "scenario").get<int>();
  sc.zeta = detail::require(j, "zeta", "scenario").get<double>();
  sc.varrho = detail::require(j, "varrho", "scenario").get<double>();
  sc.pg_max = detail::require(j, "pg_max", "scenario").get<double>();
  sc.smoothing_eps = detail::get_or<double>(j, "smoothing_eps", 1e-3);
  sc.mgs.clear();
  for (const auto& mg : detail::require(j, "mgs", "scenario")) {
    MicrogridUnits units;
    if (mg.contains("generators"))
      units.generators = mg.at("generators").get<std::vector<Generator>>();
    if (mg.contains("batteries"))
      units.batteries = mg.at("batteries").get<std::vector<Battery>>();
    sc.mgs.push_back(std::move(units));
  }
  sc.demand = detail::matrix_from_json(
      detail::require(j, "demand", "scenario"), "scenario demand");
}

/// Scenario section: either a generator spec ({"preset":"desk"|"full",
/// "seed":..., optional ScenarioParams overrides}) or an explicit scenario
/// under "explicit".
inline MicrogridScenario scenario_from_config(const json& j) {
  if (j.contains("explicit")) {
    MicrogridScenario sc = j.at("explicit").get<MicrogridScenario>();
    try {
      sc.validate();
    } catch (const InvalidParams& e) {
      throw ConfigError(std::string("explicit scenario: ") + e.what());
    }
    return sc;
  }
  const std::string preset = detail::get_or<std::string>(j, "preset", "desk");
  ScenarioParams params;
  if (preset == "desk")
    params = ScenarioParams::desk_default();
  else if (preset == "full")
    params = ScenarioParams::full_scale_default();
  else
    throw ConfigError("scenario preset must be 'desk' or 'full'");

  params.mg_count = detail::get_or<int>(j, "mg_count", params.mg_count);
  params.horizon = detail::get_or<int>(j, "horizon", params.horizon);
  params.total_units =
      detail::get_or<int>(j, "total_units", params.total_units);
  params.gens_per_mg = detail::get_or<std::vector<int>>(
      j, "gens_per_mg", params.gens_per_mg);
  params.bats_per_mg = detail::get_or<std::vector<int>>(
      j, "bats_per_mg", params.bats_per_mg);
  params.zeta = detail::get_or<double>(j, "zeta", params.zeta);
  params.varrho = detail::get_or<double>(j, "varrho", params.varrho);
  params.pg_max = detail::get_or<double>(j, "pg_max", params.pg_max);
  params.smoothing_eps =
      detail::get_or<double>(j, "smoothing_eps", params.smoothing_eps);
  params.demand_min = detail::get_or<double>(j, "demand_min", params.demand_min);
  params.demand_max = detail::get_or<double>(j, "demand_max", params.demand_max);
  if ((params.gens_per_mg.empty()) !=
      (params.bats_per_mg.empty()))
    throw ConfigError("scenario: give both gens_per_mg and bats_per_mg");

  const std::uint64_t seed = detail::get_or<std::uint64_t>(j, "seed", 42);
  try {
    return scenario_generate(params, seed);
  } catch (const InvalidParams& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

// --- quadratic game section ----------------------------------------------

inline QuadraticGame quadratic_game_from_config(const json& j) {
  const std::string type =
      detail::require(j, "type", "game").get<std::string>();
  const auto agents_per_cluster =
      detail::require(j, "agents_per_cluster", "game")
          .get<std::vector<int>>();
  const auto dims_per_cluster =
      detail::require(j, "dims_per_cluster", "game").get<std::vector<int>>();
  GameLayout layout = [&] {
    try {
      return GameLayout(agents_per_cluster, dims_per_cluster);
    } catch (const InvalidSpec& e) {
      throw ConfigError(std::string("game layout: ") + e.what());
    }
  }();

  std::vector<ConvexSet> sets;
  if (j.contains("action_sets")) {
    for (const auto& s : j.at("action_sets")) sets.push_back(set_from_json(s));
    if (static_cast<int>(sets.size()) != layout.cluster_count())
      throw ConfigError("game: need one action set per cluster");
  }

  try {
    if (type == "random_quadratic") {
      const auto seed = detail::get_or<std::uint64_t>(j, "seed", 1);
      const double mu_min = detail::get_or<double>(j, "mu_min", 0.5);
      return random_quadratic_game(layout, seed, mu_min, std::move(sets));
    }
    if (type == "quadratic") {
      std::vector<QuadraticAgentSpec> specs;
      for (const auto& a : detail::require(j, "agents", "game")) {
        QuadraticAgentSpec s;
        s.A = detail::matrix_from_json(detail::require(a, "A", "agent"),
                                       "agent A");
        s.b = detail::vector_from_json(detail::require(a, "b", "agent"),
                                       "agent b");
        s.c = detail::get_or<double>(a, "c", 0.0);
        specs.push_back(std::move(s));
      }
      return build_quadratic_game(std::move(specs), layout, std::move(sets));
    }
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("game: ") + e.what());
  }
  throw ConfigError("game type must be 'quadratic' or 'random_quadratic'");
}

// --- solver / oracle sections ----------------------------------------------

inline SolverConfig solver_from_config(const json& j) {
  SolverConfig cfg;
  cfg.alpha = detail::get_or<double>(j, "alpha", cfg.alpha);
  cfg.gamma = detail::get_or<double>(j, "gamma", cfg.gamma);
  cfg.max_rounds = detail::get_or<int>(j, "max_rounds", cfg.max_rounds);
  cfg.gap_tolerance =
      detail::get_or<double>(j, "gap_tolerance", cfg.gap_tolerance);
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.record_every = detail::get_or<int>(j, "record_every", cfg.record_every);
  try {
    cfg.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  return cfg;
}

inline FixedPointOptions oracle_from_config(const json& j) {
  FixedPointOptions opts;
  opts.alpha = detail::get_or<double>(j, "alpha", opts.alpha);
  opts.tol = detail::get_or<double>(j, "tol", opts.tol);
  opts.max_iters = detail::get_or<long>(j, "max_iters", opts.max_iters);
  if (!(opts.alpha > 0.0) || !(opts.tol > 0.0) || opts.max_iters < 1)
    throw ConfigError("oracle: alpha and tol must be positive, max_iters >= 1");
  return opts;
}

}  // namespace cluster_games
