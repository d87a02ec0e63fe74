#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/game.hpp"
#include "cluster_games/rng.hpp"
#include "cluster_games/sets.hpp"

namespace cluster_games {

/// Dispatchable generator with quadratic operating cost
/// a pr^2 + b pr + c ($, pr in MW).
struct Generator {
  double a = 0.0, b = 0.0, c = 0.0;
  double pr_min = 0.0, pr_max = 0.0;

  void validate() const {
    if (!(a > 0.0)) throw InvalidParams("generator: a must be positive");
    if (!(0.0 <= pr_min && pr_min <= pr_max))
      throw InvalidParams("generator: need 0 <= pr_min <= pr_max");
  }
};

/// Storage unit. Positive flow discharges, negative charges. eta is the
/// idle retention factor per hour; the terminal charge must land within
/// eps of pc_des.
struct Battery {
  double a = 0.0, b = 0.0, c = 0.0;
  double pb_min = 0.0, pb_max = 0.0;
  double pc_max = 0.0;   // capacity, MWh
  double eta = 1.0;      // retention in (0, 1)
  double pc_init = 0.0;  // initial charge, MWh
  double pc_des = 0.0;   // desired terminal charge, MWh
  double eps = 0.0;      // terminal tolerance, MWh

  void validate() const {
    if (!(a > 0.0)) throw InvalidParams("battery: a must be positive");
    if (!(pb_min <= pb_max)) throw InvalidParams("battery: pb_min > pb_max");
    if (!(eta > 0.0 && eta < 1.0))
      throw InvalidParams("battery: eta must lie in (0, 1)");
    if (!(0.0 <= pc_init && pc_init <= pc_max))
      throw InvalidParams("battery: pc_init outside [0, pc_max]");
    if (!(0.0 <= pc_des && pc_des <= pc_max))
      throw InvalidParams("battery: pc_des outside [0, pc_max]");
    if (!(eps > 0.0)) throw InvalidParams("battery: eps must be positive");
  }
};

struct MicrogridUnits {
  std::vector<Generator> generators;
  std::vector<Battery> batteries;
};

/// Day-ahead scheduling scenario: H microgrids, horizon T hours, per-MG
/// demand, and the shared market parameters. The decision block of MG h is
/// col(PR over units and hours, PB, PG, PS), unit-major: each unit's T
/// hourly values are contiguous.
struct MicrogridScenario {
  int horizon = 0;                  // T
  double zeta = 0.0;                // market price scaling, $/MWh per MW
  double varrho = 0.0;              // sell-back fraction in (0, 1)
  double pg_max = 0.0;              // per-MG grid purchase cap, MW
  double smoothing_eps = 1e-3;      // battery |.| smoothing, MW
  std::vector<MicrogridUnits> mgs;  // one entry per MG
  Eigen::MatrixXd demand;           // H x T, MWh per slot

  int mg_count() const { return static_cast<int>(mgs.size()); }
  int unit_count() const {
    int n = 0;
    for (const auto& mg : mgs)
      n += static_cast<int>(mg.generators.size() + mg.batteries.size());
    return n;
  }

  void validate() const {
    if (mgs.empty()) throw InvalidParams("scenario: no microgrids");
    if (horizon < 1) throw InvalidParams("scenario: horizon must be >= 1");
    if (!(varrho > 0.0 && varrho < 1.0))
      throw InvalidParams("scenario: varrho must lie in (0, 1)");
    if (!(zeta > 0.0)) throw InvalidParams("scenario: zeta must be positive");
    if (!(pg_max > 0.0)) throw InvalidParams("scenario: pg_max must be > 0");
    if (!(smoothing_eps > 0.0))
      throw InvalidParams("scenario: smoothing_eps must be positive");
    if (demand.rows() != mg_count() || demand.cols() != horizon)
      throw InvalidParams("scenario: demand must be H x T");
    if (demand.size() > 0 && demand.minCoeff() < 0.0)
      throw InvalidParams("scenario: demand must be nonnegative");
    for (const auto& mg : mgs) {
      if (mg.generators.empty() && mg.batteries.empty())
        throw InvalidParams("scenario: microgrid without units");
      for (const auto& g : mg.generators) g.validate();
      for (const auto& b : mg.batteries) b.validate();
    }
  }
};

/// Coordinate map of one MG's decision block and of the stacked vector.
class MicrogridIndex {
 public:
  explicit MicrogridIndex(const MicrogridScenario& sc) : horizon_(sc.horizon) {
    int offset = 0;
    for (const auto& mg : sc.mgs) {
      gens_.push_back(static_cast<int>(mg.generators.size()));
      bats_.push_back(static_cast<int>(mg.batteries.size()));
      offsets_.push_back(offset);
      offset += block_dim(static_cast<int>(offsets_.size()) - 1);
    }
    total_dim_ = offset;
  }

  int horizon() const { return horizon_; }
  int mg_count() const { return static_cast<int>(gens_.size()); }
  int total_dim() const { return total_dim_; }
  int block_dim(int h) const { return horizon_ * (gens_[h] + bats_[h] + 2); }
  int block_offset(int h) const { return offsets_[h]; }

  // Local coordinates inside MG h's block (t is 1-based like the hour).
  int pr_local([[maybe_unused]] int h, int g, int t) const {
    return g * horizon_ + (t - 1);
  }
  int pb_local(int h, int b, int t) const {
    return (gens_[h] + b) * horizon_ + (t - 1);
  }
  int pg_local(int h, int t) const {
    return (gens_[h] + bats_[h]) * horizon_ + (t - 1);
  }
  int ps_local(int h, int t) const {
    return (gens_[h] + bats_[h] + 1) * horizon_ + (t - 1);
  }

  // Global coordinates in the stacked joint vector.
  int pr(int h, int g, int t) const { return offsets_[h] + pr_local(h, g, t); }
  int pb(int h, int b, int t) const { return offsets_[h] + pb_local(h, b, t); }
  int pg(int h, int t) const { return offsets_[h] + pg_local(h, t); }
  int ps(int h, int t) const { return offsets_[h] + ps_local(h, t); }

 private:
  int horizon_;
  int total_dim_ = 0;
  std::vector<int> gens_, bats_, offsets_;
};

// --- cost terms ----------------------------------------------------------

inline double generator_cost(const Generator& gen, double pr) {
  return gen.a * pr * pr + gen.b * pr + gen.c;
}

inline double generator_cost_grad(const Generator& gen, double pr) {
  return 2.0 * gen.a * pr + gen.b;
}

/// Smoothed battery penalty: a pb^2 + b (sqrt(pb^2 + eps^2) - eps) + c.
/// Agrees with the absolute-value penalty at pb = 0, stays within b*eps of
/// it everywhere, and is differentiable.
inline double battery_penalty_smooth(const Battery& bat, double pb,
                                     double eps) {
  if (!(eps > 0.0)) throw InvalidParams("smoothing eps must be positive");
  return bat.a * pb * pb + bat.b * (std::sqrt(pb * pb + eps * eps) - eps) +
         bat.c;
}

inline double battery_penalty_grad(const Battery& bat, double pb,
                                   double eps) {
  if (!(eps > 0.0)) throw InvalidParams("smoothing eps must be positive");
  return 2.0 * bat.a * pb + bat.b * pb / std::sqrt(pb * pb + eps * eps);
}

/// Market cost of MG h at one slot: price zeta * sum(PG) applied to the
/// net purchase PG_h - varrho * PS_h. This term couples the clusters.
inline double electricity_cost(const Eigen::VectorXd& pg_all, double ps_h,
                               int h, double zeta, double varrho) {
  const double price = zeta * pg_all.sum();
  return price * (pg_all(h) - varrho * ps_h);
}

// --- charge bookkeeping ----------------------------------------------------

/// Charge remaining after the final slot:
/// eta^(T-1) pc_init - sum_s eta^(T-s) pb(s).
inline double end_charge(const Battery& bat, const Eigen::VectorXd& pb) {
  const int T = static_cast<int>(pb.size());
  double charge = std::pow(bat.eta, T - 1) * bat.pc_init;
  for (int s = 1; s <= T; ++s)
    charge -= std::pow(bat.eta, T - s) * pb(s - 1);
  return charge;
}

// --- constraint assembly ----------------------------------------------------

/// Constraint set of MG h's decision block: unit and market boxes, running
/// charge bounds and the terminal-charge band per battery, and the hourly
/// power balance as an affine member.
inline ConvexSet build_constraints(const MicrogridScenario& sc, int h) {
  sc.validate();
  const MicrogridIndex idx(sc);
  const int T = sc.horizon;
  const int n = idx.block_dim(h);
  const auto& mg = sc.mgs[h];
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<ConvexSet> members;

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(n, -inf);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(n, inf);
  for (int g = 0; g < static_cast<int>(mg.generators.size()); ++g)
    for (int t = 1; t <= T; ++t) {
      lower(idx.pr_local(h, g, t)) = mg.generators[g].pr_min;
      upper(idx.pr_local(h, g, t)) = mg.generators[g].pr_max;
    }
  for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b)
    for (int t = 1; t <= T; ++t) {
      lower(idx.pb_local(h, b, t)) = mg.batteries[b].pb_min;
      upper(idx.pb_local(h, b, t)) = mg.batteries[b].pb_max;
    }
  for (int t = 1; t <= T; ++t) {
    lower(idx.pg_local(h, t)) = 0.0;
    upper(idx.pg_local(h, t)) = sc.pg_max;
    lower(idx.ps_local(h, t)) = 0.0;
  }
  members.push_back(ConvexSet::box(std::move(lower), std::move(upper)));

  for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b) {
    const auto& bat = mg.batteries[b];
    for (int t = 1; t <= T; ++t) {
      // Post-flow charge at slot t stays in [0, pc_max]:
      //   sum_{s<=t} eta^(t-s) pb(s) <= eta^(t-1) pc_init          (empty)
      //  -sum_{s<=t} eta^(t-s) pb(s) <= pc_max - eta^(t-1) pc_init (full)
      Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
      for (int s = 1; s <= t; ++s)
        a(idx.pb_local(h, b, s)) = std::pow(bat.eta, t - s);
      const double initial = std::pow(bat.eta, t - 1) * bat.pc_init;
      members.push_back(ConvexSet::halfspace(a, initial));
      members.push_back(ConvexSet::halfspace(-a, bat.pc_max - initial));
    }
    // Terminal band |end_charge - pc_des| <= eps as two halfspaces on the
    // same weighted flow sum.
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (int s = 1; s <= T; ++s)
      a(idx.pb_local(h, b, s)) = std::pow(bat.eta, T - s);
    const double initial = std::pow(bat.eta, T - 1) * bat.pc_init;
    members.push_back(
        ConvexSet::halfspace(a, initial - bat.pc_des + bat.eps));
    members.push_back(
        ConvexSet::halfspace(-a, bat.pc_des - initial + bat.eps));
  }

  // Hourly power balance: sum PR + sum PB + PG = PD + PS.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(T, n);
  Eigen::VectorXd rhs(T);
  for (int t = 1; t <= T; ++t) {
    for (int g = 0; g < static_cast<int>(mg.generators.size()); ++g)
      A(t - 1, idx.pr_local(h, g, t)) = 1.0;
    for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b)
      A(t - 1, idx.pb_local(h, b, t)) = 1.0;
    A(t - 1, idx.pg_local(h, t)) = 1.0;
    A(t - 1, idx.ps_local(h, t)) = -1.0;
    rhs(t - 1) = sc.demand(h, t - 1);
  }
  members.push_back(ConvexSet::affine(std::move(A), std::move(rhs)));

  ConvexSet set = ConvexSet::intersection(std::move(members));

  // Probe the assembled set once; a projection that cannot settle signals
  // an empty intersection.
  try {
    set.project(Eigen::VectorXd::Zero(n));
  } catch (const NoConvergence&) {
    throw InfeasibleScenario("microgrid constraint set appears infeasible");
  }
  return set;
}

// --- objective and residual helpers ---------------------------------------

/// Full cost of MG h at a stacked joint decision: unit operating costs plus
/// the market term over the horizon.
inline double mg_objective(const MicrogridScenario& sc, int h,
                           const Eigen::VectorXd& x) {
  const MicrogridIndex idx(sc);
  if (x.size() != idx.total_dim())
    throw DimensionMismatch("mg_objective: wrong joint dimension");
  const auto& mg = sc.mgs[h];
  double total = 0.0;
  for (int t = 1; t <= sc.horizon; ++t) {
    for (int g = 0; g < static_cast<int>(mg.generators.size()); ++g)
      total += generator_cost(mg.generators[g], x(idx.pr(h, g, t)));
    for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b)
      total += battery_penalty_smooth(mg.batteries[b], x(idx.pb(h, b, t)),
                                      sc.smoothing_eps);
    Eigen::VectorXd pg_all(sc.mg_count());
    for (int l = 0; l < sc.mg_count(); ++l) pg_all(l) = x(idx.pg(l, t));
    total +=
        electricity_cost(pg_all, x(idx.ps(h, t)), h, sc.zeta, sc.varrho);
  }
  return total;
}

/// Worst absolute power-balance violation of MG h over the horizon.
inline double balance_residual(const MicrogridScenario& sc, int h,
                               const Eigen::VectorXd& x) {
  const MicrogridIndex idx(sc);
  if (x.size() != idx.total_dim())
    throw DimensionMismatch("balance_residual: wrong joint dimension");
  const auto& mg = sc.mgs[h];
  double worst = 0.0;
  for (int t = 1; t <= sc.horizon; ++t) {
    double lhs = x(idx.pg(h, t)) - x(idx.ps(h, t));
    for (int g = 0; g < static_cast<int>(mg.generators.size()); ++g)
      lhs += x(idx.pr(h, g, t));
    for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b)
      lhs += x(idx.pb(h, b, t));
    worst = std::max(worst, std::abs(lhs - sc.demand(h, t - 1)));
  }
  return worst;
}

// --- compilation into a cluster game ---------------------------------------

struct CompiledMicrogrid {
  ClusterGame game;
  MicrogridIndex index;
};

/// One cluster per MG and one agent per physical unit. An agent carries its
/// own unit's operating cost over the horizon plus an equal 1/N_h share of
/// the MG's market cost, so the cluster average reproduces the MG objective
/// scaled by 1/N_h (which leaves the minimizer unchanged).
inline CompiledMicrogrid compile_game(const MicrogridScenario& scenario) {
  try {
    scenario.validate();
  } catch (const InvalidParams& e) {
    throw InvalidScenario(e.what());
  }
  auto sc = std::make_shared<const MicrogridScenario>(scenario);
  const MicrogridIndex idx(*sc);
  const int H = sc->mg_count();
  const int T = sc->horizon;

  std::vector<int> agents_per_cluster(H), dims_per_cluster(H);
  for (int h = 0; h < H; ++h) {
    agents_per_cluster[h] = static_cast<int>(sc->mgs[h].generators.size() +
                                             sc->mgs[h].batteries.size());
    dims_per_cluster[h] = idx.block_dim(h);
  }
  GameLayout layout(agents_per_cluster, dims_per_cluster);

  // Shared market term and its own-block gradient for an agent of MG h.
  const auto market_cost = [sc, idx, T](int h, const Eigen::VectorXd& x) {
    double total = 0.0;
    for (int t = 1; t <= T; ++t) {
      Eigen::VectorXd pg_all(sc->mg_count());
      for (int l = 0; l < sc->mg_count(); ++l) pg_all(l) = x(idx.pg(l, t));
      total += electricity_cost(pg_all, x(idx.ps(h, t)), h, sc->zeta,
                                sc->varrho);
    }
    return total;
  };
  const auto add_market_grad = [sc, idx, T](int h, const Eigen::VectorXd& x,
                                            double share,
                                            Eigen::VectorXd& grad) {
    for (int t = 1; t <= T; ++t) {
      double pg_sum = 0.0;
      for (int l = 0; l < sc->mg_count(); ++l) pg_sum += x(idx.pg(l, t));
      const double pg_h = x(idx.pg(h, t));
      const double ps_h = x(idx.ps(h, t));
      grad(idx.pg_local(h, t)) +=
          share * sc->zeta * (pg_sum + pg_h - sc->varrho * ps_h);
      grad(idx.ps_local(h, t)) += share * (-sc->varrho * sc->zeta * pg_sum);
    }
  };

  std::vector<AgentCost> agents;
  std::vector<ConvexSet> sets;
  for (int h = 0; h < H; ++h) {
    const int n_h = layout.agents_in(h);
    const double share = 1.0 / n_h;
    const int ph = layout.dim_of(h);
    for (int g = 0; g < static_cast<int>(sc->mgs[h].generators.size()); ++g) {
      agents.push_back(AgentCost{
          [sc, idx, market_cost, share, h, g, T](const Eigen::VectorXd& x) {
            const auto& gen = sc->mgs[h].generators[g];
            double total = 0.0;
            for (int t = 1; t <= T; ++t)
              total += generator_cost(gen, x(idx.pr(h, g, t)));
            return total + share * market_cost(h, x);
          },
          [sc, idx, add_market_grad, share, h, g, T,
           ph](const Eigen::VectorXd& x) {
            const auto& gen = sc->mgs[h].generators[g];
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(ph);
            for (int t = 1; t <= T; ++t)
              grad(idx.pr_local(h, g, t)) =
                  generator_cost_grad(gen, x(idx.pr(h, g, t)));
            add_market_grad(h, x, share, grad);
            return grad;
          }});
    }
    for (int b = 0; b < static_cast<int>(sc->mgs[h].batteries.size()); ++b) {
      agents.push_back(AgentCost{
          [sc, idx, market_cost, share, h, b, T](const Eigen::VectorXd& x) {
            const auto& bat = sc->mgs[h].batteries[b];
            double total = 0.0;
            for (int t = 1; t <= T; ++t)
              total += battery_penalty_smooth(bat, x(idx.pb(h, b, t)),
                                              sc->smoothing_eps);
            return total + share * market_cost(h, x);
          },
          [sc, idx, add_market_grad, share, h, b, T,
           ph](const Eigen::VectorXd& x) {
            const auto& bat = sc->mgs[h].batteries[b];
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(ph);
            for (int t = 1; t <= T; ++t)
              grad(idx.pb_local(h, b, t)) = battery_penalty_grad(
                  bat, x(idx.pb(h, b, t)), sc->smoothing_eps);
            add_market_grad(h, x, share, grad);
            return grad;
          }});
    }
    sets.push_back(build_constraints(*sc, h));
  }

  return CompiledMicrogrid{
      ClusterGame(std::move(layout), std::move(agents), std::move(sets)),
      idx};
}

// --- scenario generation ----------------------------------------------------

/// Sampling ranges and shape of a generated scenario. Battery coefficient
/// ranges follow the published distributions; generator parameters come
/// from a configurable table of uniform ranges.
struct ScenarioParams {
  int mg_count = 3;
  int horizon = 8;
  std::vector<int> gens_per_mg;  // if empty, derived from total_units
  std::vector<int> bats_per_mg;
  int total_units = 0;  // used when the explicit per-MG lists are empty

  double zeta = 0.01;
  double varrho = 0.8;
  double pg_max = 1e4;
  double smoothing_eps = 1e-3;

  // generator table
  double gen_a_min = 0.1, gen_a_max = 5.0;
  double gen_b_min = 5.0, gen_b_max = 50.0;
  double gen_c_min = 0.0, gen_c_max = 50.0;
  double gen_cap_min = 50.0, gen_cap_max = 300.0;

  // battery ranges
  double bat_a_min = 0.1, bat_a_max = 5.0;
  double bat_b_min = 5.0, bat_b_max = 50.0;
  double bat_c_min = -50.0, bat_c_max = 50.0;
  double bat_cap_min = 50.0, bat_cap_max = 200.0;
  double bat_eta_min = 0.95, bat_eta_max = 0.99;
  double bat_rate_min = 0.8, bat_rate_max = 1.0;   // fraction of capacity
  double bat_init_min = 0.2, bat_init_max = 0.5;   // fraction of capacity
  double bat_eps_frac = 0.05;                      // terminal band, of cap

  double demand_min = 500.0, demand_max = 2000.0;

  static ScenarioParams desk_default() {
    ScenarioParams p;
    p.mg_count = 3;
    p.horizon = 8;
    p.gens_per_mg = {2, 2, 2};
    p.bats_per_mg = {1, 1, 1};
    return p;
  }

  static ScenarioParams full_scale_default() {
    ScenarioParams p;
    p.mg_count = 6;
    p.horizon = 24;
    p.total_units = 50;
    return p;
  }
};

inline MicrogridScenario scenario_generate(const ScenarioParams& params,
                                           std::uint64_t seed) {
  if (params.mg_count < 1 || params.horizon < 1)
    throw InvalidParams("scenario_generate: mg_count and horizon must be >= 1");
  std::vector<int> gens = params.gens_per_mg;
  std::vector<int> bats = params.bats_per_mg;
  Rng rng(seed);

  if (gens.empty() && bats.empty()) {
    if (params.total_units < params.mg_count)
      throw InvalidParams("scenario_generate: fewer units than microgrids");
    gens.assign(params.mg_count, 0);
    bats.assign(params.mg_count, 0);
    for (int u = 0; u < params.total_units; ++u) {
      const int h = u % params.mg_count;
      // First unit of every MG is a generator so each MG can produce.
      if (u < params.mg_count || rng.uniform() < 0.5)
        gens[h] += 1;
      else
        bats[h] += 1;
    }
  }
  if (static_cast<int>(gens.size()) != params.mg_count ||
      static_cast<int>(bats.size()) != params.mg_count)
    throw InvalidParams("scenario_generate: unit lists must match mg_count");

  MicrogridScenario sc;
  sc.horizon = params.horizon;
  sc.zeta = params.zeta;
  sc.varrho = params.varrho;
  sc.pg_max = params.pg_max;
  sc.smoothing_eps = params.smoothing_eps;
  sc.mgs.resize(params.mg_count);
  for (int h = 0; h < params.mg_count; ++h) {
    for (int g = 0; g < gens[h]; ++g) {
      Generator gen;
      gen.a = rng.uniform(params.gen_a_min, params.gen_a_max);
      gen.b = rng.uniform(params.gen_b_min, params.gen_b_max);
      gen.c = rng.uniform(params.gen_c_min, params.gen_c_max);
      gen.pr_min = 0.0;
      gen.pr_max = rng.uniform(params.gen_cap_min, params.gen_cap_max);
      sc.mgs[h].generators.push_back(gen);
    }
    for (int b = 0; b < bats[h]; ++b) {
      Battery bat;
      bat.a = rng.uniform(params.bat_a_min, params.bat_a_max);
      bat.b = rng.uniform(params.bat_b_min, params.bat_b_max);
      bat.c = rng.uniform(params.bat_c_min, params.bat_c_max);
      bat.pc_max = rng.uniform(params.bat_cap_min, params.bat_cap_max);
      const double rate =
          rng.uniform(params.bat_rate_min, params.bat_rate_max) * bat.pc_max;
      bat.pb_max = rate;
      bat.pb_min = -rate;
      bat.eta = rng.uniform(params.bat_eta_min, params.bat_eta_max);
      bat.pc_init =
          rng.uniform(params.bat_init_min, params.bat_init_max) * bat.pc_max;
      bat.pc_des = bat.pc_init;  // end the day where it started
      bat.eps = params.bat_eps_frac * bat.pc_max;
      sc.mgs[h].batteries.push_back(bat);
    }
  }
  sc.demand.resize(params.mg_count, params.horizon);
  for (int h = 0; h < params.mg_count; ++h)
    for (int t = 0; t < params.horizon; ++t)
      sc.demand(h, t) = rng.uniform(params.demand_min, params.demand_max);
  sc.validate();
  return sc;
}

}  // namespace cluster_games
