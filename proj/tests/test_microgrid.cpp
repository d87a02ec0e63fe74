#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "cluster_games/microgrid.hpp"
#include "cluster_games/oracle.hpp"
#include "cluster_games/rng.hpp"

using namespace cluster_games;

namespace {

// Tiny hand-laid scenario: one MG, one generator and one battery, wide
// terminal band so only the running charge constraints bind.
MicrogridScenario tiny_scenario(int horizon, double eta,
                                double terminal_eps = 1e6) {
  MicrogridScenario sc;
  sc.horizon = horizon;
  sc.zeta = 0.01;
  sc.varrho = 0.8;
  sc.pg_max = 1e4;
  sc.smoothing_eps = 0.5;
  MicrogridUnits mg;
  mg.generators.push_back({0.5, 10.0, 5.0, 0.0, 100.0});
  Battery bat;
  bat.a = 0.5;
  bat.b = 8.0;
  bat.c = 1.0;
  bat.pb_min = -16.0;
  bat.pb_max = 16.0;
  bat.pc_max = 20.0;
  bat.eta = eta;
  bat.pc_init = 10.0;
  bat.pc_des = 10.0;
  bat.eps = terminal_eps;
  mg.batteries.push_back(bat);
  sc.mgs.push_back(mg);
  sc.demand = Eigen::MatrixXd::Constant(1, horizon, 50.0);
  return sc;
}

Eigen::VectorXd feasible_point(const MicrogridScenario& sc, double pb1,
                               double pb2 = 0.0) {
  const MicrogridIndex idx(sc);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(idx.total_dim());
  for (int t = 1; t <= sc.horizon; ++t) {
    const double pb = t == 1 ? pb1 : (t == 2 ? pb2 : 0.0);
    x(idx.pb(0, 0, t)) = pb;
    x(idx.pr(0, 0, t)) = 50.0 - pb;  // balance with PG = PS = 0
  }
  return x;
}

}  // namespace

TEST_CASE("generator cost formula") {
  const Generator gen{0.1, 5.0, 10.0, 0.0, 100.0};
  CHECK(generator_cost(gen, 10.0) == Approx(70.0));
  CHECK(generator_cost(gen, 0.0) == Approx(10.0));
  const double pr = 7.0;
  CHECK(generator_cost(gen, 2 * pr) - generator_cost(gen, 0.0) ==
        Approx(4 * gen.a * pr * pr + 2 * gen.b * pr));
  CHECK(generator_cost_grad(gen, 3.0) == Approx(2 * 0.1 * 3.0 + 5.0));
}

TEST_CASE("smoothed battery penalty") {
  Battery bat;
  bat.a = 0.2;
  bat.b = 7.0;
  bat.c = 3.0;
  bat.pb_min = -10;
  bat.pb_max = 10;
  bat.pc_max = 20;
  bat.eta = 0.97;
  bat.pc_init = 10;
  bat.pc_des = 10;
  bat.eps = 1.0;

  const double eps = 1e-3;
  CHECK(battery_penalty_smooth(bat, 0.0, eps) == 3.0);  // anchored at zero
  CHECK(battery_penalty_grad(bat, 0.0, eps) == 0.0);

  for (double pb : {-8.0, -1.0, 2.5, 9.0}) {
    const double exact = bat.a * pb * pb + bat.b * std::abs(pb) + bat.c;
    CHECK(std::abs(battery_penalty_smooth(bat, pb, eps) - exact) <=
          bat.b * eps);
  }

  // Derivative matches a central difference away from the kink.
  const double d = 1e-6;
  const double fd = (battery_penalty_smooth(bat, 2.0 + d, 0.5) -
                     battery_penalty_smooth(bat, 2.0 - d, 0.5)) /
                    (2 * d);
  CHECK(battery_penalty_grad(bat, 2.0, 0.5) == Approx(fd).margin(1e-6));

  CHECK_THROWS_AS(battery_penalty_smooth(bat, 1.0, 0.0), InvalidParams);
}

TEST_CASE("electricity cost couples through the total purchase") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(electricity_cost(zero, 5.0, 0, 1.0, 0.8) == 0.0);

  Eigen::VectorXd pg(2);
  pg << 10, 10;
  CHECK(electricity_cost(pg, 0.0, 0, 1.0, 0.8) == Approx(200.0));

  // Pure seller: revenue.
  Eigen::VectorXd pg2(2);
  pg2 << 0, 10;
  CHECK(electricity_cost(pg2, 5.0, 0, 1.0, 0.8) < 0.0);
}

TEST_CASE("end charge bookkeeping") {
  Battery bat;
  bat.a = 1;
  bat.b = 1;
  bat.c = 0;
  bat.pb_min = -5;
  bat.pb_max = 5;
  bat.pc_max = 20;
  bat.eta = 0.9;
  bat.pc_init = 10;
  bat.pc_des = 10;
  bat.eps = 1;
  Eigen::VectorXd pb(2);
  pb << 2.0, -1.0;
  // eta^1 * 10 - (eta^1 * 2 + eta^0 * (-1)) = 9 - 1.8 + 1 = 8.2
  CHECK(end_charge(bat, pb) == Approx(8.2));
}

TEST_CASE("constraint set admits the balanced dispatch") {
  const MicrogridScenario sc = tiny_scenario(1, 0.97);
  const ConvexSet set = build_constraints(sc, 0);
  const MicrogridIndex idx(sc);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(idx.total_dim());
  x(idx.pr(0, 0, 1)) = 50.0;  // generator covers demand, battery idle
  CHECK(set.contains(x, 1e-9));

  x(idx.pg(0, 1)) = 1.0;  // breaks the balance row
  CHECK_FALSE(set.contains(x, 1e-6));
}

TEST_CASE("running charge bounds at the first slot") {
  // pc_init = 10, pc_max = 20: the slot-1 flow must stay in [-10, 10]
  // whatever eta is.
  const MicrogridScenario sc = tiny_scenario(1, 0.97);
  const ConvexSet set = build_constraints(sc, 0);
  CHECK(set.contains(feasible_point(sc, 10.0), 1e-9));
  CHECK_FALSE(set.contains(feasible_point(sc, 10.01), 1e-6));
  CHECK(set.contains(feasible_point(sc, -10.0), 1e-9));
  CHECK_FALSE(set.contains(feasible_point(sc, -10.01), 1e-6));
}

TEST_CASE("second-slot charge constraint carries the leakage weight") {
  // eta = 0.9, T = 2: slot-2 emptiness bound is 0.9 PB(1) + PB(2) <= 9.
  const MicrogridScenario sc = tiny_scenario(2, 0.9);
  const ConvexSet set = build_constraints(sc, 0);
  CHECK(set.contains(feasible_point(sc, 10.0, 0.0), 1e-9));
  CHECK_FALSE(set.contains(feasible_point(sc, 10.0, 0.2), 1e-6));
  CHECK(set.contains(feasible_point(sc, 8.0, 1.8), 1e-9));
  CHECK_FALSE(set.contains(feasible_point(sc, 8.0, 2.0), 1e-6));
}

TEST_CASE("terminal band constrains the weighted flow total") {
  // Tight terminal band: end charge within eps of pc_des = pc_init.
  const MicrogridScenario sc = tiny_scenario(2, 0.9, 0.5);
  const ConvexSet set = build_constraints(sc, 0);
  // End charge 0.9*10 - (0.9 pb1 + pb2) must lie in [9.5, 10.5], so the
  // weighted flow sum must lie in [-1.5, -0.5].
  CHECK(set.contains(feasible_point(sc, 0.0, -1.0), 1e-9));
  CHECK(set.contains(feasible_point(sc, -1.0, 0.4 - 0.01), 1e-9));
  CHECK_FALSE(set.contains(feasible_point(sc, 0.0, -0.3), 1e-6));
  CHECK_FALSE(set.contains(feasible_point(sc, 0.0, -1.7), 1e-6));
}

TEST_CASE("infeasible battery requirements are reported") {
  MicrogridScenario sc = tiny_scenario(1, 0.97, 0.1);
  // Demand a terminal charge the 1-slot flow bounds cannot reach.
  sc.mgs[0].batteries[0].pc_init = 0.0;
  sc.mgs[0].batteries[0].pc_des = 20.0;
  sc.mgs[0].batteries[0].pb_min = -1.0;
  sc.mgs[0].batteries[0].pb_max = 1.0;
  CHECK_THROWS_AS(build_constraints(sc, 0), InfeasibleScenario);
}

TEST_CASE("scenario generation is seeded and ranged") {
  const ScenarioParams params = ScenarioParams::desk_default();
  const MicrogridScenario a = scenario_generate(params, 42);
  const MicrogridScenario b = scenario_generate(params, 42);
  const MicrogridScenario c = scenario_generate(params, 43);

  CHECK(a.demand == b.demand);
  CHECK(a.demand != c.demand);
  CHECK(a.mgs[1].generators[0].a == b.mgs[1].generators[0].a);
  CHECK(a.unit_count() == 9);
  CHECK(a.mg_count() == 3);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MicrogridScenario sc = scenario_generate(params, seed);
    for (const auto& mg : sc.mgs) {
      for (const auto& g : mg.generators) {
        CHECK((g.a >= 0.1 && g.a <= 5.0));
        CHECK((g.b >= 5.0 && g.b <= 50.0));
      }
      for (const auto& bat : mg.batteries) {
        CHECK((bat.a >= 0.1 && bat.a <= 5.0));
        CHECK((bat.b >= 5.0 && bat.b <= 50.0));
        CHECK((bat.c >= -50.0 && bat.c <= 50.0));
        CHECK((bat.pc_max >= 50.0 && bat.pc_max <= 200.0));
        CHECK((bat.eta >= 0.95 && bat.eta <= 0.99));
        CHECK((bat.pb_max >= 0.8 * bat.pc_max && bat.pb_max <= bat.pc_max));
        CHECK((bat.pc_init >= 0.2 * bat.pc_max &&
               bat.pc_init <= 0.5 * bat.pc_max));
      }
    }
    CHECK(sc.demand.minCoeff() >= 500.0);
    CHECK(sc.demand.maxCoeff() <= 2000.0);
  }

  // Full-scale split: 50 units over 6 MGs, every MG can generate.
  const MicrogridScenario full =
      scenario_generate(ScenarioParams::full_scale_default(), 7);
  CHECK(full.unit_count() == 50);
  CHECK(full.mg_count() == 6);
  CHECK(full.horizon == 24);
  for (const auto& mg : full.mgs) CHECK(!mg.generators.empty());

  ScenarioParams bad = params;
  bad.mg_count = 0;
  CHECK_THROWS_AS(scenario_generate(bad, 1), InvalidParams);
}

TEST_CASE("compiled game reproduces the MG objectives") {
  const MicrogridScenario sc = scenario_generate(
      ScenarioParams::desk_default(), 11);
  const CompiledMicrogrid compiled = compile_game(sc);
  const auto& layout = compiled.game.layout();
  CHECK(layout.cluster_count() == 3);
  CHECK(layout.agent_count() == 9);
  CHECK(layout.total_dim() == compiled.index.total_dim());

  Rng rng(55);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd x(layout.total_dim());
    for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-20.0, 60.0);
    for (int h = 0; h < 3; ++h)
      CHECK(compiled.game.cluster_cost(h, x) ==
            Approx(mg_objective(sc, h, x) / layout.agents_in(h)));
  }
}

TEST_CASE("single-unit MG agent carries the whole objective") {
  MicrogridScenario sc = tiny_scenario(2, 0.95);
  sc.mgs[0].batteries.clear();  // one generator only
  const CompiledMicrogrid compiled = compile_game(sc);
  Rng rng(56);
  Eigen::VectorXd x(compiled.index.total_dim());
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(0.0, 40.0);
  CHECK(compiled.game.agent(0).value(x) == Approx(mg_objective(sc, 0, x)));
}

TEST_CASE("compiled gradients match finite differences") {
  const MicrogridScenario sc = scenario_generate(
      ScenarioParams::desk_default(), 13);
  const CompiledMicrogrid compiled = compile_game(sc);
  const auto& layout = compiled.game.layout();
  Rng rng(57);

  for (int rep = 0; rep < 3; ++rep) {
    Eigen::VectorXd x(layout.total_dim());
    for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-10.0, 50.0);
    for (int agent = 0; agent < layout.agent_count(); ++agent) {
      const int h = layout.cluster_of_agent(agent);
      const int o = layout.offset(h);
      const int ph = layout.dim_of(h);
      const Eigen::VectorXd analytic =
          compiled.game.agent(agent).own_gradient(x);
      REQUIRE(analytic.size() == ph);
      for (int j = 0; j < ph; ++j) {
        Eigen::VectorXd hi = x, lo = x;
        hi(o + j) += 1e-5;
        lo(o + j) -= 1e-5;
        const double fd = (compiled.game.agent(agent).value(hi) -
                           compiled.game.agent(agent).value(lo)) /
                          2e-5;
        CHECK(analytic(j) ==
              Approx(fd).margin(std::max(1e-5, 1e-4 * std::abs(fd))));
      }
    }
  }
}

TEST_CASE("market gradient carries the cross term") {
  const MicrogridScenario sc = scenario_generate(
      ScenarioParams::desk_default(), 17);
  const CompiledMicrogrid compiled = compile_game(sc);
  const auto& layout = compiled.game.layout();
  const MicrogridIndex& idx = compiled.index;
  Rng rng(58);
  Eigen::VectorXd x(layout.total_dim());
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(0.0, 30.0);

  const int h = 1;
  const int agent = layout.first_agent(h);
  const Eigen::VectorXd grad = compiled.game.agent(agent).own_gradient(x);
  for (int t = 1; t <= sc.horizon; ++t) {
    double pg_sum = 0.0;
    for (int l = 0; l < sc.mg_count(); ++l) pg_sum += x(idx.pg(l, t));
    const double expected_pg =
        sc.zeta * (pg_sum + x(idx.pg(h, t)) - sc.varrho * x(idx.ps(h, t))) /
        layout.agents_in(h);
    const double expected_ps =
        -sc.varrho * sc.zeta * pg_sum / layout.agents_in(h);
    CHECK(grad(idx.pg_local(h, t)) == Approx(expected_pg));
    CHECK(grad(idx.ps_local(h, t)) == Approx(expected_ps));
  }
}

TEST_CASE("desk-scale equilibrium satisfies the physical invariants") {
  // Small instance so the unit suite stays fast; the seeded desk-scale run
  // lives in the acceptance suite.
  ScenarioParams params;
  params.mg_count = 2;
  params.horizon = 3;
  params.gens_per_mg = {1, 1};
  params.bats_per_mg = {1, 1};
  params.smoothing_eps = 1.0;
  const MicrogridScenario sc = scenario_generate(params, 3);
  const CompiledMicrogrid compiled = compile_game(sc);

  Rng diag_rng(59);
  const GameDiagnostics diag = diagnose_game(compiled.game, diag_rng, 100,
                                             50.0);
  CHECK(diag.mu_hat > 0.0);

  FixedPointOptions opts;
  opts.alpha = 0.02;
  opts.tol = 1e-9;
  const Eigen::VectorXd xstar = fixed_point_ne(compiled.game, opts);

  for (int h = 0; h < sc.mg_count(); ++h) {
    CHECK(balance_residual(sc, h, xstar) <= 1e-6);
    const auto& mg = sc.mgs[h];
    for (int b = 0; b < static_cast<int>(mg.batteries.size()); ++b) {
      Eigen::VectorXd pb(sc.horizon);
      for (int t = 1; t <= sc.horizon; ++t)
        pb(t - 1) = xstar(compiled.index.pb(h, b, t));
      CHECK(std::abs(end_charge(mg.batteries[b], pb) -
                     mg.batteries[b].pc_des) <=
            mg.batteries[b].eps + 1e-8);
    }
    // All components inside their boxes.
    for (int g = 0; g < static_cast<int>(mg.generators.size()); ++g)
      for (int t = 1; t <= sc.horizon; ++t) {
        const double pr = xstar(compiled.index.pr(h, g, t));
        CHECK(pr >= mg.generators[g].pr_min - 1e-8);
        CHECK(pr <= mg.generators[g].pr_max + 1e-8);
      }
    for (int t = 1; t <= sc.horizon; ++t) {
      CHECK(xstar(compiled.index.pg(h, t)) >= -1e-8);
      CHECK(xstar(compiled.index.ps(h, t)) >= -1e-8);
    }
  }
}

TEST_CASE("full-scale scenario compiles") {
  const MicrogridScenario sc =
      scenario_generate(ScenarioParams::full_scale_default(), 7);
  const CompiledMicrogrid compiled = compile_game(sc);
  CHECK(compiled.game.layout().cluster_count() == 6);
  CHECK(compiled.game.layout().agent_count() == 50);
  CHECK(compiled.game.layout().total_dim() == compiled.index.total_dim());
}

TEST_CASE("compiling a broken scenario reports InvalidScenario") {
  MicrogridScenario sc = tiny_scenario(2, 0.95);
  sc.mgs[0].generators[0].a = -1.0;
  CHECK_THROWS_AS(compile_game(sc), InvalidScenario);
}

TEST_CASE("scenario validation catches bad parameters") {
  MicrogridScenario sc = tiny_scenario(2, 0.95);
  sc.varrho = 1.5;
  CHECK_THROWS_AS(sc.validate(), InvalidParams);

  sc = tiny_scenario(2, 0.95);
  sc.demand(0, 0) = -1.0;
  CHECK_THROWS_AS(sc.validate(), InvalidParams);

  sc = tiny_scenario(2, 0.95);
  sc.mgs[0].generators[0].a = 0.0;
  CHECK_THROWS_AS(sc.validate(), InvalidParams);

  sc = tiny_scenario(2, 0.95);
  sc.mgs[0].batteries[0].eta = 1.0;
  CHECK_THROWS_AS(sc.validate(), InvalidParams);
}
