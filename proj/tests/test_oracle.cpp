#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "cluster_games/oracle.hpp"
#include "support/fixtures.hpp"

using namespace cluster_games;

namespace {

double fixed_point_residual(const ClusterGame& game, const Eigen::VectorXd& x,
                            double alpha) {
  return (x - game.project_joint(x - alpha * game.game_mapping(x))).norm();
}

}  // namespace

TEST_CASE("fixed point oracle on the unconstrained fixture") {
  const QuadraticGame fixture = testing::two_cluster_fixture();
  FixedPointOptions opts;
  opts.alpha = 0.1;
  const Eigen::VectorXd x = fixed_point_ne(fixture.game, opts);
  CHECK(x(0) == Approx(8.0 / 15.0).margin(1e-9));
  CHECK(x(1) == Approx(28.0 / 15.0).margin(1e-9));
  CHECK(fixed_point_residual(fixture.game, x, opts.alpha) <= opts.tol);
}

TEST_CASE("fixed point oracle with an active bound") {
  // Clamping x1 to [0, 0.25] moves the equilibrium to the boundary; the
  // other cluster's best response is x2 = (4 - 0.5 * 0.25) / 2 = 1.9375.
  auto boxed = testing::two_cluster_fixture(
      {ConvexSet::box(Eigen::VectorXd::Zero(1),
                      Eigen::VectorXd::Constant(1, 0.25)),
       ConvexSet::full_space(1)});
  FixedPointOptions opts;
  opts.alpha = 0.1;
  const Eigen::VectorXd x = fixed_point_ne(boxed.game, opts);
  CHECK(x(0) == Approx(0.25).margin(1e-9));
  CHECK(x(1) == Approx(1.9375).margin(1e-9));

  // Brute-force confirmation: no grid point of either cluster improves on
  // the reported equilibrium.
  const double f1_at = boxed.game.cluster_cost(0, x);
  for (double u = 0.0; u <= 0.25 + 1e-12; u += 0.25 / 200) {
    Eigen::VectorXd probe = x;
    probe(0) = u;
    CHECK(boxed.game.cluster_cost(0, probe) >= f1_at - 1e-9);
  }
  const double f2_at = boxed.game.cluster_cost(1, x);
  for (double u = -5.0; u <= 5.0; u += 0.01) {
    Eigen::VectorXd probe = x;
    probe(1) = u;
    CHECK(boxed.game.cluster_cost(1, probe) >= f2_at - 1e-9);
  }
}

TEST_CASE("zero mapping returns the projected start") {
  GameLayout layout({1}, {2});
  const AgentCost flat{
      [](const Eigen::VectorXd&) { return 1.0; },
      [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2); }};
  std::vector<ConvexSet> sets;
  sets.push_back(ConvexSet::box(Eigen::VectorXd::Zero(2),
                                Eigen::VectorXd::Ones(2)));
  ClusterGame game(layout, {flat}, std::move(sets));

  FixedPointOptions opts;
  Eigen::VectorXd x0(2);
  x0 << 5.0, -3.0;
  opts.x0 = x0;
  const Eigen::VectorXd x = fixed_point_ne(game, opts);
  CHECK(x(0) == Approx(1.0));
  CHECK(x(1) == Approx(0.0));
}

TEST_CASE("fixed point is invariant to the step-size") {
  const QuadraticGame fixture = testing::two_cluster_fixture();
  FixedPointOptions a;
  a.alpha = 0.2;
  FixedPointOptions b;
  b.alpha = 0.1;
  const Eigen::VectorXd xa = fixed_point_ne(fixture.game, a);
  const Eigen::VectorXd xb = fixed_point_ne(fixture.game, b);
  CHECK((xa - xb).norm() <= 10 * a.tol);
}

TEST_CASE("oracle halves the step on divergence") {
  // alpha = 1.5 makes I - alpha J expansive (|1 - 1.5 * 2.5| > 1); the
  // halving ladder still lands on a contraction.
  const QuadraticGame fixture = testing::two_cluster_fixture();
  FixedPointOptions opts;
  opts.alpha = 1.5;
  opts.max_iters = 200000;
  const Eigen::VectorXd x = fixed_point_ne(fixture.game, opts);
  CHECK(x(0) == Approx(8.0 / 15.0).margin(1e-8));
}

TEST_CASE("oracle reports NoConvergence when starved of iterations") {
  const QuadraticGame fixture = testing::two_cluster_fixture();
  FixedPointOptions opts;
  opts.alpha = 0.1;
  opts.max_iters = 2;
  CHECK_THROWS_AS(fixed_point_ne(fixture.game, opts), NoConvergence);
}

TEST_CASE("best response check") {
  const QuadraticGame fixture = testing::two_cluster_fixture();
  const Eigen::VectorXd xstar = fixed_point_ne(fixture.game);

  SECTION("accepts the oracle output") {
    const BestResponseReport report =
        best_response_check(fixture.game, xstar, 1e-6);
    CHECK(report.ok);
    CHECK(report.improvement[0] <= 1e-6);
    CHECK(report.improvement[1] <= 1e-6);
  }
  SECTION("rejects a perturbed point with a quadratic improvement") {
    Eigen::VectorXd off = xstar;
    off(0) += 0.1;
    const BestResponseReport report =
        best_response_check(fixture.game, off, 1e-6);
    CHECK_FALSE(report.ok);
    // F_1 is quadratic in x1 with curvature 2, so the recoverable
    // improvement is about 0.1^2 = 0.01.
    CHECK(report.improvement[0] == Approx(0.01).epsilon(0.05));
  }
  SECTION("single cluster reduces to a global minimum check") {
    GameLayout layout({2}, {1});
    Eigen::MatrixXd A(1, 1);
    A << 2;
    Eigen::VectorXd b(1);
    b << -2;  // average cost (x - 1)^2 up to a constant
    const QuadraticGame g =
        build_quadratic_game({{A, b, 0.0}, {A, b, 0.0}}, layout, {});
    Eigen::VectorXd at_min(1), off_min(1);
    at_min << 1.0;
    off_min << 1.3;
    CHECK(best_response_check(g.game, at_min, 1e-6).ok);
    CHECK_FALSE(best_response_check(g.game, off_min, 1e-6).ok);
  }
}

TEST_CASE("oracle agrees with best response on random constrained games") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GameLayout layout({1, 2}, {2, 1});
    std::vector<ConvexSet> sets;
    sets.push_back(ConvexSet::box(Eigen::VectorXd::Constant(2, -0.3),
                                  Eigen::VectorXd::Constant(2, 0.3)));
    sets.push_back(ConvexSet::full_space(1));
    const QuadraticGame g = random_quadratic_game(layout, seed, 0.8, sets);
    const Eigen::VectorXd x = fixed_point_ne(g.game);
    CHECK(fixed_point_residual(g.game, x, 0.05) <= 1e-10);
    CHECK(best_response_check(g.game, x, 1e-6).ok);
  }
}
