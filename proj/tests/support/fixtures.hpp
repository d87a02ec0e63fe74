// Shared hand-built game fixtures.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cluster_games/game.hpp"

namespace cluster_games::testing {

/// Two scalar clusters, one agent each:
///   f1 = (x1 - 1)^2 + 0.5 x1 x2,  f2 = (x2 - 2)^2 + 0.5 x1 x2.
/// Mapping M(x) = [[2, 0.5], [0.5, 2]] x + (-2, -4); unconstrained
/// equilibrium (8/15, 28/15) = (0.53333..., 1.86666...).
inline QuadraticGame two_cluster_fixture(
    std::vector<ConvexSet> sets = {}) {
  GameLayout layout({1, 1}, {1, 1});
  Eigen::MatrixXd A1(2, 2), A2(2, 2);
  A1 << 2, 0.5, 0.5, 0;
  A2 << 0, 0.5, 0.5, 2;
  Eigen::VectorXd b1(2), b2(2);
  b1 << -2, 0;
  b2 << 0, -4;
  std::vector<QuadraticAgentSpec> specs{{A1, b1, 1.0}, {A2, b2, 4.0}};
  return build_quadratic_game(std::move(specs), layout, std::move(sets));
}

}  // namespace cluster_games::testing
