#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/game.hpp"
#include "cluster_games/rng.hpp"

namespace cluster_games {

struct FixedPointOptions {
  double alpha = 0.05;
  double tol = 1e-10;
  long max_iters = 1000000;
  std::optional<Eigen::VectorXd> x0{};
  ProjectionOptions projection{};
};

/// Full-information equilibrium baseline: iterates the projected fixed
/// point x <- P_X[x - alpha M(x)]. The returned point satisfies
/// ||x - P_X[x - alpha M(x)]|| <= tol under re-evaluation. On detected
/// divergence the step-size is halved and the iteration restarts, at most
/// 20 times.
inline Eigen::VectorXd fixed_point_ne(const ClusterGame& game,
                                      const FixedPointOptions& opts = {}) {
  if (!(opts.alpha > 0.0)) throw InvalidSpec("fixed_point_ne: alpha <= 0");
  const int p = game.layout().total_dim();
  const Eigen::VectorXd start =
      opts.x0 ? game.project_joint(*opts.x0, opts.projection)
              : game.project_joint(Eigen::VectorXd::Zero(p), opts.projection);

  double alpha = opts.alpha;
  for (int attempt = 0; attempt <= 20; ++attempt, alpha *= 0.5) {
    Eigen::VectorXd x = start;
    double initial_residual = -1.0;
    bool diverged = false;
    for (long it = 0; it < opts.max_iters; ++it) {
      const Eigen::VectorXd next =
          game.project_joint(x - alpha * game.game_mapping(x),
                             opts.projection);
      const double residual = (x - next).norm();
      if (!std::isfinite(residual) ||
          (initial_residual >= 0.0 &&
           residual > 1e8 * (1.0 + initial_residual))) {
        diverged = true;
        break;
      }
      if (initial_residual < 0.0) initial_residual = residual;
      if (residual <= opts.tol) return x;
      x = next;
    }
    if (!diverged) break;  // ran out of iterations while stable
  }
  throw NoConvergence("fixed_point_ne did not reach the residual tolerance");
}

struct BestResponseOptions {
  int restarts = 5;
  long max_iters = 20000;
  double step_tol = 1e-12;
  std::uint64_t seed = 1;
  ProjectionOptions projection{};
};

/// Verdict of the unilateral-deviation check, with the best cost
/// improvement found for each cluster.
struct BestResponseReport {
  bool ok = false;
  std::vector<double> improvement;  // per cluster, >= 0
};

namespace detail {

/// Projected gradient descent on u -> F_h(u, x_rest) over X_h with
/// backtracking on the prox-gradient sufficient-decrease condition.
inline Eigen::VectorXd minimize_cluster_cost(const ClusterGame& game, int h,
                                             const Eigen::VectorXd& x_joint,
                                             const Eigen::VectorXd& u0,
                                             const BestResponseOptions& opts) {
  const auto& layout = game.layout();
  const int o = layout.offset(h);
  const int ph = layout.dim_of(h);
  Eigen::VectorXd joint = x_joint;

  const auto cost = [&](const Eigen::VectorXd& u) {
    joint.segment(o, ph) = u;
    return game.cluster_cost(h, joint);
  };
  const auto grad = [&](const Eigen::VectorXd& u) {
    joint.segment(o, ph) = u;
    return Eigen::VectorXd(
        game.game_mapping(joint).segment(o, ph));
  };

  Eigen::VectorXd u = game.action_set(h).project(u0, opts.projection);
  double step = 1.0;
  for (long it = 0; it < opts.max_iters; ++it) {
    const double fu = cost(u);
    const Eigen::VectorXd g = grad(u);
    Eigen::VectorXd candidate;
    // Backtrack until the quadratic upper model holds.
    for (int bt = 0; bt < 60; ++bt) {
      candidate =
          game.action_set(h).project(u - step * g, opts.projection);
      const Eigen::VectorXd d = candidate - u;
      const double model = fu + g.dot(d) + d.squaredNorm() / (2.0 * step);
      if (cost(candidate) <= model + 1e-14 * (1.0 + std::abs(fu))) break;
      step *= 0.5;
    }
    const double move = (candidate - u).norm();
    u = candidate;
    if (move <= opts.step_tol * (1.0 + u.norm())) break;
    step = std::min(step * 2.0, 1e6);  // gentle recovery
  }
  return u;
}

}  // namespace detail

/// Checks the equilibrium condition cluster by cluster: minimizes
/// F_h(., x_rest) over X_h from several seeded starts and reports the best
/// improvement found. Passes when no cluster improves by more than tol.
inline BestResponseReport best_response_check(
    const ClusterGame& game, const Eigen::VectorXd& x, double tol,
    const BestResponseOptions& opts = {}) {
  const auto& layout = game.layout();
  if (x.size() != layout.total_dim())
    throw DimensionMismatch("best_response_check: wrong x dimension");
  Rng rng(opts.seed);
  BestResponseReport report;
  report.improvement.assign(layout.cluster_count(), 0.0);

  for (int h = 0; h < layout.cluster_count(); ++h) {
    const int o = layout.offset(h);
    const int ph = layout.dim_of(h);
    const Eigen::VectorXd own = x.segment(o, ph);
    const double base = game.cluster_cost(h, x);
    double best = base;
    for (int r = 0; r < opts.restarts; ++r) {
      Eigen::VectorXd start = own;
      if (r > 0) {
        for (int j = 0; j < ph; ++j)
          start(j) += rng.uniform(-1.0, 1.0) * (1.0 + std::abs(own(j)));
      }
      const Eigen::VectorXd u =
          detail::minimize_cluster_cost(game, h, x, start, opts);
      Eigen::VectorXd joint = x;
      joint.segment(o, ph) = u;
      best = std::min(best, game.cluster_cost(h, joint));
    }
    report.improvement[h] = std::max(0.0, base - best);
  }

  report.ok = true;
  for (double imp : report.improvement)
    if (imp > tol) report.ok = false;
  return report;
}

}  // namespace cluster_games
