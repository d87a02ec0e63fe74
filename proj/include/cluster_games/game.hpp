#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/rng.hpp"
#include "cluster_games/sets.hpp"

namespace cluster_games {

/// Index bookkeeping for a multi-cluster game: H clusters, N_h agents and
/// p_h decision coordinates per cluster. Agents are numbered globally,
/// cluster by cluster; cluster h owns the coordinate slice
/// [offset(h), offset(h) + p_h).
class GameLayout {
 public:
  GameLayout(std::vector<int> agents_per_cluster,
             std::vector<int> dims_per_cluster)
      : agents_(std::move(agents_per_cluster)),
        dims_(std::move(dims_per_cluster)) {
    if (agents_.empty() || agents_.size() != dims_.size())
      throw InvalidSpec("layout: need one agent count and dim per cluster");
    offsets_.resize(dims_.size() + 1, 0);
    first_agent_.resize(agents_.size() + 1, 0);
    for (std::size_t h = 0; h < dims_.size(); ++h) {
      if (agents_[h] < 1 || dims_[h] < 1)
        throw InvalidSpec("layout: counts must be at least 1");
      offsets_[h + 1] = offsets_[h] + dims_[h];
      first_agent_[h + 1] = first_agent_[h] + agents_[h];
    }
    cluster_of_.reserve(agent_count());
    for (std::size_t h = 0; h < agents_.size(); ++h)
      for (int i = 0; i < agents_[h]; ++i)
        cluster_of_.push_back(static_cast<int>(h));
  }

  int cluster_count() const { return static_cast<int>(agents_.size()); }
  int agent_count() const { return first_agent_.back(); }
  int total_dim() const { return offsets_.back(); }
  int agents_in(int h) const { return agents_[h]; }
  int dim_of(int h) const { return dims_[h]; }
  int offset(int h) const { return offsets_[h]; }
  int first_agent(int h) const { return first_agent_[h]; }
  int cluster_of_agent(int agent) const { return cluster_of_[agent]; }
  int rank_in_cluster(int agent) const {
    return agent - first_agent_[cluster_of_[agent]];
  }

  /// Cluster h's block of a stacked decision vector.
  Eigen::VectorXd slice(int h, const Eigen::VectorXd& x) const {
    if (x.size() != total_dim())
      throw DimensionMismatch("slice: wrong stacked dimension");
    return x.segment(offsets_[h], dims_[h]);
  }

 private:
  std::vector<int> agents_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<int> first_agent_;
  std::vector<int> cluster_of_;
};

/// One agent's differentiable cost oracle: full-vector value and the
/// gradient with respect to the agent's own cluster block. Oracles must be
/// pure; they may be called concurrently.
struct AgentCost {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> own_gradient;
};

class ClusterGame {
 public:
  ClusterGame(GameLayout layout, std::vector<AgentCost> agents,
              std::vector<ConvexSet> action_sets)
      : layout_(std::move(layout)),
        agents_(std::move(agents)),
        action_sets_(std::move(action_sets)) {
    validate();
  }

  /// Unconstrained game: every action set is the full space.
  ClusterGame(GameLayout layout, std::vector<AgentCost> agents)
      : layout_(std::move(layout)), agents_(std::move(agents)) {
    action_sets_.reserve(layout_.cluster_count());
    for (int h = 0; h < layout_.cluster_count(); ++h)
      action_sets_.push_back(ConvexSet::full_space(layout_.dim_of(h)));
    validate();
  }

  const GameLayout& layout() const { return layout_; }
  const std::vector<AgentCost>& agents() const { return agents_; }
  const AgentCost& agent(int i) const { return agents_[i]; }
  const std::vector<ConvexSet>& action_sets() const { return action_sets_; }
  const ConvexSet& action_set(int h) const { return action_sets_[h]; }

  /// F_h(x): average cost of cluster h's agents at the joint action x.
  double cluster_cost(int h, const Eigen::VectorXd& x) const {
    check_x(x);
    double sum = 0.0;
    for (int i = layout_.first_agent(h);
         i < layout_.first_agent(h) + layout_.agents_in(h); ++i)
      sum += agents_[i].value(x);
    return sum / layout_.agents_in(h);
  }

  /// Game mapping: the stacked own-block gradients of the cluster costs.
  Eigen::VectorXd game_mapping(const Eigen::VectorXd& x) const {
    check_x(x);
    Eigen::VectorXd m(layout_.total_dim());
    for (int h = 0; h < layout_.cluster_count(); ++h) {
      Eigen::VectorXd block = Eigen::VectorXd::Zero(layout_.dim_of(h));
      for (int i = layout_.first_agent(h);
           i < layout_.first_agent(h) + layout_.agents_in(h); ++i)
        block += agents_[i].own_gradient(x);
      m.segment(layout_.offset(h), layout_.dim_of(h)) =
          block / layout_.agents_in(h);
    }
    return m;
  }

  /// Blockwise projection of a stacked vector onto X_1 x ... x X_H.
  Eigen::VectorXd project_joint(const Eigen::VectorXd& x,
                                const ProjectionOptions& opts = {}) const {
    check_x(x);
    Eigen::VectorXd out(x.size());
    for (int h = 0; h < layout_.cluster_count(); ++h)
      out.segment(layout_.offset(h), layout_.dim_of(h)) =
          action_sets_[h].project(layout_.slice(h, x), opts);
    return out;
  }

 private:
  void validate() const {
    if (static_cast<int>(agents_.size()) != layout_.agent_count())
      throw InvalidSpec("game: agent oracle count != layout agent count");
    if (static_cast<int>(action_sets_.size()) != layout_.cluster_count())
      throw InvalidSpec("game: need one action set per cluster");
    for (int h = 0; h < layout_.cluster_count(); ++h)
      if (action_sets_[h].dim() != layout_.dim_of(h))
        throw DimensionMismatch("game: action set dim != cluster dim");
  }

  void check_x(const Eigen::VectorXd& x) const {
    if (x.size() != layout_.total_dim())
      throw DimensionMismatch("joint action has wrong dimension");
  }

  GameLayout layout_;
  std::vector<AgentCost> agents_;
  std::vector<ConvexSet> action_sets_;
};

/// Sampled estimates of the game-mapping monotonicity modulus and the
/// agent-gradient Lipschitz constant. Estimates, not certificates: they
/// bound the true constants only over the sampled pairs.
struct GameDiagnostics {
  double mu_hat = 0.0;
  double l_hat = 0.0;
};

using PointSampler = std::function<Eigen::VectorXd()>;

inline PointSampler make_box_sampler(int dim, double half_width, Rng& rng) {
  return [dim, half_width, &rng]() {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.uniform(-half_width, half_width);
    return x;
  };
}

/// min over sampled pairs of <M(x) - M(y), x - y> / ||x - y||^2. A negative
/// value flags a game that violates the strong-monotonicity assumption.
inline double estimate_monotonicity(const ClusterGame& game,
                                    const PointSampler& sampler,
                                    int n_samples) {
  if (n_samples < 2) throw InvalidParams("need at least 2 samples");
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = sampler();
    const Eigen::VectorXd y = sampler();
    const Eigen::VectorXd d = x - y;
    const double dd = d.squaredNorm();
    if (dd == 0.0) continue;
    const double val =
        (game.game_mapping(x) - game.game_mapping(y)).dot(d) / dd;
    worst = std::min(worst, val);
  }
  return std::isfinite(worst) ? worst : 0.0;
}

/// max over sampled pairs and agents of the own-gradient difference ratio
/// ||grad_h f_i(x) - grad_h f_i(y)|| / ||x - y||.
inline double estimate_lipschitz(const ClusterGame& game,
                                 const PointSampler& sampler, int n_samples) {
  if (n_samples < 2) throw InvalidParams("need at least 2 samples");
  double best = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = sampler();
    const Eigen::VectorXd y = sampler();
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    for (const auto& agent : game.agents()) {
      const double diff =
          (agent.own_gradient(x) - agent.own_gradient(y)).norm();
      best = std::max(best, diff / dist);
    }
  }
  return best;
}

inline GameDiagnostics diagnose_game(const ClusterGame& game, Rng& rng,
                                     int n_samples = 200,
                                     double box_half_width = 10.0) {
  const auto sampler =
      make_box_sampler(game.layout().total_dim(), box_half_width, rng);
  GameDiagnostics d;
  d.mu_hat = estimate_monotonicity(game, sampler, n_samples);
  d.l_hat = estimate_lipschitz(game, sampler, n_samples);
  return d;
}

// --- quadratic game family ---------------------------------------------

/// f_i(x) = 0.5 x^T A x + b^T x + c with own-block gradient taken from the
/// symmetrized quadratic form.
struct QuadraticAgentSpec {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;
};

/// A quadratic multi-cluster game plus its affine game mapping
/// M(x) = J x + m, kept for ground-truth linear solves in tests and the
/// full-information baseline.
struct QuadraticGame {
  ClusterGame game;
  Eigen::MatrixXd mapping_jacobian;  // J, p x p
  Eigen::VectorXd mapping_offset;    // m, length p
  std::vector<QuadraticAgentSpec> specs;

  /// Unconstrained stationary point of the mapping, J x = -m.
  Eigen::VectorXd unconstrained_equilibrium() const {
    return mapping_jacobian.fullPivLu().solve(-mapping_offset);
  }
};

inline QuadraticGame build_quadratic_game(std::vector<QuadraticAgentSpec> specs,
                                          GameLayout layout,
                                          std::vector<ConvexSet> action_sets) {
  const int p = layout.total_dim();
  if (static_cast<int>(specs.size()) != layout.agent_count())
    throw InvalidSpec("quadratic game: one spec per agent required");
  for (const auto& s : specs)
    if (s.A.rows() != p || s.A.cols() != p || s.b.size() != p)
      throw InvalidSpec("quadratic game: spec dimensions must equal p");

  std::vector<AgentCost> agents;
  agents.reserve(specs.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < static_cast<int>(specs.size()); ++i) {
    const int h = layout.cluster_of_agent(i);
    const int o = layout.offset(h);
    const int ph = layout.dim_of(h);
    auto sym = std::make_shared<Eigen::MatrixXd>(
        0.5 * (specs[i].A + specs[i].A.transpose()));
    auto b = std::make_shared<Eigen::VectorXd>(specs[i].b);
    const double c = specs[i].c;
    auto full = std::make_shared<Eigen::MatrixXd>(specs[i].A);

    agents.push_back(AgentCost{
        [full, b, c](const Eigen::VectorXd& x) {
          return 0.5 * x.dot(*full * x) + b->dot(x) + c;
        },
        [sym, b, o, ph](const Eigen::VectorXd& x) {
          return Eigen::VectorXd((*sym * x + *b).segment(o, ph));
        }});

    jac.middleRows(o, ph) += sym->middleRows(o, ph) / layout.agents_in(h);
    off.segment(o, ph) += specs[i].b.segment(o, ph) /
                          static_cast<double>(layout.agents_in(h));
  }

  ClusterGame game = action_sets.empty()
                         ? ClusterGame(layout, std::move(agents))
                         : ClusterGame(layout, std::move(agents),
                                       std::move(action_sets));
  return QuadraticGame{std::move(game), std::move(jac), std::move(off),
                       std::move(specs)};
}

/// Seeded random quadratic game whose mapping Jacobian has a symmetric part
/// with smallest eigenvalue at least mu_min (the raw draw is shifted up on
/// the diagonal when it falls short).
inline QuadraticGame random_quadratic_game(const GameLayout& layout,
                                           std::uint64_t seed,
                                           double mu_min = 0.5,
                                           std::vector<ConvexSet> sets = {}) {
  if (mu_min <= 0.0) throw InvalidSpec("mu_min must be positive");
  Rng rng(seed);
  const int p = layout.total_dim();
  std::vector<QuadraticAgentSpec> specs(layout.agent_count());
  for (auto& s : specs) {
    s.A.resize(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) s.A(r, c) = rng.uniform(-1.0, 1.0);
    s.A += Eigen::MatrixXd::Identity(p, p) * 2.0;
    s.b.resize(p);
    for (int r = 0; r < p; ++r) s.b(r) = rng.uniform(-2.0, 2.0);
    s.c = rng.uniform(-1.0, 1.0);
  }

  // Probe the mapping Jacobian of the draw and lift every agent's diagonal
  // so the symmetric part clears mu_min. A diagonal shift on each A shifts
  // the mapping Jacobian by exactly the same amount.
  QuadraticGame probe = build_quadratic_game(specs, layout, {});
  const Eigen::MatrixXd sym_jac =
      0.5 * (probe.mapping_jacobian + probe.mapping_jacobian.transpose());
  const double lambda_min =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym_jac)
          .eigenvalues()
          .minCoeff();
  if (lambda_min < mu_min) {
    const double shift = mu_min - lambda_min;
    for (auto& s : specs) s.A += shift * Eigen::MatrixXd::Identity(p, p);
  }
  return build_quadratic_game(std::move(specs), layout, std::move(sets));
}

}  // namespace cluster_games
