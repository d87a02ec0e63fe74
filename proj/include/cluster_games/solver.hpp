#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cluster_games/contraction.hpp"
#include "cluster_games/errors.hpp"
#include "cluster_games/game.hpp"
#include "cluster_games/perron.hpp"
#include "cluster_games/rng.hpp"
#include "cluster_games/weights.hpp"

namespace cluster_games {

struct SolverConfig {
  double alpha = 1e-2;        // gradient step-size
  double gamma = 0.5;         // averaging parameter in (0, 1]
  int max_rounds = 10000;
  double gap_tolerance = 0.0;  // stop when the phi-norm iterate change drops
                               // below this; 0 disables early stopping
  std::uint64_t seed = 0;
  int record_every = 1;
  ProjectionOptions projection{};

  void validate() const {
    if (!(alpha > 0.0)) throw InvalidSpec("solver: alpha must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw InvalidSpec("solver: gamma must lie in (0, 1]");
    if (max_rounds < 1) throw InvalidSpec("solver: max_rounds must be >= 1");
    if (gap_tolerance < 0.0)
      throw InvalidSpec("solver: gap_tolerance must be >= 0");
    if (record_every < 1)
      throw InvalidSpec("solver: record_every must be >= 1");
  }
};

/// Per-agent state of the distributed iteration. Row i of z and v is agent
/// i's running estimate of the full joint action; y[h] stacks cluster h's
/// gradient-tracking vectors (one row per in-cluster agent). grads[h]
/// caches the own-block gradients at the current v, so each round costs a
/// single oracle sweep.
struct SolverState {
  Eigen::MatrixXd z;                  // N x p
  Eigen::MatrixXd v;                  // N x p
  std::vector<Eigen::MatrixXd> y;     // per cluster, N_h x p_h
  std::vector<Eigen::MatrixXd> grads; // per cluster, N_h x p_h, at current v
  int round = 0;
};

struct RoundMetrics {
  int round = 0;
  double optimality_gap = 0.0;  // phi-weighted distance to replicated NE
  double consensus_error = 0.0;
  double tracking_error = 0.0;
  double iterate_change = 0.0;  // phi-norm of z(k) - z(k-1); 0 at round 0
};

/// Divergence guard tripped: some iterate entry became non-finite.
/// Carries the failing round and the metrics recorded up to that point.
class NonFiniteIterate : public Error {
 public:
  NonFiniteIterate(int round, std::vector<RoundMetrics> metrics)
      : Error("non-finite iterate at round " + std::to_string(round)),
        round_(round),
        metrics_(std::move(metrics)) {}
  int round() const { return round_; }
  const std::vector<RoundMetrics>& metrics() const { return metrics_; }

 private:
  int round_;
  std::vector<RoundMetrics> metrics_;
};

/// Own-block gradients of every agent, evaluated at its own row of v and
/// grouped per cluster.
inline std::vector<Eigen::MatrixXd> evaluate_cluster_gradients(
    const ClusterGame& game, const Eigen::MatrixXd& v) {
  const auto& layout = game.layout();
  std::vector<Eigen::MatrixXd> grads(layout.cluster_count());
  for (int h = 0; h < layout.cluster_count(); ++h)
    grads[h].resize(layout.agents_in(h), layout.dim_of(h));
  for (int i = 0; i < layout.agent_count(); ++i) {
    const int h = layout.cluster_of_agent(i);
    grads[h].row(layout.rank_in_cluster(i)) =
        game.agent(i).own_gradient(v.row(i).transpose()).transpose();
  }
  return grads;
}

/// Initial state: v = z (own block projected onto X_h if infeasible),
/// tracking variables seeded with the gradients at the starting point.
inline SolverState init_state(const ClusterGame& game,
                              const Eigen::MatrixXd& initial_z,
                              const ProjectionOptions& opts = {}) {
  const auto& layout = game.layout();
  if (initial_z.rows() != layout.agent_count() ||
      initial_z.cols() != layout.total_dim())
    throw DimensionMismatch("init_state: initial z must be N x p");

  SolverState state;
  state.z = initial_z;
  for (int i = 0; i < layout.agent_count(); ++i) {
    const int h = layout.cluster_of_agent(i);
    const int o = layout.offset(h);
    const int ph = layout.dim_of(h);
    const Eigen::VectorXd own = state.z.row(i).segment(o, ph).transpose();
    if (!game.action_set(h).contains(own, 0.0))
      state.z.row(i).segment(o, ph) =
          game.action_set(h).project(own, opts).transpose();
  }
  state.v = state.z;
  state.grads = evaluate_cluster_gradients(game, state.v);
  state.y = state.grads;
  state.round = 0;
  return state;
}

/// Seeded-random start: entries uniform in [-1, 1], own blocks projected.
inline SolverState init_state(const ClusterGame& game, std::uint64_t seed,
                              const ProjectionOptions& opts = {}) {
  const auto& layout = game.layout();
  Rng rng(seed);
  Eigen::MatrixXd z0(layout.agent_count(), layout.total_dim());
  for (Eigen::Index i = 0; i < z0.rows(); ++i)
    for (Eigen::Index j = 0; j < z0.cols(); ++j)
      z0(i, j) = rng.uniform(-1.0, 1.0);
  return init_state(game, z0, opts);
}

/// Consensus update: v(k+1) = R z(k).
inline Eigen::MatrixXd consensus_step(const SolverState& state,
                                      const WeightMatrix& R) {
  if (R.size() != state.z.rows())
    throw DimensionMismatch("consensus_step: R size != agent count");
  return R.entries * state.z;
}

/// Gradient-tracking update: y_h(k+1) = C_h y_h(k) + G_h(k+1) - G_h(k).
inline std::vector<Eigen::MatrixXd> tracking_step(
    const SolverState& state, const std::vector<WeightMatrix>& Cs,
    const std::vector<Eigen::MatrixXd>& grads_new,
    const std::vector<Eigen::MatrixXd>& grads_old) {
  if (Cs.size() != state.y.size() || grads_new.size() != state.y.size() ||
      grads_old.size() != state.y.size())
    throw DimensionMismatch("tracking_step: cluster count mismatch");
  std::vector<Eigen::MatrixXd> next(state.y.size());
  for (std::size_t h = 0; h < state.y.size(); ++h) {
    if (Cs[h].size() != state.y[h].rows())
      throw DimensionMismatch("tracking_step: C_h size != cluster agents");
    next[h] = Cs[h].entries * state.y[h] + grads_new[h] - grads_old[h];
  }
  return next;
}

/// Decision update. Own block: convex combination of the projected
/// consensus point and the projected gradient step,
/// (1-gamma) P[v] + gamma P[v - alpha y]; other blocks pass through
/// unchanged from v(k+1).
inline Eigen::MatrixXd decision_step(const ClusterGame& game,
                                     const SolverState& state,
                                     const SolverConfig& config) {
  const auto& layout = game.layout();
  Eigen::MatrixXd z_next = state.v;
  for (int i = 0; i < layout.agent_count(); ++i) {
    const int h = layout.cluster_of_agent(i);
    const int o = layout.offset(h);
    const int ph = layout.dim_of(h);
    const int r = layout.rank_in_cluster(i);
    const Eigen::VectorXd v_own = state.v.row(i).segment(o, ph).transpose();
    const Eigen::VectorXd stepped =
        v_own - config.alpha * state.y[h].row(r).transpose();
    const auto& set = game.action_set(h);
    z_next.row(i).segment(o, ph) =
        ((1.0 - config.gamma) * set.project(v_own, config.projection) +
         config.gamma * set.project(stepped, config.projection))
            .transpose();
  }
  return z_next;
}

/// One synchronous round in place: consensus, oracle sweep, tracking,
/// decision. All agents read only round-k data.
inline void advance_round(const ClusterGame& game, const WeightMatrix& R,
                          const std::vector<WeightMatrix>& Cs,
                          const SolverConfig& config, SolverState& state) {
  state.v = consensus_step(state, R);
  std::vector<Eigen::MatrixXd> grads_new =
      evaluate_cluster_gradients(game, state.v);
  state.y = tracking_step(state, Cs, grads_new, state.grads);
  state.grads = std::move(grads_new);
  state.z = decision_step(game, state, config);
  state.round += 1;
}

// --- error metrics ------------------------------------------------------

/// D(v): sqrt of the phi-weighted pairwise disagreement, over all ordered
/// agent pairs.
inline double consensus_error(const Eigen::MatrixXd& v,
                              const Eigen::VectorXd& phi) {
  if (v.rows() != phi.size())
    throw DimensionMismatch("consensus_error: phi size != agent count");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = i + 1; j < v.rows(); ++j)
      acc += 2.0 * phi(i) * phi(j) * (v.row(i) - v.row(j)).squaredNorm();
  return std::sqrt(acc);
}

/// S(y): per-cluster pi-weighted deviation of the tracking variables from
/// their pi-scaled cluster total, summed over clusters.
inline double tracking_error(const std::vector<Eigen::MatrixXd>& y,
                             const std::vector<Eigen::VectorXd>& pi) {
  if (y.size() != pi.size())
    throw DimensionMismatch("tracking_error: cluster count mismatch");
  double total = 0.0;
  for (std::size_t h = 0; h < y.size(); ++h) {
    if (y[h].rows() != pi[h].size())
      throw DimensionMismatch("tracking_error: pi size != cluster agents");
    const Eigen::RowVectorXd column_total = y[h].colwise().sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y[h].rows(); ++i)
      acc += (y[h].row(i) - pi[h](i) * column_total).squaredNorm() / pi[h](i);
    total += std::sqrt(acc);
  }
  return total;
}

/// ||z - 1 (x*)^T||_phi: phi-weighted distance of the estimate matrix from
/// the replicated equilibrium.
inline double optimality_gap(const Eigen::MatrixXd& z,
                             const Eigen::VectorXd& xstar,
                             const Eigen::VectorXd& phi) {
  if (z.cols() != xstar.size())
    throw DimensionMismatch("optimality_gap: x* length != p");
  return weighted_norm(z.rowwise() - xstar.transpose(), phi);
}

/// Relative residual of the tracking-conservation identity
/// sum_i y_h^i = sum_i grad_h f_i(v^i), maximized over clusters.
inline double tracking_conservation_residual(const ClusterGame& game,
                                             const SolverState& state) {
  const auto grads = evaluate_cluster_gradients(game, state.v);
  double worst = 0.0;
  for (std::size_t h = 0; h < state.y.size(); ++h) {
    const Eigen::RowVectorXd y_total = state.y[h].colwise().sum();
    const Eigen::RowVectorXd g_total = grads[h].colwise().sum();
    const double rel =
        (y_total - g_total).norm() / (1.0 + g_total.norm());
    worst = std::max(worst, rel);
  }
  return worst;
}

// --- full run -----------------------------------------------------------

struct RunResult {
  SolverState state;
  std::vector<RoundMetrics> metrics;
  bool converged = false;  // gap_tolerance reached before max_rounds
};

using RecordHook = std::function<void(const SolverState&, const RoundMetrics&)>;

namespace detail {

inline bool all_finite(const SolverState& s) {
  if (!s.z.allFinite() || !s.v.allFinite()) return false;
  for (const auto& yh : s.y)
    if (!yh.allFinite()) return false;
  return true;
}

}  // namespace detail

/// Runs the distributed iteration until the phi-norm iterate change falls
/// to gap_tolerance or max_rounds elapse. Validates the communication
/// structure first (strong connectivity and self-loops, recovered from the
/// weight matrices' positivity patterns). Deterministic for fixed inputs.
inline RunResult run(const ClusterGame& game, const WeightMatrix& R,
                     const std::vector<WeightMatrix>& Cs,
                     const SolverConfig& config,
                     const std::optional<Eigen::VectorXd>& xstar = {},
                     const RecordHook& hook = {}) {
  config.validate();
  const auto& layout = game.layout();
  if (R.size() != layout.agent_count())
    throw DimensionMismatch("run: R size != agent count");
  if (static_cast<int>(Cs.size()) != layout.cluster_count())
    throw DimensionMismatch("run: need one C_h per cluster");
  if (!is_row_stochastic(R.entries))
    throw InvalidSpec("run: R is not row-stochastic");

  const DirectedGraph inter = pattern_graph(R.entries);
  if (!inter.has_all_self_loops())
    throw MissingSelfLoop("run: inter-cluster graph needs self-loops");
  if (!is_strongly_connected(inter))
    throw NotStronglyConnected("run: inter-cluster graph");
  for (int h = 0; h < layout.cluster_count(); ++h) {
    if (Cs[h].size() != layout.agents_in(h))
      throw DimensionMismatch("run: C_h size != cluster agent count");
    if (!is_column_stochastic(Cs[h].entries))
      throw InvalidSpec("run: C_h is not column-stochastic");
    const DirectedGraph intra = pattern_graph(Cs[h].entries);
    if (!intra.has_all_self_loops())
      throw MissingSelfLoop("run: intra-cluster graph needs self-loops");
    if (!is_strongly_connected(intra))
      throw NotStronglyConnected("run: intra-cluster graph");
  }

  const PerronVectors perron = compute_perron(R, Cs);

  SolverState state = init_state(game, config.seed, config.projection);
  std::vector<RoundMetrics> metrics;

  const auto record = [&](double iterate_change) {
    RoundMetrics m;
    m.round = state.round;
    m.optimality_gap =
        xstar ? optimality_gap(state.z, *xstar, perron.phi) : 0.0;
    m.consensus_error = consensus_error(state.v, perron.phi);
    m.tracking_error = tracking_error(state.y, perron.pi);
    m.iterate_change = iterate_change;
    metrics.push_back(m);
    if (hook) hook(state, m);
  };

  record(0.0);

  RunResult result;
  for (int k = 0; k < config.max_rounds; ++k) {
    const Eigen::MatrixXd z_prev = state.z;
    advance_round(game, R, Cs, config, state);
    if (!detail::all_finite(state))
      throw NonFiniteIterate(state.round, std::move(metrics));
    const double change = weighted_norm(state.z - z_prev, perron.phi);
    if (state.round % config.record_every == 0 ||
        state.round == config.max_rounds)
      record(change);
    if (config.gap_tolerance > 0.0 && change <= config.gap_tolerance) {
      if (state.round % config.record_every != 0 &&
          state.round != config.max_rounds)
        record(change);
      result.converged = true;
      break;
    }
  }

  result.state = std::move(state);
  result.metrics = std::move(metrics);
  return result;
}

}  // namespace cluster_games
