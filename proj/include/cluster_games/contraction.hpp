#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/graph.hpp"
#include "cluster_games/weights.hpp"

namespace cluster_games {

/// sqrt(sum_i w_i * ||row_i(u)||^2). With w = phi this is the phi-weighted
/// norm; with w = 1/pi entries it realizes the pi-inverse norm.
inline double weighted_norm(const Eigen::MatrixXd& u,
                            const Eigen::VectorXd& w) {
  if (u.rows() != w.size())
    throw DimensionMismatch("weighted_norm: row count != weight count");
  if (w.size() > 0 && w.minCoeff() <= 0.0)
    throw InvalidSpec("weighted_norm: weights must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    acc += w(i) * u.row(i).squaredNorm();
  return std::sqrt(acc);
}

/// One cluster's mixing data: column-stochastic weights, Perron vector,
/// and the communication graph they comply with.
struct ClusterMixing {
  WeightMatrix C;
  Eigen::VectorXd pi;
  DirectedGraph graph;
};

/// Contraction factor of the intra-cluster mixing step: the worst cluster's
/// sqrt(1 - min^2(pi) min+(C)^2 / (max^3(pi) D(G) K(G))). Single-node
/// clusters contribute 0. Lies in [0, 1); 0 only when every cluster is a
/// singleton.
inline double sigma_column(const std::vector<ClusterMixing>& clusters) {
  if (clusters.empty()) throw InvalidSpec("sigma_column: no clusters");
  double worst = 0.0;
  for (const auto& cl : clusters) {
    if (cl.graph.node_count() == 1) continue;  // trivially in consensus
    const double pi_min = cl.pi.minCoeff();
    const double pi_max = cl.pi.maxCoeff();
    const double c_min = min_positive_entry(cl.C.entries);
    const double d = diameter(cl.graph);
    const double k = max_edge_utility(cl.graph);
    const double ratio =
        (pi_min * pi_min * c_min * c_min) / (pi_max * pi_max * pi_max * d * k);
    worst = std::max(worst, std::sqrt(std::max(0.0, 1.0 - ratio)));
  }
  return worst;
}

struct RowContraction {
  double c;      // per-step shrink coefficient, in (0, 1]
  double sigma;  // sqrt(1 - c^2), in [0, 1)
};

/// Contraction data of the inter-cluster mixing step:
/// c^2 = min(phi) min+(R)^2 / (max^2(phi) D(G) K(G)), sigma = sqrt(1 - c^2).
inline RowContraction sigma_row(const WeightMatrix& R,
                                const Eigen::VectorXd& phi,
                                const DirectedGraph& g) {
  if (R.size() != phi.size() || R.size() != g.node_count())
    throw DimensionMismatch("sigma_row: inconsistent sizes");
  const double phi_min = phi.minCoeff();
  const double phi_max = phi.maxCoeff();
  const double r_min = min_positive_entry(R.entries);
  const double d = diameter(g);
  const double k = max_edge_utility(g);
  const double c2 = (phi_min * r_min * r_min) / (phi_max * phi_max * d * k);
  const double c2_clamped = std::min(1.0, c2);
  return {std::sqrt(c2_clamped), std::sqrt(std::max(0.0, 1.0 - c2_clamped))};
}

}  // namespace cluster_games
