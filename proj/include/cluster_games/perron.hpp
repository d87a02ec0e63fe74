#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/weights.hpp"

namespace cluster_games {

struct PowerIterationOptions {
  double tol = 1e-14;       // successive-iterate change, infinity norm
  long max_iters = 1000000;
};

namespace detail {

/// Power iteration for the eigenvalue-1 fixed point of a column-stochastic
/// linear map, started from the uniform stochastic vector and renormalized
/// to unit sum each step.
inline Eigen::VectorXd stochastic_fixed_point(const Eigen::MatrixXd& m,
                                              const PowerIterationOptions& o) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / double(n));
  for (long it = 0; it < o.max_iters; ++it) {
    Eigen::VectorXd next = m * x;
    next /= next.sum();
    const double change = (next - x).lpNorm<Eigen::Infinity>();
    x = std::move(next);
    if (change <= o.tol) return x;
  }
  throw NoConvergence("power iteration did not converge");
}

}  // namespace detail

/// Left Perron vector of a row-stochastic matrix: phi^T R = phi^T,
/// phi > 0, sum(phi) = 1.
inline Eigen::VectorXd perron_left(const WeightMatrix& R,
                                   const PowerIterationOptions& opts = {}) {
  if (!is_row_stochastic(R.entries, 1e-9))
    throw InvalidSpec("perron_left expects a row-stochastic matrix");
  return detail::stochastic_fixed_point(R.entries.transpose(), opts);
}

/// Right Perron vector of a column-stochastic matrix: C pi = pi,
/// pi > 0, sum(pi) = 1.
inline Eigen::VectorXd perron_right(const WeightMatrix& C,
                                    const PowerIterationOptions& opts = {}) {
  if (!is_column_stochastic(C.entries, 1e-9))
    throw InvalidSpec("perron_right expects a column-stochastic matrix");
  return detail::stochastic_fixed_point(C.entries, opts);
}

/// Perron data for one inter-cluster matrix R and the per-cluster C_h.
struct PerronVectors {
  Eigen::VectorXd phi;              // left eigenvector of R, length N
  std::vector<Eigen::VectorXd> pi;  // right eigenvectors of each C_h
};

inline PerronVectors compute_perron(const WeightMatrix& R,
                                    const std::vector<WeightMatrix>& Cs,
                                    const PowerIterationOptions& opts = {}) {
  PerronVectors out;
  out.phi = perron_left(R, opts);
  out.pi.reserve(Cs.size());
  for (const auto& C : Cs) out.pi.push_back(perron_right(C, opts));
  return out;
}

/// Infinity-norm residual of phi^T R = phi^T.
inline double perron_left_residual(const WeightMatrix& R,
                                   const Eigen::VectorXd& phi) {
  return (R.entries.transpose() * phi - phi).lpNorm<Eigen::Infinity>();
}

/// Infinity-norm residual of C pi = pi.
inline double perron_right_residual(const WeightMatrix& C,
                                    const Eigen::VectorXd& pi) {
  return (C.entries * pi - pi).lpNorm<Eigen::Infinity>();
}

}  // namespace cluster_games
