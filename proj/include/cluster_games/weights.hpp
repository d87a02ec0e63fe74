#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/graph.hpp"

namespace cluster_games {

enum class StochasticKind { RowStochastic, ColumnStochastic };

/// Nonnegative mixing matrix compliant with a graph: entries(i, j) > 0
/// exactly when edge (j, i) exists.
struct WeightMatrix {
  Eigen::MatrixXd entries;
  StochasticKind kind = StochasticKind::RowStochastic;

  int size() const { return static_cast<int>(entries.rows()); }
};

inline bool is_row_stochastic(const Eigen::MatrixXd& m, double tol = 1e-12) {
  if (m.minCoeff() < 0.0) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (std::abs(m.row(i).sum() - 1.0) > tol) return false;
  return true;
}

inline bool is_column_stochastic(const Eigen::MatrixXd& m,
                                 double tol = 1e-12) {
  if (m.minCoeff() < 0.0) return false;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (std::abs(m.col(j).sum() - 1.0) > tol) return false;
  return true;
}

/// Positivity pattern of the matrix must equal the edge set.
inline void validate_compliance(const WeightMatrix& w,
                                const DirectedGraph& g) {
  if (w.size() != g.node_count())
    throw DimensionMismatch("weight matrix size does not match graph");
  for (int i = 0; i < g.node_count(); ++i)
    for (int j = 0; j < g.node_count(); ++j) {
      const bool positive = w.entries(i, j) > 0.0;
      if (positive != g.has_edge(j, i))
        throw InvalidSpec("weight matrix not compliant with graph");
    }
}

/// Graph recovered from a matrix's positivity pattern; entries(i, j) > 0
/// becomes edge (j, i).
inline DirectedGraph pattern_graph(const Eigen::MatrixXd& entries) {
  const int n = static_cast<int>(entries.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (entries(i, j) > 0.0) edges.emplace_back(j, i);
  return DirectedGraph(n, std::move(edges));
}

/// Row-stochastic weights: every node averages its in-neighbors uniformly.
inline WeightMatrix uniform_row_stochastic(const DirectedGraph& g) {
  if (!g.has_all_self_loops())
    throw MissingSelfLoop("uniform_row_stochastic needs self-loops");
  const int n = g.node_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j : g.in_neighbors(i)) m(i, j) = 1.0 / g.in_degree(i);
  return {std::move(m), StochasticKind::RowStochastic};
}

/// Column-stochastic weights: every node splits its mass uniformly over
/// its out-neighbors.
inline WeightMatrix uniform_column_stochastic(const DirectedGraph& g) {
  if (!g.has_all_self_loops())
    throw MissingSelfLoop("uniform_column_stochastic needs self-loops");
  const int n = g.node_count();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i : g.out_neighbors(j)) m(i, j) = 1.0 / g.out_degree(j);
  return {std::move(m), StochasticKind::ColumnStochastic};
}

inline double min_positive_entry(const Eigen::MatrixXd& m) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) > 0.0) best = std::min(best, m(i, j));
  return best;
}

// --- CSV (one row per line, comma separated) ---------------------------

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
}

inline Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw InvalidSpec("ragged CSV matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace cluster_games
