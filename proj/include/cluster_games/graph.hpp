#pragma once

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cluster_games/errors.hpp"
#include "cluster_games/rng.hpp"

namespace cluster_games {

/// Directed graph on nodes 0..n-1. Edges are ordered pairs (from, to);
/// an edge (j, i) means node i receives from node j. Immutable after
/// construction; duplicate edges and out-of-range indices are rejected.
class DirectedGraph {
 public:
  DirectedGraph(int node_count, std::vector<std::pair<int, int>> edges)
      : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ <= 0) throw InvalidSpec("graph needs at least one node");
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw InvalidSpec("duplicate edge");
    out_.assign(node_count_, {});
    in_.assign(node_count_, {});
    for (const auto& [from, to] : edges_) {
      if (from < 0 || from >= node_count_ || to < 0 || to >= node_count_)
        throw InvalidSpec("edge index out of range");
      out_[from].push_back(to);
      in_[to].push_back(from);
    }
    // edges_ is sorted, so neighbor lists come out ascending already;
    // in-lists need their own sort.
    for (auto& v : in_) std::sort(v.begin(), v.end());
  }

  int node_count() const { return node_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& out_neighbors(int v) const { return out_[v]; }
  const std::vector<int>& in_neighbors(int v) const { return in_[v]; }
  int out_degree(int v) const { return static_cast<int>(out_[v].size()); }
  int in_degree(int v) const { return static_cast<int>(in_[v].size()); }

  bool has_edge(int from, int to) const {
    return std::binary_search(edges_.begin(), edges_.end(),
                              std::make_pair(from, to));
  }

  bool has_all_self_loops() const {
    for (int v = 0; v < node_count_; ++v)
      if (!has_edge(v, v)) return false;
    return true;
  }

 private:
  int node_count_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<int>> in_;
};

namespace detail {

/// BFS distances from source, self-loops skipped. Unreachable: -1.
inline std::vector<int> bfs_distances(const DirectedGraph& g, int source,
                                      bool reverse = false) {
  std::vector<int> dist(g.node_count(), -1);
  std::deque<int> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    const auto& nbrs = reverse ? g.in_neighbors(u) : g.out_neighbors(u);
    for (int w : nbrs) {
      if (w == u) continue;
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace detail

inline bool is_strongly_connected(const DirectedGraph& g) {
  const auto fwd = detail::bfs_distances(g, 0, false);
  const auto bwd = detail::bfs_distances(g, 0, true);
  for (int v = 0; v < g.node_count(); ++v)
    if (fwd[v] < 0 || bwd[v] < 0) return false;
  return true;
}

/// Longest shortest directed path over ordered node pairs; self-loops do
/// not count as path edges. A single-node graph reports 1 (degenerate
/// value used by the contraction constants).
inline int diameter(const DirectedGraph& g) {
  if (!is_strongly_connected(g))
    throw NotStronglyConnected("diameter requires a strongly connected graph");
  if (g.node_count() == 1) return 1;
  int best = 0;
  for (int s = 0; s < g.node_count(); ++s) {
    const auto dist = detail::bfs_distances(g, s, false);
    for (int t = 0; t < g.node_count(); ++t)
      if (t != s) best = std::max(best, dist[t]);
  }
  return best;
}

/// Maximal edge-utility: choose one shortest path per ordered node pair
/// (lexicographically smallest node sequence breaks ties) and return the
/// largest number of chosen paths crossing any single non-self-loop edge.
/// Single-node graphs report 1, matching diameter's degenerate value.
inline int max_edge_utility(const DirectedGraph& g) {
  if (!is_strongly_connected(g))
    throw NotStronglyConnected(
        "max_edge_utility requires a strongly connected graph");
  const int n = g.node_count();
  if (n == 1) return 1;

  std::vector<std::vector<int>> use_count(n, std::vector<int>(n, 0));
  for (int t = 0; t < n; ++t) {
    const auto dist_to_t = detail::bfs_distances(g, t, true);
    for (int s = 0; s < n; ++s) {
      if (s == t) continue;
      // Walk from s to t, always taking the smallest next node that stays
      // on a shortest path. Out-neighbor lists are ascending, so the first
      // admissible neighbor is the lexicographic choice.
      int u = s;
      while (u != t) {
        int next = -1;
        for (int w : g.out_neighbors(u)) {
          if (w == u) continue;
          if (dist_to_t[w] == dist_to_t[u] - 1) {
            next = w;
            break;
          }
        }
        use_count[u][next] += 1;
        u = next;
      }
    }
  }
  int best = 0;
  for (int u = 0; u < n; ++u)
    for (int w = 0; w < n; ++w) best = std::max(best, use_count[u][w]);
  return best;
}

// --- stock topologies -------------------------------------------------

inline DirectedGraph directed_cycle(int n, bool self_loops = true) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < n; ++v) {
    if (n > 1) edges.emplace_back(v, (v + 1) % n);
    if (self_loops) edges.emplace_back(v, v);
  }
  if (n == 1 && !self_loops) edges.clear();
  return DirectedGraph(n, std::move(edges));
}

inline DirectedGraph complete_graph(int n, bool self_loops = true) {
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (u != v || self_loops) edges.emplace_back(u, v);
  return DirectedGraph(n, std::move(edges));
}

/// Directed cycle plus random extra edges plus self-loops; strongly
/// connected by construction for any draw.
inline DirectedGraph random_strongly_connected(int n, double extra_edge_prob,
                                               Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < n; ++v) {
    edges.emplace_back(v, v);
    if (n > 1) edges.emplace_back(v, (v + 1) % n);
  }
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (u == v || v == (u + 1) % n) continue;
      if (rng.uniform() < extra_edge_prob) edges.emplace_back(u, v);
    }
  return DirectedGraph(n, std::move(edges));
}

// --- edge-list text format: header "nodes N", then one "from to" per line

inline void write_edge_list(std::ostream& os, const DirectedGraph& g) {
  os << "nodes " << g.node_count() << "\n";
  for (const auto& [from, to] : g.edges()) os << from << " " << to << "\n";
}

inline std::string to_edge_list(const DirectedGraph& g) {
  std::ostringstream os;
  write_edge_list(os, g);
  return os.str();
}

inline DirectedGraph read_edge_list(std::istream& is) {
  std::string tag;
  int n = 0;
  if (!(is >> tag >> n) || tag != "nodes")
    throw InvalidSpec("edge list must start with 'nodes N'");
  std::vector<std::pair<int, int>> edges;
  int from = 0, to = 0;
  while (is >> from >> to) edges.emplace_back(from, to);
  return DirectedGraph(n, std::move(edges));
}

inline DirectedGraph parse_edge_list(const std::string& text) {
  std::istringstream is(text);
  return read_edge_list(is);
}

}  // namespace cluster_games
