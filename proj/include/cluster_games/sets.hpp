#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "cluster_games/errors.hpp"

namespace cluster_games {

struct ProjectionOptions {
  double dykstra_tol = 1e-10;  // cycle-to-cycle change, infinity norm
  int dykstra_max_cycles = 10000;
};

/// Immutable projectable convex set. Value type with cheap copies; the
/// structural data lives behind a shared pointer. Projections are exact
/// closed forms except for intersections, which run Dykstra's alternating
/// scheme with correction terms (plain alternation would land somewhere in
/// the intersection, not at the nearest point).
class ConvexSet {
 public:
  enum class Kind { Box, Halfspace, Affine, Intersection, FullSpace };

  /// {x : lower <= x <= upper}, entries may be +-infinity.
  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() != upper.size())
      throw DimensionMismatch("box: bound sizes differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower(i) <= upper(i))) throw InvalidSpec("box: lower > upper");
    BoxData d{std::move(lower), std::move(upper)};
    const int n = static_cast<int>(d.lower.size());
    return ConvexSet(std::make_shared<Node>(Node{std::move(d), n}));
  }

  /// {x : a^T x <= b}.
  static ConvexSet halfspace(Eigen::VectorXd a, double b) {
    if (a.size() == 0 || a.squaredNorm() == 0.0)
      throw InvalidSpec("halfspace: zero normal");
    HalfspaceData d{std::move(a), b, 0.0};
    d.inv_sqnorm = 1.0 / d.a.squaredNorm();
    const int n = static_cast<int>(d.a.size());
    return ConvexSet(std::make_shared<Node>(Node{std::move(d), n}));
  }

  /// {x : A x = b}, A full row rank (conditioning checked at construction).
  static ConvexSet affine(Eigen::MatrixXd A, Eigen::VectorXd b) {
    if (A.rows() != b.size())
      throw DimensionMismatch("affine: rhs size != row count");
    if (A.rows() == 0 || A.cols() == 0) throw InvalidSpec("affine: empty A");
    if (A.rows() > A.cols())
      throw InvalidSpec("affine: more rows than columns, not full row rank");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin <= 0.0 || sv(0) / smin > 1e10)
      throw InvalidSpec("affine: A is rank deficient or ill conditioned");
    AffineData d{std::move(A), std::move(b), {}};
    d.gram_llt.compute(d.A * d.A.transpose());
    const int n = static_cast<int>(d.A.cols());
    return ConvexSet(std::make_shared<Node>(Node{std::move(d), n}));
  }

  static ConvexSet intersection(std::vector<ConvexSet> members) {
    if (members.empty()) throw InvalidSpec("intersection: no members");
    const int n = members.front().dim();
    for (const auto& m : members)
      if (m.dim() != n)
        throw DimensionMismatch("intersection: member dimensions differ");
    IntersectionData d{std::move(members)};
    return ConvexSet(std::make_shared<Node>(Node{std::move(d), n}));
  }

  static ConvexSet full_space(int dim) {
    if (dim <= 0) throw InvalidSpec("full_space: dim must be positive");
    return ConvexSet(std::make_shared<Node>(Node{FullSpaceData{}, dim}));
  }

  Kind kind() const { return static_cast<Kind>(node_->data.index()); }
  int dim() const { return node_->dim; }

  const Eigen::VectorXd& lower() const { return box_data().lower; }
  const Eigen::VectorXd& upper() const { return box_data().upper; }
  const Eigen::VectorXd& normal() const { return half_data().a; }
  double offset() const { return half_data().b; }
  const Eigen::MatrixXd& equality_matrix() const { return affine_data().A; }
  const Eigen::VectorXd& equality_rhs() const { return affine_data().b; }
  const std::vector<ConvexSet>& members() const {
    return std::get<IntersectionData>(node_->data).members;
  }

  /// Euclidean projection of x onto the set.
  Eigen::VectorXd project(const Eigen::VectorXd& x,
                          const ProjectionOptions& opts = {}) const {
    check_dim(x);
    switch (kind()) {
      case Kind::Box: {
        const auto& d = box_data();
        return x.cwiseMax(d.lower).cwiseMin(d.upper);
      }
      case Kind::Halfspace: {
        const auto& d = half_data();
        const double viol = d.a.dot(x) - d.b;
        if (viol <= 0.0) return x;
        return x - viol * d.inv_sqnorm * d.a;
      }
      case Kind::Affine: {
        const auto& d = affine_data();
        return x - d.A.transpose() * d.gram_llt.solve(d.A * x - d.b);
      }
      case Kind::Intersection:
        return dykstra(x, opts);
      case Kind::FullSpace:
        return x;
    }
    throw Error("unreachable");
  }

  /// True iff all defining constraints hold within an absolute tolerance.
  bool contains(const Eigen::VectorXd& x, double tol) const {
    check_dim(x);
    switch (kind()) {
      case Kind::Box: {
        const auto& d = box_data();
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (x(i) < d.lower(i) - tol || x(i) > d.upper(i) + tol) return false;
        return true;
      }
      case Kind::Halfspace: {
        const auto& d = half_data();
        return d.a.dot(x) - d.b <= tol;
      }
      case Kind::Affine: {
        const auto& d = affine_data();
        return (d.A * x - d.b).lpNorm<Eigen::Infinity>() <= tol;
      }
      case Kind::Intersection: {
        for (const auto& m : members())
          if (!m.contains(x, tol)) return false;
        return true;
      }
      case Kind::FullSpace:
        return true;
    }
    throw Error("unreachable");
  }

 private:
  struct BoxData {
    Eigen::VectorXd lower, upper;
  };
  struct HalfspaceData {
    Eigen::VectorXd a;
    double b;
    double inv_sqnorm;
  };
  struct AffineData {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::LLT<Eigen::MatrixXd> gram_llt;  // factorization of A A^T
  };
  struct IntersectionData {
    std::vector<ConvexSet> members;
  };
  struct FullSpaceData {};

  // Variant order must match Kind.
  using Data = std::variant<BoxData, HalfspaceData, AffineData,
                            IntersectionData, FullSpaceData>;
  struct Node {
    Data data;
    int dim;
  };

  explicit ConvexSet(std::shared_ptr<const Node> node)
      : node_(std::move(node)) {}

  const BoxData& box_data() const { return std::get<BoxData>(node_->data); }
  const HalfspaceData& half_data() const {
    return std::get<HalfspaceData>(node_->data);
  }
  const AffineData& affine_data() const {
    return std::get<AffineData>(node_->data);
  }

  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != dim())
      throw DimensionMismatch("point dimension does not match set");
  }

  Eigen::VectorXd dykstra(const Eigen::VectorXd& x0,
                          const ProjectionOptions& opts) const {
    const auto& mem = members();
    const std::size_t r = mem.size();
    Eigen::VectorXd x = x0;
    std::vector<Eigen::VectorXd> correction(
        r, Eigen::VectorXd::Zero(x0.size()));
    for (int cycle = 0; cycle < opts.dykstra_max_cycles; ++cycle) {
      // Cycle-to-cycle change of the full iterate (point and correction
      // terms). The point alone can stall while corrections still move --
      // and diverges-in-corrections is exactly how an empty intersection
      // shows up.
      double change = 0.0;
      const Eigen::VectorXd x_prev = x;
      for (std::size_t i = 0; i < r; ++i) {
        const Eigen::VectorXd shifted = x + correction[i];
        x = mem[i].project(shifted, opts);
        const Eigen::VectorXd updated = shifted - x;
        change = std::max(
            change, (updated - correction[i]).lpNorm<Eigen::Infinity>());
        correction[i] = updated;
      }
      change = std::max(change, (x - x_prev).lpNorm<Eigen::Infinity>());
      if (change <= opts.dykstra_tol) return x;
    }
    throw NoConvergence(
        "Dykstra projection hit the cycle cap; intersection may be empty");
  }

  std::shared_ptr<const Node> node_;
};

}  // namespace cluster_games
