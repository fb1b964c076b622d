#pragma once

// Closed convex sets, Euclidean projections and tangent-cone projections.
//
// The tangent-cone projection Pi_S(x, v) is the velocity a projected
// dynamical system actually follows at x: for interior x it is v itself, on
// the boundary the outward-pointing part of v is removed. Together with the
// normal-cone component v - Pi_S(x, v) it forms an orthogonal (Moreau)
// decomposition of v.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace dgne {

struct FullSpace {
  std::size_t dim = 0;
};

/// Componentwise bounds; entries may be +-infinity.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct NonnegativeOrthant {
  std::size_t dim = 0;
};

struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

/// {y : normal' y <= offset}
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

class ConvexSet;

struct Product {
  std::vector<ConvexSet> factors;
};

class ConvexSet {
 public:
  using Kind = std::variant<FullSpace, Box, NonnegativeOrthant, Ball, Halfspace, Product>;

  static ConvexSet full_space(std::size_t dim);
  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ConvexSet orthant(std::size_t dim);
  static ConvexSet ball(Eigen::VectorXd center, double radius);
  static ConvexSet halfspace(Eigen::VectorXd normal, double offset);
  static ConvexSet product(std::vector<ConvexSet> factors);

  std::size_t dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }
  std::string name() const;

  bool is_full_space() const;

  /// Euclidean distance from y to the set.
  double distance(const Eigen::VectorXd& y) const;
  /// dist(y, S) <= tol.
  bool contains(const Eigen::VectorXd& y, double tol = 0.0) const;

 private:
  explicit ConvexSet(Kind kind);

  Kind kind_;
  std::size_t dim_ = 0;
};

/// Nearest point of `set` to y.
Eigen::VectorXd project_euclidean(const ConvexSet& set, const Eigen::VectorXd& y);

/// Same as project_euclidean but overwrites `y`; allocation-free for every
/// set kind, which matters in the integrator's inner loop.
void project_in_place(const ConvexSet& set, Eigen::Ref<Eigen::VectorXd> y);

/// Pi_S(x, v): projection of v onto the tangent cone of `set` at x.
/// x must belong to the set up to membership_tolerance(x).
Eigen::VectorXd project_tangent_cone(const ConvexSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v);

/// v - Pi_S(x, v), the projection of v onto the normal cone at x.
Eigen::VectorXd normal_cone_component(const ConvexSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v);

/// 1e-9 * (1 + |x|)
double membership_tolerance(const Eigen::VectorXd& x);

// Tagged-record serialization: {"kind": "box", "lower": [...], "upper": [...]}.
// Infinite bounds are written as the strings "inf" / "-inf".
nlohmann::json to_json(const ConvexSet& set);
ConvexSet convex_set_from_json(const nlohmann::json& j);

}  // namespace dgne
