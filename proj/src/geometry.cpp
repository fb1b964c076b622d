#include "dgne/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dgne/error.hpp"

namespace dgne {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double active_tol(double bound) { return 1e-12 * (1.0 + std::abs(bound)); }

std::size_t kind_dim(const ConvexSet::Kind& kind) {
  return std::visit(Overloaded{
                        [](const FullSpace& s) { return s.dim; },
                        [](const Box& s) { return static_cast<std::size_t>(s.lower.size()); },
                        [](const NonnegativeOrthant& s) { return s.dim; },
                        [](const Ball& s) { return static_cast<std::size_t>(s.center.size()); },
                        [](const Halfspace& s) { return static_cast<std::size_t>(s.normal.size()); },
                        [](const Product& s) {
                          std::size_t total = 0;
                          for (const auto& f : s.factors) total += f.dim();
                          return total;
                        },
                    },
                    kind);
}

// Tangent-cone projection written into `out` (which holds v on entry).
void tangent_in_place(const ConvexSet& set, const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::Ref<Eigen::VectorXd> out) {
  std::visit(Overloaded{
                 [](const FullSpace&) {},
                 [&](const Box& s) {
                   for (Eigen::Index j = 0; j < out.size(); ++j) {
                     if (std::isfinite(s.lower[j]) && x[j] - s.lower[j] <= active_tol(s.lower[j]) && out[j] < 0.0) {
                       out[j] = 0.0;
                     }
                     if (std::isfinite(s.upper[j]) && s.upper[j] - x[j] <= active_tol(s.upper[j]) && out[j] > 0.0) {
                       out[j] = 0.0;
                     }
                   }
                 },
                 [&](const NonnegativeOrthant&) {
                   for (Eigen::Index j = 0; j < out.size(); ++j) {
                     if (x[j] <= active_tol(0.0) && out[j] < 0.0) out[j] = 0.0;
                   }
                 },
                 [&](const Ball& s) {
                   const Eigen::VectorXd radial = x - s.center;
                   const double r = radial.norm();
                   if (s.radius - r <= 1e-12 * (1.0 + s.radius) && r > 0.0) {
                     const double outward = radial.dot(out);
                     if (outward > 0.0) out -= (outward / (r * r)) * radial;
                   }
                 },
                 [&](const Halfspace& s) {
                   const double slack = s.offset - s.normal.dot(x);
                   if (slack <= 1e-12 * (1.0 + std::abs(s.offset))) {
                     const double outward = s.normal.dot(out);
                     if (outward > 0.0) out -= (outward / s.normal.squaredNorm()) * s.normal;
                   }
                 },
                 [&](const Product& s) {
                   Eigen::Index offset = 0;
                   for (const auto& f : s.factors) {
                     const auto d = static_cast<Eigen::Index>(f.dim());
                     tangent_in_place(f, x.segment(offset, d), out.segment(offset, d));
                     offset += d;
                   }
                 },
             },
             set.kind());
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::Config, "bad numeric literal '" + s + "'");
  }
  return j.get<double>();
}

nlohmann::json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? nlohmann::json("inf") : nlohmann::json("-inf");
  return v;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Config, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from_json(j[i]);
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  auto arr = nlohmann::json::array();
  for (double x : v) arr.push_back(number_to_json(x));
  return arr;
}

}  // namespace

ConvexSet::ConvexSet(Kind kind) : kind_(std::move(kind)), dim_(kind_dim(kind_)) {}

ConvexSet ConvexSet::full_space(std::size_t dim) { return ConvexSet(FullSpace{dim}); }

ConvexSet ConvexSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  require_dim(static_cast<std::size_t>(upper.size()), static_cast<std::size_t>(lower.size()), "box bounds");
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j]) {
      throw Error(ErrorKind::InvalidArgument, "box requires lower <= upper (coordinate " + std::to_string(j) + ")");
    }
  }
  return ConvexSet(Box{std::move(lower), std::move(upper)});
}

ConvexSet ConvexSet::orthant(std::size_t dim) { return ConvexSet(NonnegativeOrthant{dim}); }

ConvexSet ConvexSet::ball(Eigen::VectorXd center, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "ball radius must be positive");
  return ConvexSet(Ball{std::move(center), radius});
}

ConvexSet ConvexSet::halfspace(Eigen::VectorXd normal, double offset) {
  if (!(normal.squaredNorm() > 0.0)) throw Error(ErrorKind::InvalidArgument, "halfspace normal must be nonzero");
  return ConvexSet(Halfspace{std::move(normal), offset});
}

ConvexSet ConvexSet::product(std::vector<ConvexSet> factors) { return ConvexSet(Product{std::move(factors)}); }

std::string ConvexSet::name() const {
  return std::visit(Overloaded{
                        [](const FullSpace& s) { return "full_space(" + std::to_string(s.dim) + ")"; },
                        [](const Box& s) { return "box(" + std::to_string(s.lower.size()) + ")"; },
                        [](const NonnegativeOrthant& s) { return "orthant(" + std::to_string(s.dim) + ")"; },
                        [](const Ball& s) { return "ball(" + std::to_string(s.center.size()) + ")"; },
                        [](const Halfspace& s) { return "halfspace(" + std::to_string(s.normal.size()) + ")"; },
                        [](const Product& s) { return "product[" + std::to_string(s.factors.size()) + "]"; },
                    },
                    kind_);
}

bool ConvexSet::is_full_space() const {
  if (std::holds_alternative<FullSpace>(kind_)) return true;
  if (const auto* b = std::get_if<Box>(&kind_)) {
    return b->lower.array().isInf().all() && b->upper.array().isInf().all();
  }
  if (const auto* p = std::get_if<Product>(&kind_)) {
    return std::all_of(p->factors.begin(), p->factors.end(), [](const ConvexSet& f) { return f.is_full_space(); });
  }
  return false;
}

double ConvexSet::distance(const Eigen::VectorXd& y) const {
  require_dim(static_cast<std::size_t>(y.size()), dim_, "distance");
  return (project_euclidean(*this, y) - y).norm();
}

bool ConvexSet::contains(const Eigen::VectorXd& y, double tol) const { return distance(y) <= tol; }

void project_in_place(const ConvexSet& set, Eigen::Ref<Eigen::VectorXd> y) {
  require_dim(static_cast<std::size_t>(y.size()), set.dim(), "projection");
  std::visit(Overloaded{
                 [](const FullSpace&) {},
                 [&](const Box& s) { y = y.cwiseMax(s.lower).cwiseMin(s.upper); },
                 [&](const NonnegativeOrthant&) { y = y.cwiseMax(0.0); },
                 [&](const Ball& s) {
                   const double r = (y - s.center).norm();
                   if (r > s.radius) y = s.center + (s.radius / r) * (y - s.center);
                 },
                 [&](const Halfspace& s) {
                   const double excess = s.normal.dot(y) - s.offset;
                   if (excess > 0.0) y -= (excess / s.normal.squaredNorm()) * s.normal;
                 },
                 [&](const Product& s) {
                   Eigen::Index offset = 0;
                   for (const auto& f : s.factors) {
                     const auto d = static_cast<Eigen::Index>(f.dim());
                     project_in_place(f, y.segment(offset, d));
                     offset += d;
                   }
                 },
             },
             set.kind());
}

Eigen::VectorXd project_euclidean(const ConvexSet& set, const Eigen::VectorXd& y) {
  Eigen::VectorXd out = y;
  project_in_place(set, out);
  return out;
}

double membership_tolerance(const Eigen::VectorXd& x) { return 1e-9 * (1.0 + x.norm()); }

Eigen::VectorXd project_tangent_cone(const ConvexSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  require_dim(static_cast<std::size_t>(x.size()), set.dim(), "tangent-cone point");
  require_dim(static_cast<std::size_t>(v.size()), set.dim(), "tangent-cone direction");
  const double dist = set.distance(x);
  if (dist > membership_tolerance(x)) {
    throw Error(ErrorKind::NotInSet, "point lies outside " + set.name(), dist);
  }
  Eigen::VectorXd out = v;
  tangent_in_place(set, x, out);
  return out;
}

Eigen::VectorXd normal_cone_component(const ConvexSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  return v - project_tangent_cone(set, x, v);
}

nlohmann::json to_json(const ConvexSet& set) {
  return std::visit(Overloaded{
                        [](const FullSpace& s) { return nlohmann::json{{"kind", "full_space"}, {"dim", s.dim}}; },
                        [](const Box& s) {
                          return nlohmann::json{
                              {"kind", "box"}, {"lower", vector_to_json(s.lower)}, {"upper", vector_to_json(s.upper)}};
                        },
                        [](const NonnegativeOrthant& s) { return nlohmann::json{{"kind", "orthant"}, {"dim", s.dim}}; },
                        [](const Ball& s) {
                          return nlohmann::json{
                              {"kind", "ball"}, {"center", vector_to_json(s.center)}, {"radius", s.radius}};
                        },
                        [](const Halfspace& s) {
                          return nlohmann::json{
                              {"kind", "halfspace"}, {"normal", vector_to_json(s.normal)}, {"offset", s.offset}};
                        },
                        [](const Product& s) {
                          auto factors = nlohmann::json::array();
                          for (const auto& f : s.factors) factors.push_back(to_json(f));
                          return nlohmann::json{{"kind", "product"}, {"factors", factors}};
                        },
                    },
                    set.kind());
}

ConvexSet convex_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorKind::Config, "set record needs a 'kind' field");
  const auto kind = j.at("kind").get<std::string>();
  try {
    if (kind == "full_space") return ConvexSet::full_space(j.at("dim").get<std::size_t>());
    if (kind == "box") return ConvexSet::box(vector_from_json(j.at("lower")), vector_from_json(j.at("upper")));
    if (kind == "orthant") return ConvexSet::orthant(j.at("dim").get<std::size_t>());
    if (kind == "ball") return ConvexSet::ball(vector_from_json(j.at("center")), j.at("radius").get<double>());
    if (kind == "halfspace") return ConvexSet::halfspace(vector_from_json(j.at("normal")), j.at("offset").get<double>());
    if (kind == "product") {
      std::vector<ConvexSet> factors;
      for (const auto& f : j.at("factors")) factors.push_back(convex_set_from_json(f));
      return ConvexSet::product(std::move(factors));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed set record: ") + e.what());
  }
  throw Error(ErrorKind::Config, "unknown set kind '" + kind + "'");
}

}  // namespace dgne
