#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace ddfem {

/// Quadrature nodes in barycentric coordinates with weights summing to 1;
/// integrate as |T| * sum w_i f(x_i).
struct TriRule {
  struct Node {
    double l1, l2, l3, w;
  };
  std::vector<Node> nodes;
};

/// Edge-midpoint rule, exact for polynomials of degree 2. This is the rule
/// behind every mass/objective integral: all products of RT0 and piecewise
/// constant fields are at most quadratic per element.
inline const TriRule& tri_rule_midpoint() {
  static const TriRule r{{{0.5, 0.5, 0.0, 1.0 / 3.0},
                          {0.0, 0.5, 0.5, 1.0 / 3.0},
                          {0.5, 0.0, 0.5, 1.0 / 3.0}}};
  return r;
}

/// Six-point symmetric rule, exact for degree 4. Used where transcendental
/// integrands appear (element means of the source term, error integrals).
inline const TriRule& tri_rule_degree4() {
  constexpr double a1 = 0.445948490915965;
  constexpr double w1 = 0.223381589678011;
  constexpr double a2 = 0.091576213509771;
  constexpr double w2 = 0.109951743655322;
  static const TriRule r{{{1 - 2 * a1, a1, a1, w1},
                          {a1, 1 - 2 * a1, a1, w1},
                          {a1, a1, 1 - 2 * a1, w1},
                          {1 - 2 * a2, a2, a2, w2},
                          {a2, 1 - 2 * a2, a2, w2},
                          {a2, a2, 1 - 2 * a2, w2}}};
  return r;
}

/// Gauss-Legendre nodes/weights on [-1,1].
struct GaussRule {
  std::vector<double> x, w;
};

/// 3-point Gauss rule, exact for degree 5; used for RT0 edge interpolation.
inline const GaussRule& gauss3() {
  const double s = std::sqrt(3.0 / 5.0);
  static const GaussRule r{{-s, 0.0, s}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
  return r;
}

template <typename F>
double integrate_tri(const TriRule& rule, const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                     const Eigen::Vector2d& p3, double area, F&& f) {
  double s = 0.0;
  for (const auto& nd : rule.nodes) {
    const Eigen::Vector2d x = nd.l1 * p1 + nd.l2 * p2 + nd.l3 * p3;
    s += nd.w * f(x);
  }
  return area * s;
}

}  // namespace ddfem
