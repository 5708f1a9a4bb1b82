#pragma once

// Test-side oracles, deliberately independent of the library's quadrature and
// search code paths.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "ddfem/fields.hpp"
#include "ddfem/mesh.hpp"
#include "ddfem/rng.hpp"

namespace oracle {

using ddfem::Vec2;

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) {
        p0 = 1.0;
        p1 = t;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dpf = n * (t * p1 - p0) / (t * t - 1.0);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dpf * dpf);
        break;
      }
    }
  }
}

/// Integrate f over the triangle (a,b,c) with a tensor Gauss rule mapped by
/// the Duffy transform; exact well beyond anything the library integrates.
inline double integrate_triangle(const Vec2& a, const Vec2& b, const Vec2& c,
                                 const std::function<double(const Vec2&)>& f, int n = 10) {
  std::vector<double> gx, gw;
  gauss_legendre(n, gx, gw);
  const double jac = std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (gx[i] + 1.0);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (gx[j] + 1.0) * (1.0 - u);
      acc += gw[i] * gw[j] * (1.0 - u) * f(a + u * (b - a) + v * (c - a));
    }
  }
  return acc * jac * 0.25;
}

/// Integrated normal flux of an analytic field across a segment, 12-point
/// Gauss (independent of the library's 3-point rule).
inline double edge_flux(const Vec2& a, const Vec2& b, const Vec2& normal,
                        const std::function<Vec2(const Vec2&)>& tau) {
  std::vector<double> gx, gw;
  gauss_legendre(12, gx, gw);
  double acc = 0.0;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const Vec2 x = 0.5 * (a + b) + 0.5 * gx[i] * (b - a);
    acc += gw[i] * tau(x).dot(normal);
  }
  return 0.5 * (b - a).norm() * acc;
}

/// Linear-scan nearest neighbor with the lowest-index tie rule.
inline int linear_nearest(const std::vector<Eigen::Vector4d>& pts, const Eigen::Vector4d& q) {
  int best = 0;
  double bd = (pts[0] - q).squaredNorm();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

inline std::vector<int> linear_nearest_k(const std::vector<Eigen::Vector4d>& pts,
                                         const Eigen::Vector4d& q, int k) {
  std::vector<std::pair<double, int>> all;
  all.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    all.emplace_back((pts[i] - q).squaredNorm(), static_cast<int>(i));
  std::sort(all.begin(), all.end());
  std::vector<int> out;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i) out.push_back(all[i].second);
  return out;
}

inline ddfem::PhaseField random_phase_field(const ddfem::Mesh& m, std::uint64_t seed,
                                            double box = 4.0) {
  ddfem::SplitMix64 rng(seed);
  ddfem::PhaseField y = ddfem::PhaseField::zero(m);
  for (int t = 0; t < m.num_triangles(); ++t) {
    for (int c = 0; c < 2; ++c) y.r.values(c, t) = rng.next_in(-box, box);
    for (int c = 0; c < 2; ++c) y.w.values(c, t) = rng.next_in(-box, box);
  }
  return y;
}

}  // namespace oracle
