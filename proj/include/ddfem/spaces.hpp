#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <stdexcept>

#include "ddfem/fields.hpp"
#include "ddfem/mesh.hpp"
#include "ddfem/quadrature.hpp"

namespace ddfem {

using SpMat = Eigen::SparseMatrix<double>;

/// Local geometry of one triangle as needed for RT0/P1 element computations.
struct TriGeom {
  Vec2 p[3];        // vertices, ccw
  Vec2 grad[3];     // P1 hat gradients
  Vec2 mid[3];      // edge midpoints (edge k joins local vertices k, k+1)
  double area;

  /// RT0 shape function of local edge k evaluated at x (global DOF scaling).
  Vec2 rt0(int k, double sign, const Vec2& x) const {
    return sign / (2.0 * area) * (x - p[(k + 2) % 3]);
  }
};

inline TriGeom tri_geom(const Mesh& m, int t) {
  TriGeom g;
  const auto& v = m.tri(t);
  for (int k = 0; k < 3; ++k) g.p[k] = m.vertices[v[k]];
  g.area = m.area(t);
  for (int k = 0; k < 3; ++k) {
    const Vec2 opp = g.p[(k + 2) % 3] - g.p[(k + 1) % 3];
    g.grad[k] = Vec2(-opp.y(), opp.x()) / (2.0 * g.area);
    g.mid[k] = 0.5 * (g.p[k] + g.p[(k + 1) % 3]);
  }
  return g;
}

/// Value of an RT0 field at a point of triangle t.
inline Vec2 rt0_value(const Mesh& m, const Rt0Field& q, int t, const Vec2& x) {
  const TriGeom g = tri_geom(m, t);
  Vec2 val = Vec2::Zero();
  for (int k = 0; k < 3; ++k) {
    const auto& te = m.tri_edges[t][k];
    val += q.dof[te.edge] * g.rt0(k, te.sign, x);
  }
  return val;
}

/// Element mean of an RT0 field. RT0 restrictions are linear per element, so
/// the mean is the centroid value.
inline Vec2 rt0_element_mean(const Mesh& m, const Rt0Field& q, int t) {
  return rt0_value(m, q, t, m.centroid(t));
}

inline P0VectorField rt0_element_means(const Mesh& m, const Rt0Field& q) {
  P0VectorField out = P0VectorField::zero(m);
  for (int t = 0; t < m.num_triangles(); ++t) out.values.col(t) = rt0_element_mean(m, q, t);
  return out;
}

/// Piecewise-constant gradient of a P1 field.
inline P0VectorField p1_gradient(const Mesh& m, const P1Field& u) {
  P0VectorField out = P0VectorField::zero(m);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const TriGeom g = tri_geom(m, t);
    const auto& v = m.tri(t);
    Vec2 grad = Vec2::Zero();
    for (int k = 0; k < 3; ++k) grad += u.values[v[k]] * g.grad[k];
    out.values.col(t) = grad;
  }
  return out;
}

/// Nodal interpolation into P1 with homogeneous boundary values.
inline P1Field p1_interpolate(const Mesh& m, const std::function<double(const Vec2&)>& f) {
  P1Field u = P1Field::zero(m);
  for (int v = 0; v < m.num_vertices(); ++v)
    if (!m.boundary_vertex[v]) u.values[v] = f(m.vertices[v]);
  return u;
}

/// Edge-wise RT0 interpolation: DOF_e = int_e tau . n ds by Gauss quadrature
/// (degree 5). Commutes with the divergence in the sense that the element
/// integrals of div tau are reproduced exactly for smooth tau.
inline Rt0Field rt0_interpolate(const Mesh& m, const std::function<Vec2(const Vec2&)>& tau) {
  Rt0Field q = Rt0Field::zero(m);
  const GaussRule& gr = gauss3();
  for (int e = 0; e < m.num_edges(); ++e) {
    const Vec2 a = m.vertices[m.edges[e][0]];
    const Vec2 b = m.vertices[m.edges[e][1]];
    double flux = 0.0;
    for (std::size_t g = 0; g < gr.x.size(); ++g) {
      const Vec2 x = 0.5 * (a + b) + 0.5 * gr.x[g] * (b - a);
      flux += gr.w[g] * tau(x).dot(m.normal(e));
    }
    q.dof[e] = 0.5 * m.length(e) * flux;
  }
  return q;
}

/// Assembled discrete operators:
///   M  RT0 mass matrix (edges x edges), SPD,
///   B  divergence matrix (triangles x edges), B(t,e) = int_t div psi_e,
///   K  P1 stiffness over interior vertices, SPD.
struct SystemMatrices {
  SpMat M, B, K;
};

inline SystemMatrices assemble(const Mesh& m) {
  SystemMatrices sm;
  const int ne = m.num_edges(), nt = m.num_triangles(), ni = m.n_interior;

  std::vector<Eigen::Triplet<double>> tm, tb, tk;
  tm.reserve(9 * nt);
  tb.reserve(3 * nt);
  tk.reserve(9 * nt);

  const TriRule& rule = tri_rule_midpoint();
  for (int t = 0; t < nt; ++t) {
    const TriGeom g = tri_geom(m, t);
    const auto& te = m.tri_edges[t];
    const auto& v = m.tri(t);

    // RT0 mass: quadrature at the edge midpoints is exact for the quadratic
    // integrand psi_i . psi_j.
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (const auto& nd : rule.nodes) {
          const Vec2 x = nd.l1 * g.p[0] + nd.l2 * g.p[1] + nd.l3 * g.p[2];
          s += nd.w * g.rt0(i, te[i].sign, x).dot(g.rt0(j, te[j].sign, x));
        }
        tm.emplace_back(te[i].edge, te[j].edge, g.area * s);
      }
      // int_t div psi_i = +-1 with the global flux normalization.
      tb.emplace_back(t, te[i].edge, te[i].sign);
    }

    for (int i = 0; i < 3; ++i) {
      const int gi = m.interior_index[v[i]];
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = m.interior_index[v[j]];
        if (gj < 0) continue;
        tk.emplace_back(gi, gj, g.area * g.grad[i].dot(g.grad[j]));
      }
    }
  }

  sm.M.resize(ne, ne);
  sm.M.setFromTriplets(tm.begin(), tm.end());
  sm.B.resize(nt, ne);
  sm.B.setFromTriplets(tb.begin(), tb.end());
  sm.K.resize(ni, ni);
  sm.K.setFromTriplets(tk.begin(), tk.end());
  return sm;
}

/// Element means of both slots of a Z point, stacked as (r1,r2,w1,w2) per
/// column. This is the projection onto piecewise constants that precedes the
/// data projection.
inline Eigen::Matrix4Xd element_means(const Mesh& m, const ZPoint& z) {
  Eigen::Matrix4Xd out(4, m.num_triangles());
  out.topRows<2>() = z.r_p0;
  out.bottomRows<2>() = z.w;
  if (z.has_rt0()) {
    Rt0Field q{z.r_rt0};
    for (int t = 0; t < m.num_triangles(); ++t)
      out.col(t).head<2>() += rt0_element_mean(m, q, t);
  }
  return out;
}

/// Inner product of Z = L2 x L2 on the discrete representations. All
/// occurring products are at most quadratic per element, so the midpoint rule
/// integrates them exactly.
inline double z_inner(const Mesh& m, const ZPoint& a, const ZPoint& b) {
  double acc = 0.0;
  const bool art = a.has_rt0(), brt = b.has_rt0();
  Rt0Field qa{art ? a.r_rt0 : Eigen::VectorXd()};
  Rt0Field qb{brt ? b.r_rt0 : Eigen::VectorXd()};
  for (int t = 0; t < m.num_triangles(); ++t) {
    const TriGeom g = tri_geom(m, t);
    const auto& te = m.tri_edges[t];
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {  // midpoint rule, weight 1/3 each
      Vec2 va = a.r_p0.col(t);
      Vec2 vb = b.r_p0.col(t);
      if (art)
        for (int i = 0; i < 3; ++i) va += qa.dof[te[i].edge] * g.rt0(i, te[i].sign, g.mid[k]);
      if (brt)
        for (int i = 0; i < 3; ++i) vb += qb.dof[te[i].edge] * g.rt0(i, te[i].sign, g.mid[k]);
      s += va.dot(vb) / 3.0;
    }
    s += a.w.col(t).dot(b.w.col(t));
    acc += g.area * s;
  }
  return acc;
}

inline double z_norm_sq(const Mesh& m, const ZPoint& a) { return z_inner(m, a, a); }
inline double z_norm(const Mesh& m, const ZPoint& a) { return std::sqrt(std::max(0.0, z_norm_sq(m, a))); }
inline double z_dist(const Mesh& m, const ZPoint& a, const ZPoint& b) { return z_norm(m, a - b); }

/// Flat coefficient layout of a Z point: [r_p0 (2T); r_rt0 (E); w (2T)].
inline int z_flat_size(const Mesh& m) { return 4 * m.num_triangles() + m.num_edges(); }

inline Eigen::VectorXd z_flatten(const Mesh& m, const ZPoint& z) {
  const int nt = m.num_triangles(), ne = m.num_edges();
  Eigen::VectorXd x(z_flat_size(m));
  x.head(2 * nt) = Eigen::Map<const Eigen::VectorXd>(z.r_p0.data(), 2 * nt);
  x.segment(2 * nt, ne) = z.has_rt0() ? z.r_rt0 : Eigen::VectorXd::Zero(ne);
  x.tail(2 * nt) = Eigen::Map<const Eigen::VectorXd>(z.w.data(), 2 * nt);
  return x;
}

inline ZPoint z_unflatten(const Mesh& m, const Eigen::VectorXd& x) {
  const int nt = m.num_triangles(), ne = m.num_edges();
  ZPoint z = ZPoint::zero(m);
  z.r_p0 = Eigen::Map<const Eigen::Matrix2Xd>(x.head(2 * nt).data(), 2, nt);
  z.r_rt0 = x.segment(2 * nt, ne);
  z.w = Eigen::Map<const Eigen::Matrix2Xd>(x.tail(2 * nt).data(), 2, nt);
  return z;
}

/// Gram matrix of the flat layout: x^T G y equals z_inner of the represented
/// fields. Lets the assignment-enumeration and reduced-model code phrase
/// Z geometry as ordinary sparse linear algebra.
inline SpMat z_gram(const Mesh& m) {
  const int nt = m.num_triangles(), ne = m.num_edges();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(19 * nt);
  const TriRule& rule = tri_rule_midpoint();
  for (int t = 0; t < nt; ++t) {
    const TriGeom g = tri_geom(m, t);
    const auto& te = m.tri_edges[t];
    for (int c = 0; c < 2; ++c)
      trips.emplace_back(2 * t + c, 2 * t + c, g.area);  // r_p0 . r_p0
    for (int c = 0; c < 2; ++c)
      trips.emplace_back(2 * nt + ne + 2 * t + c, 2 * nt + ne + 2 * t + c, g.area);  // w . w
    for (int k = 0; k < 3; ++k) {
      // int_T psi_e = sign (centroid - p_opp) / 2 couples r_p0 with r_rt0.
      const Vec2 ip = te[k].sign * 0.5 * (m.centroid(t) - g.p[(k + 2) % 3]);
      for (int c = 0; c < 2; ++c) {
        trips.emplace_back(2 * t + c, 2 * nt + te[k].edge, ip[c]);
        trips.emplace_back(2 * nt + te[k].edge, 2 * t + c, ip[c]);
      }
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (const auto& nd : rule.nodes) {
          const Vec2 x = nd.l1 * g.p[0] + nd.l2 * g.p[1] + nd.l3 * g.p[2];
          s += nd.w * g.rt0(k, te[k].sign, x).dot(g.rt0(j, te[j].sign, x));
        }
        trips.emplace_back(2 * nt + te[k].edge, 2 * nt + te[j].edge, g.area * s);
      }
    }
  }
  SpMat G(z_flat_size(m), z_flat_size(m));
  G.setFromTriplets(trips.begin(), trips.end());
  return G;
}

}  // namespace ddfem
