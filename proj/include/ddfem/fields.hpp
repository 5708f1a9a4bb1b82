#pragma once

#include <Eigen/Dense>

#include "ddfem/mesh.hpp"

namespace ddfem {

/// Lowest-order Raviart-Thomas field. One degree of freedom per edge, equal to
/// the integrated normal flux across that edge (w.r.t. the global edge
/// normal). Sharing the DOF across the two incident triangles makes the field
/// H(div)-conforming by construction.
struct Rt0Field {
  Eigen::VectorXd dof;  // size = edge count

  static Rt0Field zero(const Mesh& m) { return {Eigen::VectorXd::Zero(m.num_edges())}; }
};

/// Continuous piecewise-linear field with homogeneous Dirichlet values; stores
/// one value per vertex, boundary entries identically zero.
struct P1Field {
  Eigen::VectorXd values;  // size = vertex count

  static P1Field zero(const Mesh& m) { return {Eigen::VectorXd::Zero(m.num_vertices())}; }
};

/// Piecewise-constant scalar field, one value per triangle.
struct P0Field {
  Eigen::VectorXd values;

  static P0Field zero(const Mesh& m) { return {Eigen::VectorXd::Zero(m.num_triangles())}; }
};

/// Piecewise-constant 2-vector field, one column per triangle.
struct P0VectorField {
  Eigen::Matrix2Xd values;

  static P0VectorField zero(const Mesh& m) {
    return {Eigen::Matrix2Xd::Zero(2, m.num_triangles())};
  }
  static P0VectorField constant(const Mesh& m, const Vec2& c) {
    P0VectorField f{Eigen::Matrix2Xd(2, m.num_triangles())};
    f.values.colwise() = c;
    return f;
  }
};

/// A phase-space point per element: the flux-like component r and the
/// gradient-like component w, both piecewise constant. Candidate members of
/// the material data set live here.
struct PhaseField {
  P0VectorField r, w;

  static PhaseField zero(const Mesh& m) { return {P0VectorField::zero(m), P0VectorField::zero(m)}; }
};

/// A general point of the ambient product space Z = L2 x L2 as it occurs in
/// the iterations: the flux slot is the sum of a piecewise-constant part and
/// an RT0 part, the gradient slot stays piecewise constant (gradients of P1
/// functions are piecewise constant, so every iterate has this form).
struct ZPoint {
  Eigen::Matrix2Xd r_p0;  // 2 x T
  Eigen::VectorXd r_rt0;  // E
  Eigen::Matrix2Xd w;     // 2 x T

  static ZPoint zero(const Mesh& m) {
    return {Eigen::Matrix2Xd::Zero(2, m.num_triangles()),
            Eigen::VectorXd::Zero(m.num_edges()),
            Eigen::Matrix2Xd::Zero(2, m.num_triangles())};
  }
  static ZPoint from_phase(const PhaseField& y) {
    return {y.r.values, Eigen::VectorXd::Zero(0), y.w.values};
  }

  bool has_rt0() const { return r_rt0.size() > 0; }

  ZPoint& operator+=(const ZPoint& o) {
    r_p0 += o.r_p0;
    w += o.w;
    if (o.has_rt0()) {
      if (has_rt0())
        r_rt0 += o.r_rt0;
      else
        r_rt0 = o.r_rt0;
    }
    return *this;
  }
  ZPoint& operator-=(const ZPoint& o) {
    r_p0 -= o.r_p0;
    w -= o.w;
    if (o.has_rt0()) {
      if (has_rt0())
        r_rt0 -= o.r_rt0;
      else
        r_rt0 = -o.r_rt0;
    }
    return *this;
  }
  ZPoint& operator*=(double a) {
    r_p0 *= a;
    w *= a;
    if (has_rt0()) r_rt0 *= a;
    return *this;
  }

  friend ZPoint operator+(ZPoint a, const ZPoint& b) { return a += b; }
  friend ZPoint operator-(ZPoint a, const ZPoint& b) { return a -= b; }
  friend ZPoint operator*(double s, ZPoint a) { return a *= s; }
};

/// Per-element data assignment: index into the local data set for each
/// triangle. The integer view of a data-set member, used for fixed-point and
/// cycle detection so that round-off cannot blur comparisons.
struct Assignment {
  std::vector<int> idx;

  bool operator==(const Assignment& o) const { return idx == o.idx; }
};

}  // namespace ddfem
