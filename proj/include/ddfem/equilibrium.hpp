#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>
#include <stdexcept>

#include "ddfem/fields.hpp"
#include "ddfem/spaces.hpp"

namespace ddfem {

/// A member of the discrete equilibrium set: RT0 flux q with -div_h q = f,
/// P1 potential u, the P0 multiplier lambda of the flux subproblem, and the
/// piecewise-constant gradient of u.
struct EquilibriumState {
  Rt0Field q;
  P1Field u;
  P0Field lambda;
  P0VectorField grad_u;

  ZPoint as_zpoint(const Mesh& m) const {
    ZPoint z = ZPoint::zero(m);
    z.r_rt0 = q.dof;
    z.w = grad_u.values;
    return z;
  }
};

/// Feasibility defect of the divergence constraint: max over elements of
/// |(div q)|_T + mean_T f| * |T|.
inline double divergence_residual(const Mesh& m, const Rt0Field& q, const P0Field& f_means) {
  double worst = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    double div_int = 0.0;  // int_T div q = sum of signed edge DOFs
    for (const auto& te : m.tri_edges[t]) div_int += te.sign * q.dof[te.edge];
    worst = std::max(worst, std::abs(div_int + f_means.values[t] * m.area(t)));
  }
  return worst;
}

/// Orthogonal projection onto the discrete equilibrium set. The projection of
/// y = (r, w) splits into two independent solves sharing nothing but the mesh:
/// a fixed symmetric-indefinite saddle system in (q, lambda) driven by r, and
/// a Poisson solve in u driven by w. Both matrices are factorized once at
/// construction; per-projection work is right-hand-side assembly plus
/// back-substitution.
class EquilibriumProjector {
 public:
  EquilibriumProjector(const Mesh& mesh, std::function<double(const Vec2&)> source)
      : mesh_(&mesh), mats_(assemble(mesh)) {
    const int ne = mesh.num_edges(), nt = mesh.num_triangles();

    // Element integrals of f, degree-4 rule; the only way f enters.
    f_integrals_.resize(nt);
    for (int t = 0; t < nt; ++t) {
      const TriGeom g = tri_geom(mesh, t);
      f_integrals_[t] =
          integrate_tri(tri_rule_degree4(), g.p[0], g.p[1], g.p[2], g.area, source);
    }
    f_means_.values = f_integrals_.array() / Eigen::Map<const Eigen::ArrayXd>(
                                                 mesh.tri_area.data(), nt);

    // Saddle matrix [[M, B^T], [B, 0]], independent of the projected point.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mats_.M.nonZeros() + 2 * mats_.B.nonZeros());
    for (int k = 0; k < mats_.M.outerSize(); ++k)
      for (SpMat::InnerIterator it(mats_.M, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < mats_.B.outerSize(); ++k)
      for (SpMat::InnerIterator it(mats_.B, k); it; ++it) {
        trips.emplace_back(ne + it.row(), it.col(), it.value());
        trips.emplace_back(it.col(), ne + it.row(), it.value());
      }
    kkt_.resize(ne + nt, ne + nt);
    kkt_.setFromTriplets(trips.begin(), trips.end());
    kkt_lu_.compute(kkt_);
    if (kkt_lu_.info() != Eigen::Success)
      throw std::runtime_error("EquilibriumProjector: saddle factorization failed");

    if (mesh.n_interior > 0) {
      k_llt_.compute(mats_.K);
      if (k_llt_.info() != Eigen::Success)
        throw std::runtime_error("EquilibriumProjector: stiffness factorization failed");
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  const SystemMatrices& matrices() const { return mats_; }
  const P0Field& source_means() const { return f_means_; }
  const Eigen::VectorXd& source_integrals() const { return f_integrals_; }

  EquilibriumState project(const ZPoint& y) const {
    const Mesh& m = *mesh_;
    const int ne = m.num_edges(), nt = m.num_triangles();

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ne + nt);
    if (y.has_rt0()) rhs.head(ne) = mats_.M * y.r_rt0;
    Eigen::VectorXd rhs_u = Eigen::VectorXd::Zero(std::max(1, m.n_interior));
    for (int t = 0; t < nt; ++t) {
      const TriGeom g = tri_geom(m, t);
      const auto& te = m.tri_edges[t];
      const auto& v = m.tri(t);
      const Vec2 r = y.r_p0.col(t);
      const Vec2 w = y.w.col(t);
      if (r != Vec2::Zero())
        for (int k = 0; k < 3; ++k)
          rhs[te[k].edge] += te[k].sign * 0.5 * r.dot(m.centroid(t) - g.p[(k + 2) % 3]);
      for (int k = 0; k < 3; ++k) {
        const int gi = m.interior_index[v[k]];
        if (gi >= 0) rhs_u[gi] += g.area * w.dot(g.grad[k]);
      }
    }
    rhs.tail(nt) = -f_integrals_;

    Eigen::VectorXd sol = kkt_lu_.solve(rhs);
    // One step of iterative refinement keeps the algebraic residual at the
    // 1e-10 relative contract even on fine meshes.
    Eigen::VectorXd res = rhs - kkt_ * sol;
    if (res.norm() > 1e-13 * (1.0 + rhs.norm())) sol += kkt_lu_.solve(res);

    EquilibriumState st;
    st.q.dof = sol.head(ne);
    st.lambda.values = sol.tail(nt);
    st.u = P1Field::zero(m);
    if (m.n_interior > 0) {
      Eigen::VectorXd ui = k_llt_.solve(rhs_u);
      Eigen::VectorXd ru = rhs_u - mats_.K * ui;
      if (ru.norm() > 1e-13 * (1.0 + rhs_u.norm())) ui += k_llt_.solve(ru);
      for (int v = 0; v < m.num_vertices(); ++v)
        if (m.interior_index[v] >= 0) st.u.values[v] = ui[m.interior_index[v]];
    }
    st.grad_u = p1_gradient(m, st.u);
    return st;
  }

  EquilibriumState project(const PhaseField& y) const { return project(ZPoint::from_phase(y)); }

  double divergence_defect(const EquilibriumState& st) const {
    return divergence_residual(*mesh_, st.q, f_means_);
  }

 private:
  const Mesh* mesh_;
  SystemMatrices mats_;
  SpMat kkt_;
  Eigen::SparseLU<SpMat> kkt_lu_;
  Eigen::SimplicialLLT<SpMat> k_llt_;
  Eigen::VectorXd f_integrals_;
  P0Field f_means_;
};

}  // namespace ddfem
