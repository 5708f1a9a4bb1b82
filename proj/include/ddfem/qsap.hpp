#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ddfem/equilibrium.hpp"
#include "ddfem/material.hpp"
#include "ddfem/solvers.hpp"

namespace ddfem {

/// The assignment view of the distance-minimization problem: one data point
/// per element, objective F evaluated through the equilibrium projection.
class QsapInstance {
 public:
  QsapInstance(const EquilibriumProjector& proj, const LocalDataSet& data)
      : proj_(&proj), data_(&data) {}

  const EquilibriumProjector& projector() const { return *proj_; }
  const LocalDataSet& data() const { return *data_; }
  const Mesh& mesh() const { return proj_->mesh(); }
  int elements() const { return mesh().num_triangles(); }
  int points() const { return data_->size(); }

  void validate(const Assignment& a) const {
    if (static_cast<int>(a.idx.size()) != elements())
      throw std::out_of_range("Assignment: wrong number of elements");
    for (int j : a.idx)
      if (j < 0 || j >= points()) throw std::out_of_range("Assignment: data index out of range");
  }

 private:
  const EquilibriumProjector* proj_;
  const LocalDataSet* data_;
};

/// Exact objective of an assignment, evaluated through the full projector.
inline double qsap_objective(const QsapInstance& inst, const Assignment& a) {
  inst.validate(a);
  return objective(inst.projector(), phase_from_assignment(inst.mesh(), inst.data(), a));
}

namespace detail {

/// Per-(element, point) columns of the linear part of y -> pi_E(y) - y, flat
/// layout, plus everything needed to evaluate F(a) = 1/2 |z0 + sum cols|^2
/// with cheap dot products.
struct QsapColumns {
  Eigen::VectorXd z0;                 // flat pi_E(0)
  double z0_norm2 = 0.0;
  std::vector<Eigen::VectorXd> cols;  // index i*m + j
  std::vector<Eigen::VectorXd> gcols;
  std::vector<double> col_norm2;      // cols^T G cols
  std::vector<double> z0_dot;         // z0^T G cols
};

inline QsapColumns build_columns(const QsapInstance& inst, const SpMat& G) {
  const Mesh& m = inst.mesh();
  const int l = inst.elements(), mm = inst.points();
  QsapColumns qc;
  const EquilibriumState z0 = inst.projector().project(ZPoint::zero(m));
  qc.z0 = z_flatten(m, z0.as_zpoint(m));
  const Eigen::VectorXd gz0 = G * qc.z0;
  qc.z0_norm2 = qc.z0.dot(gz0);
  qc.cols.resize(static_cast<std::size_t>(l) * mm);
  qc.gcols.resize(qc.cols.size());
  qc.col_norm2.resize(qc.cols.size());
  qc.z0_dot.resize(qc.cols.size());
  ZPoint unit = ZPoint::zero(m);
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < mm; ++j) {
      const Vec4& p = inst.data().point(j);
      unit.r_p0.col(i) = p.head<2>();
      unit.w.col(i) = p.tail<2>();
      const EquilibriumState zs = inst.projector().project(unit);
      Eigen::VectorXd col =
          z_flatten(m, zs.as_zpoint(m)) - qc.z0 - z_flatten(m, unit);
      const std::size_t id = static_cast<std::size_t>(i) * mm + j;
      qc.gcols[id] = G * col;
      qc.col_norm2[id] = col.dot(qc.gcols[id]);
      qc.z0_dot[id] = gz0.dot(col);
      qc.cols[id] = std::move(col);
      unit.r_p0.col(i).setZero();
      unit.w.col(i).setZero();
    }
  }
  return qc;
}

}  // namespace detail

/// Dense quadratic form (A, b, c) with x^T A x + b^T x + c equal to the
/// assignment objective for every feasible binary x (layout x_{i,j} at
/// i*m + j). Built from the affine structure of the projection; intended for
/// validation on small instances, never for solving.
struct QsapQuadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;

  double value(const Assignment& a, int m) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(A.rows());
    for (std::size_t i = 0; i < a.idx.size(); ++i) x[static_cast<int>(i) * m + a.idx[i]] = 1.0;
    return x.dot(A * x) + b.dot(x) + c;
  }
};

inline QsapQuadratic materialize_qsap(const QsapInstance& inst) {
  const long lm = static_cast<long>(inst.elements()) * inst.points();
  if (lm > 4096) throw std::invalid_argument("materialize_qsap: l*m exceeds 4096");
  const SpMat G = z_gram(inst.mesh());
  const detail::QsapColumns qc = detail::build_columns(inst, G);
  QsapQuadratic out;
  out.A.resize(lm, lm);
  out.b.resize(lm);
  for (long p = 0; p < lm; ++p) {
    out.b[p] = qc.z0_dot[p];
    for (long q = 0; q <= p; ++q) {
      const double v = 0.5 * qc.cols[p].dot(qc.gcols[q]);
      out.A(p, q) = v;
      out.A(q, p) = v;
    }
  }
  out.c = 0.5 * qc.z0_norm2;
  return out;
}

/// Exhaustive global minimization over all m^l assignments; returns the
/// lexicographically smallest argmin. Guarded against combinatorial blow-up.
inline std::pair<Assignment, double> brute_force_solve(const QsapInstance& inst) {
  const int l = inst.elements(), m = inst.points();
  if (std::pow(static_cast<double>(m), l) > 1e7 + 0.5)
    throw std::invalid_argument("brute_force_solve: m^l exceeds 1e7");

  const SpMat G = z_gram(inst.mesh());
  const detail::QsapColumns qc = detail::build_columns(inst, G);

  Assignment cur;
  cur.idx.assign(l, 0);
  Assignment best;
  double best_f = std::numeric_limits<double>::infinity();

  // Per-depth saved partial sums so backtracking restores exactly.
  std::vector<Eigen::VectorXd> partial(l + 1);
  std::vector<double> norm2(l + 1);
  partial[0] = qc.z0;
  norm2[0] = qc.z0_norm2;

  auto recurse = [&](auto&& self, int depth) -> void {
    if (depth == l) {
      const double f = 0.5 * norm2[depth];
      if (f < best_f) {
        best_f = f;
        best = cur;
      }
      return;
    }
    for (int j = 0; j < m; ++j) {
      const std::size_t id = static_cast<std::size_t>(depth) * m + j;
      norm2[depth + 1] =
          norm2[depth] + 2.0 * partial[depth].dot(qc.gcols[id]) + qc.col_norm2[id];
      partial[depth + 1] = partial[depth] + qc.cols[id];
      cur.idx[depth] = j;
      self(self, depth + 1);
    }
  };
  recurse(recurse, 0);
  return {best, best_f};
}

/// Deterministic farthest-point subsample of a data set: start at the point
/// closest to the cloud mean, then repeatedly add the point with maximal
/// distance to the selected set. Returns indices into the data set.
inline std::vector<int> farthest_point_subsample(const LocalDataSet& data, int k) {
  k = std::min(k, data.size());
  std::vector<int> sel;
  if (k <= 0) return sel;
  Vec4 mean = Vec4::Zero();
  for (int i = 0; i < data.size(); ++i) mean += data.point(i);
  mean /= data.size();
  sel.push_back(data.nearest(mean));
  std::vector<double> dist(data.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(sel.size()) < k) {
    const Vec4& last = data.point(sel.back());
    int far = -1;
    double far_d = -1.0;
    for (int i = 0; i < data.size(); ++i) {
      dist[i] = std::min(dist[i], (data.point(i) - last).squaredNorm());
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    if (far_d == 0.0) break;  // every remaining point duplicates a selected one
    sel.push_back(far);
  }
  return sel;
}

struct PodConfig {
  int snapshot_cap = 200;
  int basis_cap = 40;
  double energy_drop = 1e-8;  // keep modes until 1 - energy_drop of the energy
};

/// Snapshot-based reduced model for the equilibrium projection. Approximates
/// pi_E(y) by the Z-orthogonal projection of y onto the affine span
/// z0 + span{z_e - z0} of collected exact projections. Every reduced state is
/// feasible for the divergence constraint because the span directions are
/// differences of feasible states.
class PodModel {
 public:
  PodModel(const EquilibriumProjector& proj, PodConfig cfg = {})
      : proj_(&proj), cfg_(cfg), G_(z_gram(proj.mesh())) {
    const Mesh& m = proj.mesh();
    z0_state_ = proj.project(ZPoint::zero(m));
    z0_flat_ = z_flatten(m, z0_state_.as_zpoint(m));
    z0_means_ = element_means(m, z0_state_.as_zpoint(m));
  }

  const EquilibriumState& reference_state() const { return z0_state_; }
  const Eigen::VectorXd& reference_flat() const { return z0_flat_; }
  const Eigen::Matrix4Xd& reference_means() const { return z0_means_; }
  const SpMat& gram() const { return G_; }
  int basis_size() const { return static_cast<int>(basis_.size()); }
  int snapshot_count() const { return static_cast<int>(snaps_.size()); }
  const Eigen::VectorXd& basis_flat(int i) const { return basis_.at(i); }
  const Eigen::VectorXd& basis_gflat(int i) const { return gbasis_.at(i); }
  const Eigen::Matrix4Xd& basis_means(int i) const { return basis_means_.at(i); }

  void add_snapshot(const EquilibriumState& ze) {
    const Mesh& m = proj_->mesh();
    Eigen::VectorXd s = z_flatten(m, ze.as_zpoint(m)) - z0_flat_;
    if (static_cast<int>(snaps_.size()) == cfg_.snapshot_cap) {
      snaps_.pop_front();
      gsnaps_.pop_front();
      const long k = gram_.rows();
      gram_.block(0, 0, k - 1, k - 1) = gram_.block(1, 1, k - 1, k - 1).eval();
      gram_.conservativeResize(k - 1, k - 1);
    }
    Eigen::VectorXd gs = G_ * s;
    const long k = gram_.rows();
    gram_.conservativeResize(k + 1, k + 1);
    for (long i = 0; i < k; ++i) gram_(i, k) = gram_(k, i) = snaps_[i].dot(gs);
    gram_(k, k) = s.dot(gs);
    snaps_.push_back(std::move(s));
    gsnaps_.push_back(std::move(gs));
    rebuild_basis();
  }

  /// z_a = z0 + Phi Phi^T_Z (y - z0).
  ZPoint reduced_project(const ZPoint& y) const {
    const Mesh& m = proj_->mesh();
    Eigen::VectorXd x = z_flatten(m, y) - z0_flat_;
    Eigen::VectorXd za = z0_flat_;
    for (std::size_t i = 0; i < basis_.size(); ++i) za += gbasis_[i].dot(x) * basis_[i];
    return z_unflatten(m, za);
  }

 private:
  void rebuild_basis() {
    basis_.clear();
    gbasis_.clear();
    basis_means_.clear();
    const long k = gram_.rows();
    if (k == 0) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
    const Eigen::VectorXd& lam = eig.eigenvalues();  // ascending
    const double total = std::max(lam.sum(), 0.0);
    if (total <= 0.0) return;
    const double lam_floor = std::max(1e-14 * lam[k - 1], 0.0);

    // Modes from the largest eigenvalue down until the energy target is met.
    std::vector<int> keep;
    double energy = 0.0;
    for (long i = k - 1; i >= 0 && static_cast<int>(keep.size()) < cfg_.basis_cap; --i) {
      if (lam[i] <= lam_floor) break;
      keep.push_back(static_cast<int>(i));
      energy += lam[i];
      if (energy >= (1.0 - cfg_.energy_drop) * total) break;
    }

    const Mesh& m = proj_->mesh();
    for (int id : keep) {
      Eigen::VectorXd phi = Eigen::VectorXd::Zero(z0_flat_.size());
      for (long s = 0; s < k; ++s) phi += eig.eigenvectors()(s, id) * snaps_[s];
      phi /= std::sqrt(lam[id]);
      // One Gram-Schmidt pass against the already accepted modes keeps the
      // basis orthonormal to machine precision.
      for (std::size_t i = 0; i < basis_.size(); ++i) phi -= gbasis_[i].dot(phi) * basis_[i];
      Eigen::VectorXd gphi = G_ * phi;
      const double nrm = std::sqrt(std::max(phi.dot(gphi), 0.0));
      if (nrm < 1e-10) continue;
      phi /= nrm;
      gphi /= nrm;
      basis_means_.push_back(element_means(m, z_unflatten(m, phi)));
      basis_.push_back(std::move(phi));
      gbasis_.push_back(std::move(gphi));
    }
  }

  const EquilibriumProjector* proj_;
  PodConfig cfg_;
  SpMat G_;
  EquilibriumState z0_state_;
  Eigen::VectorXd z0_flat_;
  Eigen::Matrix4Xd z0_means_;
  std::deque<Eigen::VectorXd> snaps_, gsnaps_;
  Eigen::MatrixXd gram_;
  std::vector<Eigen::VectorXd> basis_, gbasis_;
  std::vector<Eigen::Matrix4Xd> basis_means_;
};

struct LocalSearchConfig {
  double eps1 = 0.002;  // reduced-vs-incumbent deviation triggering exact solves
  double eps2 = 0.001;  // reduced-vs-exact deviation triggering basis updates
  double eps3 = 0.01;   // optimistic margin triggering exact verification
  int K = 20;           // nearest data neighbors tested per element
  PodConfig pod;
  int max_sweeps = 1000;
};

/// Instrumentation of the reduced-model decisions, one record per exact
/// evaluation during the search.
struct LocalSearchAudit {
  struct Record {
    int element = 0;
    int candidate = 0;
    double v_reduced = 0.0;
    double v_exact = 0.0;
    bool screened = false;       // exact solve came from the deviation test
    bool basis_updated = false;  // accuracy-triggered snapshot added
    bool accepted = false;
    double za_div_residual = 0.0;  // filled for accepted steps
  };
  std::vector<Record> records;
};

/// Local search over assignments with a POD surrogate for the equilibrium
/// projection. Sweeps the elements, tests the K nearest data neighbors of the
/// value currently assigned to each element, screens them with the reduced
/// model, and accepts only improvements confirmed by the exact model. Stops
/// after the first sweep without an accepted change.
inline SolveReport local_search(const QsapInstance& inst, const Assignment& initial,
                                const LocalSearchConfig& cfg,
                                const std::vector<EquilibriumState>& initial_snapshots = {},
                                LocalSearchAudit* audit = nullptr) {
  inst.validate(initial);
  const Mesh& m = inst.mesh();
  const EquilibriumProjector& proj = inst.projector();
  const LocalDataSet& data = inst.data();
  detail::Tracker tk;
  SolveReport rep;

  PodModel pod(proj, cfg.pod);
  for (const auto& s : initial_snapshots) pod.add_snapshot(s);

  Assignment a = initial;
  PhaseField y = phase_from_assignment(m, data, a);
  EquilibriumState zy;
  double v = objective(proj, y, &zy);
  tk.record(rep, y, a, zy, v);

  // Coefficient cache for the reduced objective: c_i = <y - z0, phi_i>_Z and
  // dn2 = |y - z0|_Z^2. Candidate moves touch a single element, so both
  // update in O(basis) per candidate.
  Eigen::VectorXd cache_c;
  double dn2 = 0.0;
  auto refresh_cache = [&]() {
    const Eigen::VectorXd d = z_flatten(m, ZPoint::from_phase(y)) - pod.reference_flat();
    dn2 = d.dot(pod.gram() * d);
    cache_c.resize(pod.basis_size());
    for (int i = 0; i < pod.basis_size(); ++i) cache_c[i] = pod.basis_gflat(i).dot(d);
  };
  refresh_cache();

  const int l = inst.elements();
  int sweeps = 0;
  bool changed = true;
  while (changed && sweeps < cfg.max_sweeps && v > 0.0) {
    changed = false;
    ++sweeps;
    for (int t = 0; t < l && v > 0.0; ++t) {
      Vec4 cur_val;
      cur_val << y.r.values.col(t), y.w.values.col(t);
      const std::vector<int> neigh = data.nearest_k(cur_val, cfg.K);
      for (int j : neigh) {
        const Vec4& p = data.point(j);
        const Vec2 dr = p.head<2>() - y.r.values.col(t).eval();
        const Vec2 dw = p.tail<2>() - y.w.values.col(t).eval();
        const double area = m.area(t);

        // Reduced objective of the candidate.
        const Vec2 dflux = y.r.values.col(t) - pod.reference_means().col(t).head<2>();
        const Vec2 dgrad = y.w.values.col(t) - pod.reference_means().col(t).tail<2>();
        const double cand_dn2 = dn2 + 2.0 * area * (dr.dot(dflux) + dw.dot(dgrad)) +
                                area * (dr.squaredNorm() + dw.squaredNorm());
        double proj_sq = 0.0;
        Eigen::VectorXd cand_c(pod.basis_size());
        for (int i = 0; i < pod.basis_size(); ++i) {
          const auto& bm = pod.basis_means(i);
          cand_c[i] = cache_c[i] + area * (dr.dot(bm.col(t).head<2>()) + dw.dot(bm.col(t).tail<2>()));
          proj_sq += cand_c[i] * cand_c[i];
        }
        const double v_a = 0.5 * std::max(cand_dn2 - proj_sq, 0.0);

        bool exact_done = false;
        EquilibriumState ze;
        double v_e = 0.0;
        PhaseField ytil;
        auto exact_eval = [&]() {
          if (exact_done) return;
          ytil = y;
          ytil.r.values.col(t) = p.head<2>();
          ytil.w.values.col(t) = p.tail<2>();
          v_e = objective(proj, ytil, &ze);
          exact_done = true;
        };
        auto accept = [&]() {
          y = ytil;
          a.idx[t] = j;
          v = v_e;
          tk.record(rep, y, a, ze, v);
          changed = true;
          if (audit && !audit->records.empty()) {
            auto& rec = audit->records.back();
            rec.accepted = true;
            const ZPoint za = pod.reduced_project(ZPoint::from_phase(y));
            rec.za_div_residual =
                divergence_residual(m, Rt0Field{za.r_rt0}, proj.source_means());
          }
          pod.add_snapshot(ze);
          refresh_cache();
        };

        if (std::abs(v_a - v) > cfg.eps1 * std::abs(v)) {
          exact_eval();
          bool updated = false;
          if (std::abs(v_a - v_e) > cfg.eps2 * std::abs(v_e)) {
            pod.add_snapshot(ze);
            refresh_cache();
            updated = true;
          }
          if (audit) audit->records.push_back({t, j, v_a, v_e, true, updated, false, 0.0});
          if (v_e < v) {
            accept();
            continue;  // v changed; the optimistic branch below would compare stale values
          }
        }
        if (v_a < (1.0 + cfg.eps3) * v) {
          const bool had_exact = exact_done;
          exact_eval();
          if (audit && !had_exact)
            audit->records.push_back({t, j, v_a, v_e, false, false, false, 0.0});
          if (v_e < v) accept();
        }
      }
    }
  }

  rep.gamma_final = 0.0;
  tk.finish(rep, sweeps, changed ? Termination::MaxIter : Termination::FixedPoint);
  return rep;
}

}  // namespace ddfem
