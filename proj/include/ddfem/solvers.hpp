#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ddfem/equilibrium.hpp"
#include "ddfem/material.hpp"
#include "ddfem/rng.hpp"

namespace ddfem {

enum class Algorithm { PG, PS, DR1, DR2 };

/// Why a solver run stopped.
///  FixedPoint    assignment repeated (PG/PS) or the step size hit its floor,
///  CycleResolved fixed assignment reached directly after breaking a 2-cycle,
///  Stall         no best-objective improvement within the stall window (DR),
///  MaxIter       iteration cap.
enum class Termination { FixedPoint, CycleResolved, Stall, MaxIter };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::FixedPoint: return "fixed_point";
    case Termination::CycleResolved: return "cycle_resolved";
    case Termination::Stall: return "stall";
    case Termination::MaxIter: return "max_iter";
  }
  return "?";
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::PG;
  double gamma0 = 1.4;        // initial step size (PS)
  double gamma_shrink = 0.9;  // reduction factor on 2-cycles (PS)
  double gamma_floor = 1e-3;
  int stall_window = 50;   // DR termination
  int max_iterations = 0;  // 0 = default: 2000 for PG/PS, 5000 for DR

  enum class Init { Zero, RandomBox, Explicit };
  Init init = Init::Zero;
  std::uint64_t seed = 0;             // RandomBox
  std::optional<PhaseField> initial;  // Explicit
  bool record_assignments = false;    // keep the per-iteration assignment trail

  int resolved_max_iterations() const {
    if (max_iterations > 0) return max_iterations;
    return (algorithm == Algorithm::DR1 || algorithm == Algorithm::DR2) ? 5000 : 2000;
  }
};

struct SolveReport {
  PhaseField best_y;
  Assignment best_assignment;
  EquilibriumState best_z;  // projection of best_y
  double best_objective = std::numeric_limits<double>::infinity();
  std::vector<double> objective_history;  // F at each data-set iterate
  std::vector<double> gamma_history;      // PS only, aligned with the history
  std::vector<double> wall_history;       // elapsed ms at each history entry
  std::vector<Assignment> assignment_history;  // only with record_assignments
  int iterations = 0;
  Termination reason = Termination::MaxIter;
  double gamma_final = 0.0;
  double wall_ms = 0.0;
};

/// F(y) = 1/2 || pi_E(y) - y ||_Z^2.
inline double objective(const EquilibriumProjector& proj, const PhaseField& y,
                        EquilibriumState* state_out = nullptr) {
  EquilibriumState z = proj.project(y);
  const double d = z_dist(proj.mesh(), ZPoint::from_phase(y), z.as_zpoint(proj.mesh()));
  if (state_out) *state_out = std::move(z);
  return 0.5 * d * d;
}

namespace detail {

inline ZPoint initial_point(const Mesh& m, const SolverConfig& cfg) {
  switch (cfg.init) {
    case SolverConfig::Init::Zero:
      return ZPoint::zero(m);
    case SolverConfig::Init::RandomBox: {
      SplitMix64 rng(cfg.seed);
      ZPoint y = ZPoint::zero(m);
      for (int t = 0; t < m.num_triangles(); ++t) {
        for (int c = 0; c < 2; ++c) y.r_p0(c, t) = rng.next_in(-4.0, 4.0);
        for (int c = 0; c < 2; ++c) y.w(c, t) = rng.next_in(-4.0, 4.0);
      }
      return y;
    }
    case SolverConfig::Init::Explicit:
      if (!cfg.initial) throw std::invalid_argument("SolverConfig: explicit init without field");
      return ZPoint::from_phase(*cfg.initial);
  }
  return ZPoint::zero(m);
}

/// Assignment proxy of the initial point, seeded only when the point is
/// itself a data field; fixed-point detection compares assignments, which is
/// meaningful only between members of the data set.
inline std::optional<Assignment> assignment_if_in_dataset(const Mesh& m, const LocalDataSet& data,
                                                          const ZPoint& y) {
  if (y.has_rt0()) return std::nullopt;
  Assignment a;
  a.idx.resize(m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    Vec4 v;
    v << y.r_p0.col(t), y.w.col(t);
    const int j = data.nearest(v);
    if ((data.point(j) - v).squaredNorm() != 0.0) return std::nullopt;
    a.idx[t] = j;
  }
  return a;
}

struct Tracker {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  bool keep_assignments = false;

  void record(SolveReport& rep, const PhaseField& y, const Assignment& a,
              const EquilibriumState& z, double f) const {
    rep.objective_history.push_back(f);
    rep.wall_history.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    if (keep_assignments) rep.assignment_history.push_back(a);
    if (f < rep.best_objective) {
      rep.best_objective = f;
      rep.best_y = y;
      rep.best_assignment = a;
      rep.best_z = z;
    }
  }
  void finish(SolveReport& rep, int iters, Termination why) const {
    rep.iterations = iters;
    rep.reason = why;
    rep.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  }
};

}  // namespace detail

/// Alternating projections: y_{n+1} = pi_D(pi_E(y_n)). Stops when the
/// assignment repeats.
inline SolveReport run_pg(const EquilibriumProjector& proj, const LocalDataSet& data,
                          const SolverConfig& cfg) {
  const Mesh& m = proj.mesh();
  detail::Tracker tk;
  tk.keep_assignments = cfg.record_assignments;
  SolveReport rep;

  ZPoint y0 = detail::initial_point(m, cfg);
  std::optional<Assignment> prev = detail::assignment_if_in_dataset(m, data, y0);
  EquilibriumState z = proj.project(y0);

  const int max_it = cfg.resolved_max_iterations();
  for (int n = 1; n <= max_it; ++n) {
    Assignment a;
    const PhaseField y = project_data(m, data, z.as_zpoint(m), &a);
    EquilibriumState zy = proj.project(y);
    const double f =
        0.5 * std::pow(z_dist(m, ZPoint::from_phase(y), zy.as_zpoint(m)), 2);
    tk.record(rep, y, a, zy, f);
    if (prev && a == *prev) {
      tk.finish(rep, n, Termination::FixedPoint);
      return rep;
    }
    prev = std::move(a);
    z = std::move(zy);
  }
  tk.finish(rep, max_it, Termination::MaxIter);
  return rep;
}

/// Proximal-gradient iteration y_{n+1} = pi_D(y_n - gamma (y_n - pi_E(y_n))).
/// When the iterates circle between two assignments, gamma is reduced by the
/// shrink factor and the iteration resumes from the better cycle point. With
/// gamma = 1 this reproduces the PG sequence exactly.
inline SolveReport run_ps(const EquilibriumProjector& proj, const LocalDataSet& data,
                          const SolverConfig& cfg) {
  if (!(cfg.gamma0 > 0.0 && cfg.gamma0 < 2.0))
    throw std::invalid_argument("run_ps: gamma0 must lie in (0,2)");
  const Mesh& m = proj.mesh();
  detail::Tracker tk;
  tk.keep_assignments = cfg.record_assignments;
  SolveReport rep;
  double gamma = cfg.gamma0;

  struct Iterate {
    PhaseField y;
    EquilibriumState z;
    Assignment a;
    double f = 0.0;
  };

  ZPoint ycur = detail::initial_point(m, cfg);
  std::optional<Assignment> a0 = detail::assignment_if_in_dataset(m, data, ycur);
  EquilibriumState zcur = proj.project(ycur);

  std::optional<Iterate> prev1, prev2;  // last and second-to-last data iterates
  if (a0) prev1 = Iterate{PhaseField::zero(m), EquilibriumState{}, *a0, 0.0};
  bool just_resolved = false;

  const int max_it = cfg.resolved_max_iterations();
  for (int n = 1; n <= max_it; ++n) {
    // v = (1-gamma) y + gamma pi_E(y)
    ZPoint v = (1.0 - gamma) * ycur + gamma * zcur.as_zpoint(m);
    Iterate it;
    it.y = project_data(m, data, v, &it.a);
    it.z = proj.project(it.y);
    it.f = 0.5 * std::pow(z_dist(m, ZPoint::from_phase(it.y), it.z.as_zpoint(m)), 2);
    tk.record(rep, it.y, it.a, it.z, it.f);
    rep.gamma_history.push_back(gamma);
    rep.gamma_final = gamma;

    if (prev1 && it.a == prev1->a) {
      tk.finish(rep, n, just_resolved ? Termination::CycleResolved : Termination::FixedPoint);
      return rep;
    }
    just_resolved = false;

    if (prev2 && it.a == prev2->a) {
      // 2-cycle: shrink the step and resume from the better cycle point.
      gamma *= cfg.gamma_shrink;
      rep.gamma_final = gamma;
      if (gamma < cfg.gamma_floor) {
        tk.finish(rep, n, Termination::FixedPoint);
        return rep;
      }
      const Iterate& pick = (prev1->f < it.f) ? *prev1 : it;
      ycur = ZPoint::from_phase(pick.y);
      zcur = pick.z;
      prev1 = pick;
      prev2.reset();  // require two fresh iterates before the next detection
      just_resolved = true;
      continue;
    }

    ycur = ZPoint::from_phase(it.y);
    zcur = it.z;
    prev2 = std::move(prev1);
    prev1 = std::move(it);
  }
  tk.finish(rep, max_it, Termination::MaxIter);
  return rep;
}

/// Douglas-Rachford splitting y_{n+1} = (y_n + R_B(R_A(y_n))) / 2 with
/// reflections R = 2 pi - id. DR1 reflects at the equilibrium set first,
/// DR2 at the data set. Iterates live in the ambient space; the objective is
/// evaluated at the extra data projection of the current iterate. Terminates
/// once the best objective has not improved for the stall window.
inline SolveReport run_dr(const EquilibriumProjector& proj, const LocalDataSet& data,
                          const SolverConfig& cfg) {
  const bool equilibrium_first = cfg.algorithm != Algorithm::DR2;
  const Mesh& m = proj.mesh();
  detail::Tracker tk;
  tk.keep_assignments = cfg.record_assignments;
  SolveReport rep;

  ZPoint y = detail::initial_point(m, cfg);
  int stall = 0;
  double best_seen = std::numeric_limits<double>::infinity();

  const int max_it = cfg.resolved_max_iterations();
  for (int n = 1; n <= max_it; ++n) {
    ZPoint ra = ZPoint::zero(m);
    if (equilibrium_first) {
      ra = 2.0 * proj.project(y).as_zpoint(m) - y;
      const PhaseField pd = project_data(m, data, ra);
      y = 0.5 * (y + (2.0 * ZPoint::from_phase(pd) - ra));
    } else {
      const PhaseField pd = project_data(m, data, y);
      ra = 2.0 * ZPoint::from_phase(pd) - y;
      y = 0.5 * (y + (2.0 * proj.project(ra).as_zpoint(m) - ra));
    }

    Assignment a;
    const PhaseField yeval = project_data(m, data, y, &a);
    EquilibriumState zeval = proj.project(yeval);
    const double f =
        0.5 * std::pow(z_dist(m, ZPoint::from_phase(yeval), zeval.as_zpoint(m)), 2);
    tk.record(rep, yeval, a, zeval, f);

    if (best_seen - f > 1e-14) {
      best_seen = std::min(best_seen, f);
      stall = 0;
    } else {
      best_seen = std::min(best_seen, f);
      if (++stall >= cfg.stall_window) {
        tk.finish(rep, n, Termination::Stall);
        return rep;
      }
    }
  }
  tk.finish(rep, max_it, Termination::MaxIter);
  return rep;
}

inline SolveReport run_solver(const EquilibriumProjector& proj, const LocalDataSet& data,
                              const SolverConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::PG: return run_pg(proj, data, cfg);
    case Algorithm::PS: return run_ps(proj, data, cfg);
    case Algorithm::DR1:
    case Algorithm::DR2: return run_dr(proj, data, cfg);
  }
  throw std::invalid_argument("run_solver: unknown algorithm");
}

}  // namespace ddfem
