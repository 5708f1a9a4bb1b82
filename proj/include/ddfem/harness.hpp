#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "ddfem/equilibrium.hpp"
#include "ddfem/material.hpp"
#include "ddfem/solvers.hpp"

namespace ddfem {

struct ExactSolution {
  std::function<double(const Vec2&)> u;
  std::function<Vec2(const Vec2&)> grad_u;
  double l2_norm = 0.0;      // ||u||_{L2}
  double h1_seminorm = 0.0;  // ||grad u||_{L2}
};

/// Test problem bundle: source term, material law with Jacobian, and the
/// manufactured exact solution u = sin(pi x1) sin(pi x2).
struct Problem {
  std::string law;
  std::function<double(const Vec2&)> f;
  std::function<Vec2(const Vec2&)> kappa;
  std::function<Eigen::Matrix2d(const Vec2&)> kappa_jacobian;
  ExactSolution exact;
};

inline ExactSolution sine_exact_solution() {
  using std::numbers::pi;
  ExactSolution ex;
  ex.u = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  ex.grad_u = [](const Vec2& x) {
    return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()),
                pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  ex.l2_norm = 0.5;
  ex.h1_seminorm = pi / std::sqrt(2.0);
  return ex;
}

inline Problem fourier_problem() {
  using std::numbers::pi;
  Problem p;
  p.law = "fourier";
  p.f = [](const Vec2& x) {
    return 2.0 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y());
  };
  p.kappa = [](const Vec2& w) { return w; };
  p.kappa_jacobian = [](const Vec2&) { return Eigen::Matrix2d::Identity(); };
  p.exact = sine_exact_solution();
  return p;
}

inline Problem arctan_problem() {
  using std::numbers::pi;
  Problem p;
  p.law = "arctan";
  p.kappa = [](const Vec2& w) { return kappa_arctan(w); };
  p.kappa_jacobian = [](const Vec2& w) {
    const double t = w.squaredNorm();
    const double alpha = 2.0 * std::atan(t - 1.0) + 0.5 * pi + 2.0;
    const double dalpha = 2.0 / (1.0 + (t - 1.0) * (t - 1.0));
    return (alpha * Eigen::Matrix2d::Identity() + 2.0 * dalpha * w * w.transpose()).eval();
  };
  // f = -div kappa(grad u) expanded with the chain rule for the sine solution.
  p.f = [](const Vec2& x) {
    const double s1 = std::sin(pi * x.x()), c1 = std::cos(pi * x.x());
    const double s2 = std::sin(pi * x.y()), c2 = std::cos(pi * x.y());
    const Vec2 grad(pi * c1 * s2, pi * s1 * c2);
    const double t = grad.squaredNorm();
    const double alpha = 2.0 * std::atan(t - 1.0) + 0.5 * pi + 2.0;
    const double dalpha = 2.0 / (1.0 + (t - 1.0) * (t - 1.0));
    const double lap = -2.0 * pi * pi * s1 * s2;
    const Vec2 grad_t(pi * pi * pi * std::sin(2.0 * pi * x.x()) * std::cos(2.0 * pi * x.y()),
                      pi * pi * pi * std::cos(2.0 * pi * x.x()) * std::sin(2.0 * pi * x.y()));
    return -(dalpha * grad_t.dot(grad) + alpha * lap);
  };
  p.exact = sine_exact_solution();
  return p;
}

inline Problem problem_by_law(const std::string& law) {
  if (law == "fourier") return fourier_problem();
  if (law == "arctan") return arctan_problem();
  throw std::invalid_argument("unknown material law '" + law + "'");
}

struct ErrorReport {
  double err_l2 = 0.0;  // ||u - u_h|| / ||u||
  double err_h1 = 0.0;  // ||grad(u - u_h)|| / ||grad u||
};

/// Relative errors of a P1 potential against the exact solution; degree-4
/// quadrature, analytic denominators.
inline ErrorReport compute_errors(const Mesh& m, const P1Field& uh, const ExactSolution& ex) {
  const P0VectorField grad_h = p1_gradient(m, uh);
  const TriRule& rule = tri_rule_degree4();
  double e_l2 = 0.0, e_h1 = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& v = m.tri(t);
    const TriGeom g = tri_geom(m, t);
    const Vec2 gh = grad_h.values.col(t);
    double sl = 0.0, sh = 0.0;
    for (const auto& nd : rule.nodes) {
      const Vec2 x = nd.l1 * g.p[0] + nd.l2 * g.p[1] + nd.l3 * g.p[2];
      const double uval =
          nd.l1 * uh.values[v[0]] + nd.l2 * uh.values[v[1]] + nd.l3 * uh.values[v[2]];
      const double du = ex.u(x) - uval;
      sl += nd.w * du * du;
      sh += nd.w * (ex.grad_u(x) - gh).squaredNorm();
    }
    e_l2 += g.area * sl;
    e_h1 += g.area * sh;
  }
  return {std::sqrt(e_l2) / ex.l2_norm, std::sqrt(e_h1) / ex.h1_seminorm};
}

struct NewtonReport {
  P1Field u;
  std::vector<double> residual_norms;  // dual norms, including the initial one
  int iterations = 0;
  bool converged = false;
};

/// Galerkin discretization of -div kappa(grad u) = f in the P1 space, solved
/// by Newton's method with step halving as fallback. The nonlinear form is
/// integrated exactly (grad u_h is constant per element); the load replaces f
/// by its P1 nodal interpolant and integrates the product exactly, the usual
/// finite element treatment of a smooth source. Residuals are measured in the
/// discrete dual norm induced by the Laplace stiffness.
inline NewtonReport solve_classical_fem_newton(const Mesh& m, const Problem& prob,
                                               double tol = 1e-10, int max_newton = 25) {
  const SystemMatrices mats = assemble(m);
  Eigen::SimplicialLLT<SpMat> llt_K(mats.K);
  if (llt_K.info() != Eigen::Success)
    throw std::runtime_error("solve_classical_fem_newton: stiffness factorization failed");

  const int ni = m.n_interior, nt = m.num_triangles();
  Eigen::VectorXd load = Eigen::VectorXd::Zero(ni);
  for (int t = 0; t < nt; ++t) {
    const auto& v = m.tri(t);
    double fv[3];
    for (int k = 0; k < 3; ++k) fv[k] = prob.f(m.vertices[v[k]]);
    for (int i = 0; i < 3; ++i) {
      const int gi = m.interior_index[v[i]];
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j)
        load[gi] += m.area(t) / 12.0 * (i == j ? 2.0 : 1.0) * fv[j];
    }
  }

  auto gradients = [&](const Eigen::VectorXd& ui) {
    P1Field u = P1Field::zero(m);
    for (int v = 0; v < m.num_vertices(); ++v)
      if (m.interior_index[v] >= 0) u.values[v] = ui[m.interior_index[v]];
    return p1_gradient(m, u);
  };
  auto residual = [&](const Eigen::VectorXd& ui) {
    const P0VectorField gu = gradients(ui);
    Eigen::VectorXd r = -load;
    for (int t = 0; t < nt; ++t) {
      const TriGeom g = tri_geom(m, t);
      const auto& v = m.tri(t);
      const Vec2 flux = prob.kappa(gu.values.col(t));
      for (int k = 0; k < 3; ++k) {
        const int gi = m.interior_index[v[k]];
        if (gi >= 0) r[gi] += g.area * flux.dot(g.grad[k]);
      }
    }
    return r;
  };
  auto dual_norm = [&](const Eigen::VectorXd& r) { return std::sqrt(r.dot(llt_K.solve(r))); };

  Eigen::VectorXd ui = Eigen::VectorXd::Zero(ni);
  NewtonReport rep;
  Eigen::VectorXd r = residual(ui);
  double rnorm = dual_norm(r);
  rep.residual_norms.push_back(rnorm);

  for (int it = 1; it <= max_newton && rnorm > tol; ++it) {
    std::vector<Eigen::Triplet<double>> tj;
    tj.reserve(9 * nt);
    const P0VectorField gu = gradients(ui);
    for (int t = 0; t < nt; ++t) {
      const TriGeom g = tri_geom(m, t);
      const auto& v = m.tri(t);
      const Eigen::Matrix2d dk = prob.kappa_jacobian(gu.values.col(t));
      for (int a = 0; a < 3; ++a) {
        const int gi = m.interior_index[v[a]];
        if (gi < 0) continue;
        for (int b = 0; b < 3; ++b) {
          const int gj = m.interior_index[v[b]];
          if (gj < 0) continue;
          tj.emplace_back(gi, gj, g.area * g.grad[a].dot(dk * g.grad[b]));
        }
      }
    }
    SpMat J(ni, ni);
    J.setFromTriplets(tj.begin(), tj.end());
    Eigen::SimplicialLLT<SpMat> llt_J(J);
    if (llt_J.info() != Eigen::Success)
      throw std::runtime_error("solve_classical_fem_newton: Jacobian factorization failed");
    const Eigen::VectorXd step = llt_J.solve(-r);

    double s = 1.0;
    Eigen::VectorXd u_try, r_try;
    double n_try = 0.0;
    int halvings = 0;
    for (;; ++halvings) {
      u_try = ui + s * step;
      r_try = residual(u_try);
      n_try = dual_norm(r_try);
      if (n_try < rnorm || halvings >= 10) break;
      s *= 0.5;
    }
    if (n_try >= rnorm) {
      rep.iterations = it;
      rep.converged = false;
      rep.u = P1Field::zero(m);
      for (int v = 0; v < m.num_vertices(); ++v)
        if (m.interior_index[v] >= 0) rep.u.values[v] = ui[m.interior_index[v]];
      return rep;
    }
    ui = u_try;
    r = r_try;
    rnorm = n_try;
    rep.residual_norms.push_back(rnorm);
    rep.iterations = it;
  }

  rep.converged = rnorm <= tol;
  rep.u = P1Field::zero(m);
  for (int v = 0; v < m.num_vertices(); ++v)
    if (m.interior_index[v] >= 0) rep.u.values[v] = ui[m.interior_index[v]];
  return rep;
}

/// Experimental order of convergence between two (h, error) samples.
inline double compute_eoc(double e1, double h1, double e2, double h2) {
  if (e1 <= 0.0 || e2 <= 0.0) throw std::invalid_argument("compute_eoc: errors must be positive");
  if (h1 == h2) throw std::invalid_argument("compute_eoc: mesh sizes must differ");
  return (std::log(e1) - std::log(e2)) / (std::log(h1) - std::log(h2));
}

struct ExperimentSpec {
  std::string law = "arctan";
  std::vector<int> mesh_ns;
  std::vector<int> data_sizes;
  std::vector<double> noises;
  std::vector<std::string> algorithms;  // pg | ps | dr1 | dr2 | fem
  std::uint64_t seed = 0;
  double gamma0 = 1.4;
  std::string sampling;  // "" (law default), "grid", "random"
  bool record_wall_time = true;
};

namespace detail {

inline std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

inline Algorithm algorithm_by_name(const std::string& name) {
  if (name == "pg") return Algorithm::PG;
  if (name == "ps") return Algorithm::PS;
  if (name == "dr1") return Algorithm::DR1;
  if (name == "dr2") return Algorithm::DR2;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

}  // namespace detail

inline LocalDataSet make_dataset(const std::string& law, int mcount, double noise,
                                 std::uint64_t seed, const std::string& sampling = "") {
  const std::string mode = !sampling.empty() ? sampling : (law == "fourier" ? "grid" : "random");
  if (mode == "grid") {
    const int per_axis = static_cast<int>(std::lround(std::sqrt(static_cast<double>(mcount))));
    if (per_axis * per_axis != mcount || per_axis < 2)
      throw std::invalid_argument("grid sampling needs m to be a perfect square >= 4");
    if (noise != 0.0) throw std::invalid_argument("grid sampling supports noise = 0 only");
    return law == "fourier" ? generate_fourier_grid(per_axis) : generate_arctan_grid(per_axis);
  }
  if (mode == "random") {
    if (law != "arctan")
      throw std::invalid_argument("random sampling is defined for the arctan law");
    return generate_arctan_samples(mcount, noise, seed);
  }
  throw std::invalid_argument("unknown sampling mode '" + mode + "'");
}

/// Runs the full experiment grid and streams one CSV row per
/// (mesh, m, noise, algorithm) combination, in specification order.
inline void run_experiment(const ExperimentSpec& spec, std::ostream& out) {
  if (spec.mesh_ns.empty() || spec.data_sizes.empty() || spec.noises.empty() ||
      spec.algorithms.empty())
    throw std::invalid_argument("run_experiment: empty spec axis");
  for (int n : spec.mesh_ns)
    if (n < 1) throw std::invalid_argument("run_experiment: mesh n must be positive");
  for (const auto& alg : spec.algorithms)
    if (alg != "fem") (void)detail::algorithm_by_name(alg);  // validate early

  const Problem prob = problem_by_law(spec.law);
  out << "n,m,noise,algorithm,objective,err_l2,err_h1,iterations,wall_ms,seed,gamma_final\n";

  for (int n : spec.mesh_ns) {
    const Mesh mesh = build_mesh(n);
    const EquilibriumProjector proj(mesh, prob.f);
    for (int mcount : spec.data_sizes) {
      for (double noise : spec.noises) {
        LocalDataSet data = make_dataset(spec.law, mcount, noise, spec.seed, spec.sampling);
        for (const auto& alg : spec.algorithms) {
          double obj = 0.0, wall = 0.0, gamma_final = 0.0;
          int iters = 0;
          ErrorReport err;
          if (alg == "fem") {
            const auto t0 = std::chrono::steady_clock::now();
            NewtonReport nr = solve_classical_fem_newton(mesh, prob);
            wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             t0)
                       .count();
            if (!nr.converged) throw std::runtime_error("run_experiment: Newton did not converge");
            err = compute_errors(mesh, nr.u, prob.exact);
            iters = nr.iterations;
          } else {
            SolverConfig cfg;
            cfg.algorithm = detail::algorithm_by_name(alg);
            cfg.gamma0 = spec.gamma0;
            SolveReport rep = run_solver(proj, data, cfg);
            obj = rep.best_objective;
            err = compute_errors(mesh, rep.best_z.u, prob.exact);
            iters = rep.iterations;
            wall = rep.wall_ms;
            gamma_final = rep.gamma_final;
          }
          out << n << ',' << mcount << ',' << detail::fmt_sci(noise) << ',' << alg << ','
              << detail::fmt_sci(obj) << ',' << detail::fmt_sci(err.err_l2) << ','
              << detail::fmt_sci(err.err_h1) << ',' << iters << ','
              << detail::fmt_sci(spec.record_wall_time ? wall : 0.0) << ',' << spec.seed << ','
              << detail::fmt_sci(gamma_final) << '\n';
        }
      }
    }
  }
}

}  // namespace ddfem
