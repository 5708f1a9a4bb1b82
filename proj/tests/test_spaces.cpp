#include "ddfem/spaces.hpp"

#include <Eigen/Cholesky>

#include "doctest.h"
#include "support.hpp"

using namespace ddfem;

TEST_CASE("mass matrix is SPD and integrates constants exactly") {
  for (int n : {1, 2, 5}) {
    const Mesh m = build_mesh(n);
    const SystemMatrices sm = assemble(m);
    REQUIRE(sm.M.rows() == m.num_edges());
    Eigen::SimplicialLLT<SpMat> llt(sm.M);
    CHECK(llt.info() == Eigen::Success);  // SPD

    const Rt0Field q = rt0_interpolate(m, [](const Vec2&) { return Vec2(1.0, 0.0); });
    const double energy = q.dof.dot(sm.M * q.dof);
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-12));  // int |(1,0)|^2 over unit square
  }
}

TEST_CASE("stiffness matrix is SPD") {
  for (int n : {2, 5, 20}) {
    const SystemMatrices sm = assemble(build_mesh(n));
    Eigen::SimplicialLLT<SpMat> llt(sm.K);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("divergence matrix reproduces div q = 2 for the linear field") {
  const Mesh m = build_mesh(3);
  const SystemMatrices sm = assemble(m);
  const Rt0Field q = rt0_interpolate(m, [](const Vec2& x) { return x; });
  const Eigen::VectorXd div_int = sm.B * q.dof;  // per-element integral of div
  for (int t = 0; t < m.num_triangles(); ++t)
    CHECK(div_int[t] == doctest::Approx(2.0 * m.area(t)).epsilon(1e-12));
}

TEST_CASE("commuting diagram for degree-1 fields") {
  const Mesh m = build_mesh(4);
  const SystemMatrices sm = assemble(m);
  struct Case {
    std::function<Vec2(const Vec2&)> tau;
    double div;
  };
  const std::vector<Case> cases = {
      {[](const Vec2&) { return Vec2(1, 0); }, 0.0},
      {[](const Vec2& x) { return Vec2(x.y(), -x.x()); }, 0.0},
      {[](const Vec2& x) { return x; }, 2.0},
      {[](const Vec2& x) { return Vec2(3 * x.x() - x.y() + 1, 2 * x.y() + 5 * x.x()); }, 5.0},
  };
  for (const auto& c : cases) {
    const Rt0Field q = rt0_interpolate(m, c.tau);
    const Eigen::VectorXd div_int = sm.B * q.dof;
    for (int t = 0; t < m.num_triangles(); ++t)
      CHECK(std::abs(div_int[t] - c.div * m.area(t)) <= 1e-12);
  }
}

TEST_CASE("commuting diagram residual for a rotated transcendental gradient") {
  // tau = rotated grad(sin pi x sin pi y) is divergence free; the residual is
  // bounded by the edge-quadrature error only.
  const Mesh m = build_mesh(20);
  const SystemMatrices sm = assemble(m);
  auto tau = [](const Vec2& x) {
    const double pi = M_PI;
    return Vec2(-pi * std::sin(pi * x.x()) * std::cos(pi * x.y()),
                pi * std::cos(pi * x.x()) * std::sin(pi * x.y()));
  };
  const Rt0Field q = rt0_interpolate(m, tau);
  const Eigen::VectorXd div_int = sm.B * q.dof;
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(std::abs(div_int[t]) <= 1e-8);
}

TEST_CASE("RT0 interpolation matches high-order edge quadrature") {
  // The interpolation rule is exact to degree 5; on transcendental fields it
  // carries an O(h^7) error, ~1e-7 relative at this resolution.
  const Mesh m = build_mesh(5);
  auto tau = [](const Vec2& x) { return Vec2(std::exp(x.x()), std::sin(3 * x.y())); };
  const Rt0Field q = rt0_interpolate(m, tau);
  for (int e = 0; e < m.num_edges(); ++e) {
    const double expect = oracle::edge_flux(m.vertices[m.edges[e][0]],
                                            m.vertices[m.edges[e][1]], m.normal(e), tau);
    CHECK(q.dof[e] == doctest::Approx(expect).epsilon(1e-6));
  }
  // Exact for polynomials up to degree 5.
  auto poly = [](const Vec2& x) {
    return Vec2(std::pow(x.x(), 5) - 2 * x.y(), std::pow(x.y(), 4) * x.x());
  };
  const Rt0Field qp = rt0_interpolate(m, poly);
  for (int e = 0; e < m.num_edges(); ++e) {
    const double expect = oracle::edge_flux(m.vertices[m.edges[e][0]],
                                            m.vertices[m.edges[e][1]], m.normal(e), poly);
    CHECK(qp.dof[e] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("RT0 reproduces constants exactly") {
  const Mesh m = build_mesh(3);
  const Rt0Field q = rt0_interpolate(m, [](const Vec2&) { return Vec2(1.0, 0.0); });
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK((rt0_element_mean(m, q, t) - Vec2(1, 0)).norm() <= 1e-13);
    CHECK((rt0_value(m, q, t, m.vertices[m.tri(t)[0]]) - Vec2(1, 0)).norm() <= 1e-13);
  }
}

TEST_CASE("centroid evaluation against a locally reconstructed interpolant") {
  // Oracle: per element solve the three flux conditions for q = a + b x
  // directly (exact integrals of linear fields over segments).
  const Mesh m = build_mesh(1);
  auto tau = [](const Vec2& x) { return Vec2(x.x(), 0.0); };
  const Rt0Field q = rt0_interpolate(m, tau);
  for (int t = 0; t < m.num_triangles(); ++t) {
    Eigen::Matrix3d A;
    Eigen::Vector3d rhs;
    for (int k = 0; k < 3; ++k) {
      const int e = m.tri_edges[t][k].edge;
      const Vec2 pa = m.vertices[m.edges[e][0]], pb = m.vertices[m.edges[e][1]];
      const Vec2 n = m.normal(e);
      const Vec2 mid = 0.5 * (pa + pb);
      const double len = (pb - pa).norm();
      A(k, 0) = len * n.x();
      A(k, 1) = len * n.y();
      A(k, 2) = len * mid.dot(n);
      rhs[k] = oracle::edge_flux(pa, pb, n, tau);
    }
    const Eigen::Vector3d coef = A.fullPivLu().solve(rhs);
    const Vec2 expect(coef[0] + coef[2] * m.centroid(t).x(),
                      coef[1] + coef[2] * m.centroid(t).y());
    CHECK((rt0_element_mean(m, q, t) - expect).norm() <= 1e-12);
    // The element mean also equals the exact mean of the reconstruction.
    const double mx = oracle::integrate_triangle(
                          m.vertices[m.tri(t)[0]], m.vertices[m.tri(t)[1]],
                          m.vertices[m.tri(t)[2]],
                          [&](const Vec2& x) { return coef[0] + coef[2] * x.x(); }) /
                      m.area(t);
    CHECK(rt0_element_mean(m, q, t).x() == doctest::Approx(mx).epsilon(1e-11));
  }
}

TEST_CASE("P1 gradient of the coordinate interpolant is constant") {
  const Mesh m = build_mesh(4);
  // x1 is not zero on the whole boundary; use the raw nodal values instead.
  P1Field u = P1Field::zero(m);
  for (int v = 0; v < m.num_vertices(); ++v) u.values[v] = m.vertices[v].x();
  const P0VectorField g = p1_gradient(m, u);
  for (int t = 0; t < m.num_triangles(); ++t) CHECK((g.values.col(t) - Vec2(1, 0)).norm() <= 1e-13);
}

TEST_CASE("z inner product basics") {
  const Mesh m = build_mesh(3);
  ZPoint y = ZPoint::zero(m);
  CHECK(z_dist(m, y, y) == 0.0);
  y.r_p0.row(0).setConstant(1.0);  // y = ((1,0),(0,0))
  CHECK(z_norm_sq(m, y) == doctest::Approx(1.0).epsilon(1e-13));
  ZPoint z = ZPoint::zero(m);
  CHECK(z_dist(m, y, z) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("z distance between an RT0 field and its element means") {
  // Fluctuation of the interpolant of (x1, 0) around its element means,
  // verified against direct high-order integration of the evaluated field.
  const Mesh m = build_mesh(2);
  auto tau = [](const Vec2& x) { return Vec2(x.x(), 0.0); };
  ZPoint a = ZPoint::zero(m);
  a.r_rt0 = rt0_interpolate(m, tau).dof;
  ZPoint b = ZPoint::zero(m);
  b.r_p0 = element_means(m, a).topRows<2>();
  const double lib = z_dist(m, a, b);
  CHECK(lib > 0.0);
  const Rt0Field q{a.r_rt0};
  double expect_sq = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Vec2 mean = b.r_p0.col(t);
    expect_sq += oracle::integrate_triangle(
        m.vertices[m.tri(t)[0]], m.vertices[m.tri(t)[1]], m.vertices[m.tri(t)[2]],
        [&](const Vec2& x) { return (rt0_value(m, q, t, x) - mean).squaredNorm(); });
  }
  CHECK(lib == doctest::Approx(std::sqrt(expect_sq)).epsilon(1e-8));
}

TEST_CASE("z inner product is bilinear and symmetric") {
  const Mesh m = build_mesh(2);
  SplitMix64 rng(11);
  auto rand_z = [&](bool with_rt0) {
    ZPoint z = ZPoint::zero(m);
    for (int t = 0; t < m.num_triangles(); ++t)
      for (int c = 0; c < 2; ++c) {
        z.r_p0(c, t) = rng.next_in(-1, 1);
        z.w(c, t) = rng.next_in(-1, 1);
      }
    if (with_rt0)
      for (int e = 0; e < m.num_edges(); ++e) z.r_rt0[e] = rng.next_in(-1, 1);
    else
      z.r_rt0.resize(0);
    return z;
  };
  const ZPoint a = rand_z(true), b = rand_z(false), c = rand_z(true);
  CHECK(z_inner(m, a, b) == doctest::Approx(z_inner(m, b, a)).epsilon(1e-13));
  CHECK(z_inner(m, a + c, b) ==
        doctest::Approx(z_inner(m, a, b) + z_inner(m, c, b)).epsilon(1e-12));
  CHECK(z_norm_sq(m, a) > 0.0);
}

TEST_CASE("flat Gram matrix agrees with z_inner") {
  const Mesh m = build_mesh(2);
  const SpMat G = z_gram(m);
  SplitMix64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    ZPoint a = ZPoint::zero(m), b = ZPoint::zero(m);
    for (int t = 0; t < m.num_triangles(); ++t)
      for (int c = 0; c < 2; ++c) {
        a.r_p0(c, t) = rng.next_in(-2, 2);
        a.w(c, t) = rng.next_in(-2, 2);
        b.r_p0(c, t) = rng.next_in(-2, 2);
        b.w(c, t) = rng.next_in(-2, 2);
      }
    for (int e = 0; e < m.num_edges(); ++e) {
      a.r_rt0[e] = rng.next_in(-2, 2);
      b.r_rt0[e] = rng.next_in(-2, 2);
    }
    const double direct = z_inner(m, a, b);
    const double flat = z_flatten(m, a).dot(G * z_flatten(m, b));
    CHECK(flat == doctest::Approx(direct).epsilon(1e-12));
    const ZPoint back = z_unflatten(m, z_flatten(m, a));
    CHECK((back.r_p0 - a.r_p0).norm() == 0.0);
    CHECK((back.r_rt0 - a.r_rt0).norm() == 0.0);
    CHECK((back.w - a.w).norm() == 0.0);
  }
}
