#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace ddfem {

using Vec2 = Eigen::Vector2d;

/// Uniform right-triangle mesh of the unit square: an N x N grid of squares,
/// each split along the diagonal from its lower-left to its upper-right
/// corner. The diagonal direction is the same for every square so that two
/// builds with equal N are bit-identical.
///
/// Conventions baked into everything downstream:
///  - triangles are stored with counterclockwise vertex order,
///  - an edge is the vertex pair (lo, hi) with lo < hi, and its unit normal is
///    the 90-degree counterclockwise rotation of the direction lo -> hi,
///  - tri_edges gives, per triangle, the three global edge indices together
///    with the sign +1/-1 of (global edge normal) . (outward normal).
struct Mesh {
  int n = 0;            // squares per side
  double grid_h = 0.0;  // 1/n
  double h = 0.0;       // mesh size sqrt(2)/n (longest edge)

  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> edges;  // lo < hi

  struct TriEdge {
    int edge;
    double sign;  // +1 if the global edge normal points out of this triangle
  };
  std::vector<std::array<TriEdge, 3>> tri_edges;

  std::vector<bool> boundary_vertex;
  std::vector<double> tri_area;
  std::vector<Vec2> tri_centroid;
  std::vector<double> edge_length;
  std::vector<Vec2> edge_normal;
  std::vector<std::array<int, 2>> edge_tris;  // incident triangles, -1 if none

  // Compressed numbering of the interior (non-Dirichlet) vertices.
  std::vector<int> interior_index;  // -1 for boundary vertices
  int n_interior = 0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  const std::array<int, 3>& tri(int t) const { return triangles.at(t); }

  double area(int t) const { return tri_area.at(t); }
  const Vec2& centroid(int t) const { return tri_centroid.at(t); }
  double length(int e) const { return edge_length.at(e); }
  const Vec2& normal(int e) const { return edge_normal.at(e); }

  /// True if p lies in triangle t (barycentric test with tolerance).
  bool contains(int t, const Vec2& p) const {
    const auto& v = triangles[t];
    const Vec2 a = vertices[v[0]], b = vertices[v[1]], c = vertices[v[2]];
    const double d = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    const double l1 = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / d;
    const double l2 = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / d;
    return l1 >= -1e-12 && l2 >= -1e-12 && l1 + l2 <= 1.0 + 1e-12;
  }

  /// Index of the triangle containing p. Structured lookup via the grid cell.
  int locate(const Vec2& p) const {
    auto clampi = [this](double x) {
      int i = static_cast<int>(x * n);
      return i < 0 ? 0 : (i >= n ? n - 1 : i);
    };
    const int i = clampi(p.x()), j = clampi(p.y());
    // Lower triangle of cell (i,j) is below the diagonal y - j/n <= x - i/n.
    const int base = 2 * (j * n + i);
    const bool lower = (p.y() - static_cast<double>(j) / n) <= (p.x() - static_cast<double>(i) / n);
    return lower ? base : base + 1;
  }
};

inline Mesh build_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_mesh: n must be >= 1");

  Mesh m;
  m.n = n;
  m.grid_h = 1.0 / n;
  m.h = std::sqrt(2.0) / n;

  const int nv = (n + 1) * (n + 1);
  m.vertices.reserve(nv);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.vertices.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);

  auto vid = [n](int i, int j) { return j * (n + 1) + i; };

  m.triangles.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // Split along the lower-left -> upper-right diagonal; both ccw.
      m.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      m.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }

  // Global edge table, ordered by (lo, hi).
  std::map<std::array<int, 2>, int> edge_id;
  for (const auto& t : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      edge_id.emplace(key, 0);
    }
  }
  m.edges.reserve(edge_id.size());
  for (auto& [key, id] : edge_id) {
    id = static_cast<int>(m.edges.size());
    m.edges.push_back(key);
  }

  const double exact_area = 1.0 / (2.0 * n * n);
  m.tri_edges.resize(m.triangles.size());
  m.tri_area.assign(m.triangles.size(), exact_area);
  m.tri_centroid.resize(m.triangles.size());
  m.edge_tris.assign(m.edges.size(), {-1, -1});

  for (int t = 0; t < m.num_triangles(); ++t) {
    const auto& v = m.triangles[t];
    m.tri_centroid[t] = (m.vertices[v[0]] + m.vertices[v[1]] + m.vertices[v[2]]) / 3.0;
    for (int k = 0; k < 3; ++k) {
      int a = v[k], b = v[(k + 1) % 3];
      const int e = edge_id.at({std::min(a, b), std::max(a, b)});
      // A ccw triangle traverses the edge lo->hi iff a < b; in that case the
      // outward normal is the clockwise rotation, i.e. minus the global one.
      m.tri_edges[t][k] = {e, a < b ? -1.0 : 1.0};
      auto& inc = m.edge_tris[e];
      (inc[0] < 0 ? inc[0] : inc[1]) = t;
    }
  }

  m.edge_length.resize(m.edges.size());
  m.edge_normal.resize(m.edges.size());
  for (int e = 0; e < m.num_edges(); ++e) {
    const Vec2 d = m.vertices[m.edges[e][1]] - m.vertices[m.edges[e][0]];
    m.edge_length[e] = d.norm();
    m.edge_normal[e] = Vec2(-d.y(), d.x()) / m.edge_length[e];
  }

  m.boundary_vertex.assign(nv, false);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      if (i == 0 || i == n || j == 0 || j == n) m.boundary_vertex[vid(i, j)] = true;

  m.interior_index.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!m.boundary_vertex[v]) m.interior_index[v] = m.n_interior++;

  return m;
}

}  // namespace ddfem
