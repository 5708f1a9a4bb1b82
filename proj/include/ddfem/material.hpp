#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddfem/fields.hpp"
#include "ddfem/mesh.hpp"
#include "ddfem/rng.hpp"
#include "ddfem/spaces.hpp"

namespace ddfem {

using Vec4 = Eigen::Vector4d;

/// Exact nearest-neighbor index over points in R^4. Ties in distance are
/// broken toward the lowest point index, which keeps every query (and hence
/// every solver run) deterministic.
class KdTree4 {
 public:
  explicit KdTree4(const std::vector<Vec4>& pts) : pts_(&pts) {
    order_.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(pts.size());
    root_ = build(0, static_cast<int>(pts.size()), 0);
  }

  int nearest(const Vec4& x) const {
    Best b;
    search(root_, x, b);
    return b.idx;
  }

  /// Indices of the k nearest points, sorted by (distance, index).
  std::vector<int> nearest_k(const Vec4& x, int k) const {
    if (k <= 0) return {};
    k = std::min<int>(k, static_cast<int>(pts_->size()));
    std::vector<Cand> heap;  // max-heap on (d2, idx)
    heap.reserve(k + 1);
    search_k(root_, x, k, heap);
    std::sort(heap.begin(), heap.end(), CandLess{});
    std::vector<int> out(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].idx;
    return out;
  }

 private:
  struct Node {
    int point, axis, left, right;
  };
  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    int idx = -1;
  };
  struct Cand {
    double d2;
    int idx;
  };
  struct CandLess {
    bool operator()(const Cand& a, const Cand& b) const {
      return a.d2 != b.d2 ? a.d2 < b.d2 : a.idx < b.idx;
    }
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 4;
    const int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       const double ca = (*pts_)[a][axis], cb = (*pts_)[b][axis];
                       return ca != cb ? ca < cb : a < b;
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis, -1, -1});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(int node, const Vec4& x, Best& b) const {
    if (node < 0) return;
    const Node& nd = nodes_[node];
    const Vec4& p = (*pts_)[nd.point];
    const double d2 = (p - x).squaredNorm();
    if (d2 < b.d2 || (d2 == b.d2 && nd.point < b.idx)) b = {d2, nd.point};
    const double diff = x[nd.axis] - p[nd.axis];
    const int near = diff < 0 ? nd.left : nd.right;
    const int far = diff < 0 ? nd.right : nd.left;
    search(near, x, b);
    if (diff * diff <= b.d2) search(far, x, b);  // <= so equal-distance ties are found
  }

  void search_k(int node, const Vec4& x, int k, std::vector<Cand>& heap) const {
    if (node < 0) return;
    const Node& nd = nodes_[node];
    const Vec4& p = (*pts_)[nd.point];
    const Cand c{(p - x).squaredNorm(), nd.point};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), CandLess{});
    } else if (CandLess{}(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), CandLess{});
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), CandLess{});
    }
    const double diff = x[nd.axis] - p[nd.axis];
    const int near = diff < 0 ? nd.left : nd.right;
    const int far = diff < 0 ? nd.right : nd.left;
    search_k(near, x, k, heap);
    if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().d2)
      search_k(far, x, k, heap);
  }

  const std::vector<Vec4>* pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct DatasetMeta {
  std::string law = "unknown";
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// The measured material cloud: points (r1, r2, w1, w2) plus a spatial index
/// for elementwise nearest-neighbor projection.
class LocalDataSet {
 public:
  LocalDataSet(std::vector<Vec4> points, DatasetMeta meta)
      : points_(std::move(points)), meta_(std::move(meta)) {
    if (points_.empty()) throw std::invalid_argument("LocalDataSet: empty data set");
    tree_.emplace(points_);
  }

  int size() const { return static_cast<int>(points_.size()); }
  const Vec4& point(int i) const { return points_.at(i); }
  const std::vector<Vec4>& points() const { return points_; }
  const DatasetMeta& meta() const { return meta_; }

  int nearest(const Vec4& x) const { return tree_->nearest(x); }
  std::vector<int> nearest_k(const Vec4& x, int k) const { return tree_->nearest_k(x, k); }

 private:
  std::vector<Vec4> points_;
  DatasetMeta meta_;
  std::optional<KdTree4> tree_;
};

/// The nonlinear material law kappa(w) = (2 atan(|w|^2 - 1) + pi/2 + 2) w.
/// Strongly monotone; the scalar factor stays within (2 - pi/2, 2 + 3 pi/2).
inline Vec2 kappa_arctan(const Vec2& w) {
  return (2.0 * std::atan(w.squaredNorm() - 1.0) + 0.5 * std::numbers::pi + 2.0) * w;
}

inline Vec2 kappa_identity(const Vec2& w) { return w; }

/// Tensor grid of w over [-4,4]^2 with endpoints, r = kappa(w).
template <typename Kappa>
LocalDataSet generate_grid_dataset(int m_per_axis, Kappa&& kappa, std::string law) {
  if (m_per_axis < 2) throw std::invalid_argument("generate_grid_dataset: m_per_axis must be >= 2");
  std::vector<Vec4> pts;
  pts.reserve(static_cast<std::size_t>(m_per_axis) * m_per_axis);
  auto coord = [m_per_axis](int i) { return -4.0 + 8.0 * i / (m_per_axis - 1); };
  for (int j = 0; j < m_per_axis; ++j) {
    for (int i = 0; i < m_per_axis; ++i) {
      const Vec2 w(coord(i), coord(j));
      const Vec2 r = kappa(w);
      pts.emplace_back(r.x(), r.y(), w.x(), w.y());
    }
  }
  return LocalDataSet(std::move(pts), DatasetMeta{std::move(law), 0.0, 0});
}

inline LocalDataSet generate_fourier_grid(int m_per_axis) {
  return generate_grid_dataset(m_per_axis, kappa_identity, "fourier");
}

inline LocalDataSet generate_arctan_grid(int m_per_axis) {
  return generate_grid_dataset(m_per_axis, [](const Vec2& w) { return kappa_arctan(w); },
                               "arctan");
}

/// Random samples of the nonlinear law: w uniform on [-4,4]^2, r = kappa(w),
/// then independent uniform noise on [-noise,noise]^4 added to the whole
/// 4-vector. Per point the generator is consumed in the fixed order
/// w1, w2, n_r1, n_r2, n_w1, n_w2 (noise draws happen even for noise = 0), so
/// data sets with equal seeds share their w samples across noise levels.
inline LocalDataSet generate_arctan_samples(int m, double noise, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("generate_arctan_samples: m must be >= 1");
  if (noise < 0) throw std::invalid_argument("generate_arctan_samples: noise must be >= 0");
  SplitMix64 rng(seed);
  std::vector<Vec4> pts;
  pts.reserve(m);
  for (int i = 0; i < m; ++i) {
    const Vec2 w(rng.next_in(-4.0, 4.0), rng.next_in(-4.0, 4.0));
    const Vec2 r = kappa_arctan(w);
    Vec4 p(r.x(), r.y(), w.x(), w.y());
    for (int c = 0; c < 4; ++c) p[c] += noise * rng.next_in(-1.0, 1.0);
    pts.push_back(p);
  }
  return LocalDataSet(std::move(pts), DatasetMeta{"arctan", noise, seed});
}

/// Projection onto the data set: element means first, then per-element
/// nearest neighbor in R^4.
inline PhaseField project_data(const Mesh& m, const LocalDataSet& data, const ZPoint& z,
                               Assignment* assignment = nullptr) {
  const Eigen::Matrix4Xd means = element_means(m, z);
  PhaseField y = PhaseField::zero(m);
  if (assignment) assignment->idx.resize(m.num_triangles());
  for (int t = 0; t < m.num_triangles(); ++t) {
    const int j = data.nearest(means.col(t));
    y.r.values.col(t) = data.point(j).head<2>();
    y.w.values.col(t) = data.point(j).tail<2>();
    if (assignment) assignment->idx[t] = j;
  }
  return y;
}

/// The phase field induced by an assignment of data points to elements.
inline PhaseField phase_from_assignment(const Mesh& m, const LocalDataSet& data,
                                        const Assignment& a) {
  PhaseField y = PhaseField::zero(m);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Vec4& p = data.point(a.idx.at(t));
    y.r.values.col(t) = p.head<2>();
    y.w.values.col(t) = p.tail<2>();
  }
  return y;
}

inline void save_dataset(const LocalDataSet& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  char buf[256];
  out << "# ddfem dataset\n";
  out << "# law=" << data.meta().law << "\n";
  out << "# m=" << data.size() << "\n";
  std::snprintf(buf, sizeof buf, "# noise=%.17g\n", data.meta().noise);
  out << buf;
  out << "# seed=" << data.meta().seed << "\n";
  for (int i = 0; i < data.size(); ++i) {
    const Vec4& p = data.point(i);
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", p[0], p[1], p[2], p[3]);
    out << buf;
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for '" + path + "'");
}

inline LocalDataSet load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  std::vector<Vec4> pts;
  DatasetMeta meta;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.substr(1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(body.substr(0, eq)), val = trim(body.substr(eq + 1));
      if (key == "law") meta.law = val;
      if (key == "noise") meta.noise = std::stod(val);
      if (key == "seed") meta.seed = std::stoull(val);
      continue;
    }
    std::istringstream ss(line);
    Vec4 p;
    std::string extra;
    if (!(ss >> p[0] >> p[1] >> p[2] >> p[3]) || (ss >> extra))
      throw std::runtime_error("load_dataset: malformed record at " + path + ":" +
                               std::to_string(lineno) + " (expected 4 columns)");
    pts.push_back(p);
  }
  if (pts.empty()) throw std::runtime_error("load_dataset: empty data set in '" + path + "'");
  return LocalDataSet(std::move(pts), std::move(meta));
}

}  // namespace ddfem
