#include "bivfit/spatial.hpp"

#include <algorithm>
#include <limits>

namespace bivfit {
namespace {

constexpr int kLeafSize = 8;

double box_squared_distance(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = q[a] < lo[a] ? lo[a] - q[a] : (q[a] > hi[a] ? q[a] - hi[a] : 0.0);
    d2 += d * d;
  }
  return d2;
}

}  // namespace

// Region tests follow the Voronoi-region walk from Ericson, Real-Time Collision Detection.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double denom = d1 - d3;
    return denom > 0.0 ? Vec3(a + (d1 / denom) * ab) : a;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double denom = d2 - d6;
    return denom > 0.0 ? Vec3(a + (d2 / denom) * ac) : a;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double denom = (d4 - d3) + (d5 - d6);
    return denom > 0.0 ? Vec3(b + ((d4 - d3) / denom) * (c - b)) : b;
  }

  const double sum = va + vb + vc;
  if (!(sum > 0.0)) {
    // Degenerate triangle: fall back to the closest point on its edges.
    auto on_segment = [&](const Vec3& s, const Vec3& t) {
      const Vec3 st = t - s;
      const double len2 = st.squaredNorm();
      const double u = len2 > 0.0 ? std::clamp((p - s).dot(st) / len2, 0.0, 1.0) : 0.0;
      return Vec3(s + u * st);
    };
    Vec3 best = on_segment(a, b);
    for (const Vec3& cand : {on_segment(b, c), on_segment(c, a)})
      if ((cand - p).squaredNorm() < (best - p).squaredNorm()) best = cand;
    return best;
  }
  const double v = vb / sum;
  const double w = vc / sum;
  return a + ab * v + ac * w;
}

// ---------------------------------------------------------------------------

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<int>(points_.size()));
  }
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  if (end - begin > kLeafSize) {
    Vec3 extent = node.hi - node.lo;
    extent.maxCoeff(&node.axis);
    const int mid = begin + (end - begin) / 2;
    const int axis = node.axis;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int l, int r) {
                       if (points_[l][axis] != points_[r][axis])
                         return points_[l][axis] < points_[r][axis];
                       return l < r;
                     });
    node.split = points_[order_[mid]][axis];
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[id] = node;
  return id;
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  Hit best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

void KdTree::search(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (box_squared_distance(q, node.lo, node.hi) > best.squared_distance) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
        best.squared_distance = d2;
        best.index = idx;
      }
    }
    return;
  }
  const bool go_left = q[node.axis] < node.split;
  search(go_left ? node.left : node.right, q, best);
  search(go_left ? node.right : node.left, q, best);
}

// ---------------------------------------------------------------------------

TriangleTree::TriangleTree(std::span<const Vec3> vertices,
                           std::span<const std::array<int, 3>> faces)
    : vertices_(vertices.begin(), vertices.end()), faces_(faces.begin(), faces.end()) {
  centroids_.reserve(faces_.size());
  for (const auto& f : faces_)
    centroids_.push_back((vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0);
  order_.resize(faces_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!faces_.empty()) {
    nodes_.reserve(2 * faces_.size() / 4 + 2);
    build(0, static_cast<int>(faces_.size()));
  }
}

int TriangleTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  Vec3 clo = node.lo, chi = node.hi;
  for (int i = begin; i < end; ++i) {
    for (int k : faces_[order_[i]]) {
      node.lo = node.lo.cwiseMin(vertices_[k]);
      node.hi = node.hi.cwiseMax(vertices_[k]);
    }
    clo = clo.cwiseMin(centroids_[order_[i]]);
    chi = chi.cwiseMax(centroids_[order_[i]]);
  }
  if (end - begin > 4) {
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int l, int r) {
                       if (centroids_[l][axis] != centroids_[r][axis])
                         return centroids_[l][axis] < centroids_[r][axis];
                       return l < r;
                     });
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[id] = node;
  return id;
}

TriangleTree::Hit TriangleTree::closest(const Vec3& query) const {
  Hit best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

void TriangleTree::search(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (box_squared_distance(q, node.lo, node.hi) > best.squared_distance) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const auto& f = faces_[order_[i]];
      const Vec3 c = closest_point_on_triangle(q, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
      const double d2 = (c - q).squaredNorm();
      if (d2 < best.squared_distance) {
        best.squared_distance = d2;
        best.face = order_[i];
        best.point = c;
      }
    }
    return;
  }
  const double dl = box_squared_distance(q, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_squared_distance(q, nodes_[node.right].lo, nodes_[node.right].hi);
  if (dl <= dr) {
    search(node.left, q, best);
    search(node.right, q, best);
  } else {
    search(node.right, q, best);
    search(node.left, q, best);
  }
}

}  // namespace bivfit
