#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bivfit {

using Vec3 = Eigen::Vector3d;

/// Closest point on triangle (a, b, c) to p. Handles degenerate triangles.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Static 3-d tree for exact nearest-neighbour queries. Ties resolve to the
/// lowest point index, so results do not depend on the tree layout.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  struct Hit {
    int index = -1;
    double squared_distance = 0.0;
  };

  Hit nearest(const Vec3& query) const;
  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Bounding-volume hierarchy over triangles for exact closest-point queries.
class TriangleTree {
 public:
  TriangleTree(std::span<const Vec3> vertices, std::span<const std::array<int, 3>> faces);

  struct Hit {
    int face = -1;
    Vec3 point = Vec3::Zero();
    double squared_distance = 0.0;
  };

  Hit closest(const Vec3& query) const;

 private:
  struct Node {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<Vec3> centroids_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace bivfit
