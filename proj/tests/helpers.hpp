#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "bivfit/mesh.hpp"
#include "bivfit/volume.hpp"

namespace testing {

using bivfit::Face;
using bivfit::GridGeometry;
using bivfit::LabeledMesh;
using bivfit::Vec3;
using bivfit::VertexLabel;

inline LabeledMesh make_mesh(std::vector<Vec3> v, std::vector<Face> f,
                             VertexLabel label = VertexLabel::LvEndo) {
  LabeledMesh m;
  m.vertices = std::move(v);
  m.faces = std::move(f);
  m.labels.assign(m.vertices.size(), label);
  return m;
}

inline LabeledMesh single_triangle() {
  return make_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
}

// Regular tetrahedron with unit circumradius, outward faces.
inline LabeledMesh tetrahedron(double scale = 1.0) {
  const double s = scale / std::sqrt(3.0);
  return make_mesh({{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}},
                   {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

inline LabeledMesh icosahedron(double r = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p = p.normalized() * r;
  return make_mesh(v, {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}});
}

// Icosahedron refined `level` times with vertices projected onto the sphere.
inline LabeledMesh icosphere(int level, double r = 1.0, VertexLabel label = VertexLabel::LvEndo) {
  LabeledMesh m = icosahedron(r);
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    std::vector<Face> faces;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int id = static_cast<int>(m.vertices.size());
      m.vertices.push_back((0.5 * (m.vertices[a] + m.vertices[b])).normalized() * r);
      mid.emplace(key, id);
      return id;
    };
    for (const auto& f : m.faces) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  m.labels.assign(m.vertices.size(), label);
  return m;
}

// Closed axis-aligned box [lo, hi]^3, outward faces.
inline LabeledMesh cube(double lo, double hi) {
  std::vector<Vec3> v;
  for (int k = 0; k < 8; ++k) v.push_back({k & 1 ? hi : lo, k & 2 ? hi : lo, k & 4 ? hi : lo});
  return make_mesh(v, {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                       {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}});
}

// Regular hexagon fan around the origin in the z = 0 plane.
inline LabeledMesh hexagon() {
  std::vector<Vec3> v{{0, 0, 0}};
  for (int k = 0; k < 6; ++k)
    v.push_back({std::cos(k * M_PI / 3.0), std::sin(k * M_PI / 3.0), 0.0});
  std::vector<Face> f;
  for (int k = 0; k < 6; ++k) f.push_back({0, 1 + k, 1 + (k + 1) % 6});
  return make_mesh(v, f);
}

// n x n vertex grid in the plane z = z0 over [lo, hi]^2.
inline LabeledMesh plane_patch(int n, double lo, double hi, double z0) {
  std::vector<Vec3> v;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      v.push_back({lo + (hi - lo) * i / (n - 1), lo + (hi - lo) * j / (n - 1), z0});
  std::vector<Face> f;
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i, b = a + 1, c = a + n, d = c + 1;
      f.push_back({a, b, d});
      f.push_back({a, d, c});
    }
  return make_mesh(v, f);
}

inline GridGeometry cube_grid(int n, double spacing = 1.0) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.spacing = Vec3::Constant(spacing);
  return g;
}

inline bivfit::BinaryMask random_mask(const GridGeometry& g, std::uint64_t seed, double p) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  bivfit::BinaryMask m(g, 0);
  for (auto& v : m.values) v = coin(rng) ? 1 : 0;
  return m;
}

// All-pairs squared distance (mm^2) to the nearest voxel with value `site`.
inline std::vector<double> brute_squared_edt(const bivfit::BinaryMask& m, std::uint8_t site) {
  const auto& g = m.geometry;
  std::vector<Vec3> sites;
  for (std::size_t i = 0; i < m.size(); ++i)
    if ((m.values[i] != 0) == (site != 0)) {
      const auto c = g.coords(i);
      sites.push_back(g.spacing.cwiseProduct(Vec3(c[0], c[1], c[2])));
    }
  std::vector<double> out(m.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto c = g.coords(i);
    const Vec3 p = g.spacing.cwiseProduct(Vec3(c[0], c[1], c[2]));
    for (const Vec3& s : sites) out[i] = std::min(out[i], (p - s).squaredNorm());
  }
  return out;
}

// LV-labelled ball of NDC radius r on an n^3 unit grid.
inline bivfit::LabelVolume ball_volume(int n, double r) {
  const auto g = cube_grid(n);
  const auto ndc = bivfit::NdcMap::for_grid(g);
  bivfit::LabelVolume v(g, bivfit::TissueLabel::Background);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (ndc.voxel_ndc(x, y, z).norm() <= r) v.at(x, y, z) = bivfit::TissueLabel::LV;
  return v;
}

}  // namespace testing
