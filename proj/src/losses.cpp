#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "bivfit/gsn.hpp"
#include "bivfit/spatial.hpp"

namespace bivfit {
namespace {

constexpr double kCotClamp = 20.0;

int slot_of(const EdgeTable& t, int i, int j) {
  const auto nb = t.neighbors_of(i);
  const auto it = std::lower_bound(nb.begin(), nb.end(), j);
  return t.neighbor_offsets[i] + static_cast<int>(it - nb.begin());
}

}  // namespace

ChamferMatch chamfer_match(const LabeledMesh& mesh, const PointCloudSet& clouds) {
  ChamferMatch match;
  for (SurfaceTarget t : kAllTargets) {
    auto& g = match.groups[static_cast<int>(t)];
    const VertexLabel label = label_of(t);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
      if (mesh.labels[v] == label) g.vertices.push_back(static_cast<int>(v));
    const auto& points = clouds[t];
    if (g.vertices.empty() || points.empty()) {
      std::ostringstream msg;
      msg << "chamfer: skipping " << to_string(t) << " ("
          << (g.vertices.empty() ? "no vertices" : "no points") << ")";
      log_warning(msg.str());
      g.vertices.clear();
      continue;
    }
    std::vector<Vec3> group_pos;
    group_pos.reserve(g.vertices.size());
    for (int v : g.vertices) group_pos.push_back(mesh.vertices[v]);
    const KdTree point_tree(points);
    const KdTree vertex_tree(group_pos);
    g.vertex_to_point.reserve(group_pos.size());
    for (const Vec3& p : group_pos) g.vertex_to_point.push_back(point_tree.nearest(p).index);
    g.point_to_vertex.reserve(points.size());
    for (const Vec3& p : points) g.point_to_vertex.push_back(vertex_tree.nearest(p).index);
  }
  return match;
}

LossValue chamfer_loss(const LabeledMesh& mesh, const PointCloudSet& clouds,
                       const ChamferMatch& match) {
  LossValue out;
  out.grad.assign(mesh.vertices.size(), Vec3::Zero());
  for (SurfaceTarget t : kAllTargets) {
    const auto& g = match.groups[static_cast<int>(t)];
    if (g.vertices.empty()) continue;
    const auto& points = clouds[t];
    const double inv_v = 1.0 / double(g.vertices.size());
    const double inv_p = 1.0 / double(points.size());
    double sum_v = 0.0, sum_p = 0.0;
    for (std::size_t k = 0; k < g.vertices.size(); ++k) {
      const int v = g.vertices[k];
      const Vec3 d = mesh.vertices[v] - points[g.vertex_to_point[k]];
      sum_v += d.squaredNorm();
      out.grad[v] += (2.0 * inv_v) * d;
    }
    for (std::size_t q = 0; q < points.size(); ++q) {
      const int v = g.vertices[g.point_to_vertex[q]];
      const Vec3 d = mesh.vertices[v] - points[q];
      sum_p += d.squaredNorm();
      out.grad[v] += (2.0 * inv_p) * d;
    }
    out.value += sum_v * inv_v + sum_p * inv_p;
  }
  return out;
}

LossValue chamfer_loss(const LabeledMesh& mesh, const PointCloudSet& clouds) {
  return chamfer_loss(mesh, clouds, chamfer_match(mesh, clouds));
}

CotanWeights cotan_weights(const LabeledMesh& mesh) {
  CotanWeights out;
  out.edges = build_edges(mesh);
  const EdgeTable& t = out.edges;
  std::vector<double> cot_sum(t.edge_count(), 0.0);
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3& b = mesh.vertices[face[1]];
    const Vec3& c = mesh.vertices[face[2]];
    const double double_area = (b - a).cross(c - a).norm();
    if (!(double_area > 0.0)) {
      std::ostringstream msg;
      msg << "laplacian_loss: face " << f << " has zero area";
      throw Error(msg.str());
    }
    for (int k : face) area[k] += 0.5 * double_area;
    for (int s = 0; s < 3; ++s) {
      // Corner opposite edge (face[s], face[s+1]).
      const Vec3& p = mesh.vertices[face[(s + 2) % 3]];
      const Vec3 u = mesh.vertices[face[s]] - p;
      const Vec3 w = mesh.vertices[face[(s + 1) % 3]] - p;
      const double cot = std::clamp(u.dot(w) / u.cross(w).norm(), -kCotClamp, kCotClamp);
      cot_sum[t.face_edges[f][s]] += cot;
    }
  }
  out.weight.assign(t.neighbors.size(), 0.0);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    const int i = t.edges[e][0], j = t.edges[e][1];
    out.weight[slot_of(t, i, j)] = cot_sum[e] / (4.0 * area[i]);
    out.weight[slot_of(t, j, i)] = cot_sum[e] / (4.0 * area[j]);
  }
  return out;
}

LossValue laplacian_loss(const LabeledMesh& mesh, const CotanWeights& weights) {
  const EdgeTable& t = weights.edges;
  const auto n = mesh.vertices.size();
  LossValue out;
  out.grad.assign(n, Vec3::Zero());
  if (n == 0) return out;
  const double inv_n = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 lap = Vec3::Zero();
    for (int k = t.neighbor_offsets[i]; k < t.neighbor_offsets[i + 1]; ++k)
      lap += weights.weight[k] * (mesh.vertices[t.neighbors[k]] - mesh.vertices[i]);
    const double len = lap.norm();
    out.value += len;
    if (len == 0.0) continue;
    const Vec3 u = (inv_n / len) * lap;
    for (int k = t.neighbor_offsets[i]; k < t.neighbor_offsets[i + 1]; ++k) {
      out.grad[t.neighbors[k]] += weights.weight[k] * u;
      out.grad[i] -= weights.weight[k] * u;
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue laplacian_loss(const LabeledMesh& mesh) {
  return laplacian_loss(mesh, cotan_weights(mesh));
}

TotalLoss total_loss(std::span<const LabeledMesh> levels, const PointCloudSet& clouds,
                     const LossWeights& w, const FrozenState* frozen, FrozenState* capture) {
  if (levels.empty()) throw Error("total_loss: no mesh levels");
  if (frozen && (frozen->matches.size() != levels.size() || frozen->weights.size() != levels.size()))
    throw Error("total_loss: frozen state does not match the number of levels");
  if (capture) {
    capture->matches.clear();
    capture->weights.clear();
  }
  TotalLoss out;
  const double inv_levels = 1.0 / double(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const LabeledMesh& m = levels[l];
    ChamferMatch match = frozen ? frozen->matches[l] : chamfer_match(m, clouds);
    CotanWeights cw = frozen ? frozen->weights[l] : cotan_weights(m);
    const LossValue ch = chamfer_loss(m, clouds, match);
    const LossValue lap = laplacian_loss(m, cw);
    out.levels.push_back({ch.value, lap.value});
    out.value += (w.chamfer * ch.value + w.laplacian * lap.value) * inv_levels;
    std::vector<Vec3> g(m.vertices.size());
    for (std::size_t v = 0; v < g.size(); ++v)
      g[v] = (w.chamfer * ch.grad[v] + w.laplacian * lap.grad[v]) * inv_levels;
    out.grad.push_back(std::move(g));
    if (capture) {
      capture->matches.push_back(std::move(match));
      capture->weights.push_back(std::move(cw));
    }
  }
  return out;
}

}  // namespace bivfit
