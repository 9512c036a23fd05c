#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bivfit/gsn.hpp"

namespace bivfit {
namespace {

using Hidden = Eigen::Matrix<double, 16, Eigen::Dynamic>;
using Cols3 = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Everything one layer's backward pass needs.
struct LayerTape {
  Subdivision sub;
  EdgeTable edges;
  std::vector<int> source;   // vertex i of directed slot k = (i, neighbors[k])
  std::vector<double> norm;  // 1 / sqrt(deg_i deg_j) per slot
  Cols3 x;
  Hidden z1, a1, z2, a2;
  LabeledMesh out;
};

LayerTape run_layer(const LabeledMesh& mesh, const MlpParams& theta) {
  LayerTape t;
  t.sub = midpoint_subdivide(mesh);
  const LabeledMesh& m = t.sub.mesh;
  t.edges = build_edges(m);
  const auto nv = m.vertices.size();
  const auto slots = t.edges.neighbors.size();
  t.source.resize(slots);
  t.norm.resize(slots);
  t.x.resize(3, static_cast<Eigen::Index>(slots));
  for (std::size_t i = 0; i < nv; ++i) {
    for (int k = t.edges.neighbor_offsets[i]; k < t.edges.neighbor_offsets[i + 1]; ++k) {
      const int j = t.edges.neighbors[k];
      t.source[k] = static_cast<int>(i);
      t.norm[k] = 1.0 / std::sqrt(double(t.edges.degree[i]) * double(t.edges.degree[j]));
      t.x.col(k) = m.vertices[j] - m.vertices[i];
    }
  }
  t.z1 = (theta.w1 * t.x).colwise() + theta.b1;
  t.a1 = t.z1.cwiseMax(0.0);
  t.z2 = (theta.w2 * t.a1).colwise() + theta.b2;
  t.a2 = t.z2.cwiseMax(0.0);
  const Cols3 h = (theta.w3 * t.a2).colwise() + theta.b3;

  t.out = m;
  for (std::size_t i = 0; i < nv; ++i) {
    Vec3 delta = Vec3::Zero();
    for (int k = t.edges.neighbor_offsets[i]; k < t.edges.neighbor_offsets[i + 1]; ++k)
      delta += t.norm[k] * h.col(k);
    t.out.vertices[i] += delta;
  }
  return t;
}

void check_finite(std::span<const Vec3> values, const char* what, std::size_t layer) {
  for (std::size_t v = 0; v < values.size(); ++v) {
    if (!values[v].allFinite()) {
      std::ostringstream msg;
      msg << "gsn: non-finite " << what << " at layer " << layer + 1 << ", vertex " << v;
      throw Error(msg.str());
    }
  }
}

// Accumulates d loss / d theta into `grad` and returns d loss / d (layer input vertices).
std::vector<Vec3> backward_layer(const LayerTape& t, const MlpParams& theta,
                                 const std::vector<Vec3>& g_out, MlpParams& grad) {
  const auto slots = static_cast<Eigen::Index>(t.source.size());
  Cols3 dout(3, slots);
  for (Eigen::Index k = 0; k < slots; ++k) dout.col(k) = t.norm[k] * g_out[t.source[k]];

  grad.w3 += dout * t.a2.transpose();
  grad.b3 += dout.rowwise().sum();
  const Hidden dz2 = (theta.w3.transpose() * dout).cwiseProduct(
      (t.z2.array() > 0.0).cast<double>().matrix());
  grad.w2 += dz2 * t.a1.transpose();
  grad.b2 += dz2.rowwise().sum();
  const Hidden dz1 = (theta.w2.transpose() * dz2).cwiseProduct(
      (t.z1.array() > 0.0).cast<double>().matrix());
  grad.w1 += dz1 * t.x.transpose();
  grad.b1 += dz1.rowwise().sum();
  const Cols3 dx = theta.w1.transpose() * dz1;

  std::vector<Vec3> g_sub = g_out;
  for (Eigen::Index k = 0; k < slots; ++k) {
    g_sub[t.edges.neighbors[k]] += dx.col(k);
    g_sub[t.source[k]] -= dx.col(k);
  }

  const std::size_t n_prev = t.sub.mesh.vertices.size() - t.sub.map.parents.size();
  std::vector<Vec3> g_in(g_sub.begin(), g_sub.begin() + static_cast<std::ptrdiff_t>(n_prev));
  for (std::size_t e = 0; e < t.sub.map.parents.size(); ++e) {
    const Vec3 half = 0.5 * g_sub[n_prev + e];
    g_in[t.sub.map.parents[e][0]] += half;
    g_in[t.sub.map.parents[e][1]] += half;
  }
  return g_in;
}

}  // namespace

LabeledMesh gsn_layer(const LabeledMesh& mesh, const MlpParams& theta) {
  return run_layer(mesh, theta).out;
}

std::vector<LabeledMesh> gsn_forward(const LabeledMesh& mesh, const GsnStack& stack,
                                     std::size_t layers) {
  if (layers > GsnStack::kLayers) throw Error("gsn_forward: too many layers requested");
  std::vector<LabeledMesh> out;
  const LabeledMesh* prev = &mesh;
  for (std::size_t l = 0; l < layers; ++l) {
    out.push_back(gsn_layer(*prev, stack.layers[l]));
    check_finite(out.back().vertices, "vertex position", l);
    prev = &out.back();
  }
  return out;
}

std::vector<Vec3> extract_point_cloud(const LabelVolume& volume, SurfaceTarget target,
                                      const NdcMap& ndc, std::size_t max_points,
                                      std::uint64_t seed) {
  const BinaryMask mask = surface_mask(volume, target);
  const auto& g = mask.geometry;
  std::vector<std::size_t> boundary;
  static constexpr int kOffsets[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  bool any = false;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        any = true;
        for (const auto& o : kOffsets) {
          const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (!g.contains(nx, ny, nz) || !mask.at(nx, ny, nz)) {
            boundary.push_back(g.index(x, y, z));
            break;
          }
        }
      }
  if (!any) {
    std::ostringstream msg;
    msg << "extract_point_cloud: " << to_string(target) << " mask is empty";
    throw Error(msg.str());
  }
  if (max_points > 0 && boundary.size() > max_points) {
    std::vector<std::size_t> kept;
    kept.reserve(max_points);
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(target) + 1)));
    std::sample(boundary.begin(), boundary.end(), std::back_inserter(kept), max_points, rng);
    boundary.swap(kept);
  }
  std::vector<Vec3> points;
  points.reserve(boundary.size());
  for (std::size_t i : boundary) {
    const Index3 c = g.coords(i);
    points.push_back(ndc.voxel_ndc(c[0], c[1], c[2]));
  }
  return points;
}

PointCloudSet extract_point_clouds(const LabelVolume& volume, const NdcMap& ndc,
                                   std::size_t max_points, std::uint64_t seed) {
  PointCloudSet out;
  for (SurfaceTarget t : kAllTargets) out[t] = extract_point_cloud(volume, t, ndc, max_points, seed);
  return out;
}

Gradient backprop(const GsnStack& stack, const LabeledMesh& input, const PointCloudSet& clouds,
                  const LossWeights& w, const FrozenState* frozen, FrozenState* capture) {
  std::vector<LayerTape> tapes;
  std::vector<LabeledMesh> levels;
  const LabeledMesh* prev = &input;
  for (std::size_t l = 0; l < GsnStack::kLayers; ++l) {
    tapes.push_back(run_layer(*prev, stack.layers[l]));
    check_finite(tapes.back().out.vertices, "vertex position", l);
    levels.push_back(tapes.back().out);
    prev = &tapes.back().out;
  }

  TotalLoss loss = total_loss(levels, clouds, w, frozen, capture);
  Gradient out;
  out.loss = loss.value;
  out.levels = loss.levels;

  std::array<MlpParams, GsnStack::kLayers> grads;
  std::vector<Vec3> carried;
  for (std::size_t l = GsnStack::kLayers; l-- > 0;) {
    std::vector<Vec3> g = loss.grad[l];
    if (!carried.empty())
      for (std::size_t v = 0; v < g.size(); ++v) g[v] += carried[v];
    check_finite(g, "vertex gradient", l);
    carried = backward_layer(tapes[l], stack.layers[l], g, grads[l]);
  }
  out.params.resize(GsnStack::kSize);
  for (std::size_t l = 0; l < GsnStack::kLayers; ++l)
    grads[l].flatten(std::span<double>(out.params).subspan(l * MlpParams::kSize, MlpParams::kSize));
  return out;
}

}  // namespace bivfit
