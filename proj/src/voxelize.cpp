#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bivfit/mesh.hpp"

namespace bivfit {
namespace {

constexpr double kOnSurface = 1e-6;  // voxel units

struct Point2 {
  double x, y;
};

bool lex_less(const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

// Sign of the orientation of p against the directed edge a->b, with p
// perturbed by (eps, eps^2). The edge is canonicalised by endpoint order so
// two triangles sharing an edge evaluate bit-identical expressions.
int perturbed_side(Point2 a, Point2 b, const Point2& p) {
  int flip = 1;
  if (lex_less(b, a)) {
    std::swap(a, b);
    flip = -1;
  }
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double e = ex * (p.y - a.y) - ey * (p.x - a.x);
  int s = 0;
  if (e > 0.0) {
    s = 1;
  } else if (e < 0.0) {
    s = -1;
  } else if (ey != 0.0) {
    s = ey > 0.0 ? -1 : 1;
  } else if (ex != 0.0) {
    s = ex > 0.0 ? 1 : -1;
  }
  return flip * s;
}

// Boundary loops traced along directed half-edges that have no twin.
std::vector<std::vector<int>> boundary_loops(std::span<const Face> faces) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : faces)
    for (int s = 0; s < 3; ++s) ++directed[{f[s], f[(s + 1) % 3]}];
  std::multimap<int, int> next;
  for (const auto& [edge, count] : directed) {
    (void)count;
    if (!directed.contains({edge.second, edge.first})) next.emplace(edge.first, edge.second);
  }
  std::vector<std::vector<int>> loops;
  while (!next.empty()) {
    auto it = next.begin();
    const int start = it->first;
    std::vector<int> loop{start};
    int cur = it->second;
    next.erase(it);
    while (cur != start) {
      loop.push_back(cur);
      auto step = next.find(cur);
      if (step == next.end()) break;
      cur = step->second;
      next.erase(step);
    }
    if (loop.size() >= 3) loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace

ClosedSurface region_surface(const LabeledMesh& mesh, SurfaceTarget target) {
  const VertexLabel wanted = label_of(target);
  const auto ids = component_ids(mesh);
  const int ncomp = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
  std::vector<int> votes(ncomp, 0);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    if (mesh.labels[v] == wanted) ++votes[ids[v]];
  ClosedSurface out;
  if (ncomp == 0) return out;
  const int best = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  if (votes[best] == 0) return out;

  std::vector<int> remap(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (ids[v] != best) continue;
    remap[v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
  }
  for (const auto& f : mesh.faces)
    if (ids[f[0]] == best) out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});

  for (const auto& loop : boundary_loops(out.faces)) {
    Vec3 centre = Vec3::Zero();
    for (int v : loop) centre += out.vertices[v];
    centre /= double(loop.size());
    const int c = static_cast<int>(out.vertices.size());
    out.vertices.push_back(centre);
    for (std::size_t k = 0; k < loop.size(); ++k)
      out.faces.push_back({loop[(k + 1) % loop.size()], loop[k], c});
  }
  return out;
}

BinaryMask voxelize_surface(std::span<const Vec3> vertices, std::span<const Face> faces,
                            const GridGeometry& grid, const NdcMap& ndc) {
  BinaryMask mask(grid, 0);
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  std::vector<Vec3> idx(vertices.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) idx[v] = ndc.to_index(vertices[v]);

  std::vector<std::vector<double>> crossings(static_cast<std::size_t>(nx) * ny);
  for (const auto& f : faces) {
    const Vec3& a = idx[f[0]];
    const Vec3& b = idx[f[1]];
    const Vec3& c = idx[f[2]];
    const Point2 pa{a.x(), a.y()}, pb{b.x(), b.y()}, pc{c.x(), c.y()};
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int x1 = std::min(nx - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int y1 = std::min(ny - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    if (x0 > x1 || y0 > y1) continue;
    const double area2 = (pb.x - pa.x) * (pc.y - pa.y) - (pb.y - pa.y) * (pc.x - pa.x);
    const double zlo = std::min({a.z(), b.z(), c.z()});
    const double zhi = std::max({a.z(), b.z(), c.z()});
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point2 p{double(x), double(y)};
        const int s0 = perturbed_side(pa, pb, p);
        const int s1 = perturbed_side(pb, pc, p);
        const int s2 = perturbed_side(pc, pa, p);
        if (s0 == 0 || s0 != s1 || s1 != s2) continue;
        double z = 0.5 * (zlo + zhi);
        if (area2 != 0.0) {
          const double wa = ((pb.x - p.x) * (pc.y - p.y) - (pb.y - p.y) * (pc.x - p.x)) / area2;
          const double wb = ((pc.x - p.x) * (pa.y - p.y) - (pc.y - p.y) * (pa.x - p.x)) / area2;
          const double wc = 1.0 - wa - wb;
          z = std::clamp(wa * a.z() + wb * b.z() + wc * c.z(), zlo, zhi);
        }
        crossings[static_cast<std::size_t>(y) * nx + x].push_back(z);
      }
    }
  }

  std::size_t touched = 0, odd = 0;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      auto& zs = crossings[static_cast<std::size_t>(y) * nx + x];
      if (zs.empty()) continue;
      ++touched;
      if (zs.size() % 2 != 0) {
        ++odd;
        continue;
      }
      std::sort(zs.begin(), zs.end());
      // Centres on the surface (within kOnSurface) count as inside.
      for (std::size_t k = 0; k + 1 < zs.size(); k += 2) {
        const int z0 = std::max(0, static_cast<int>(std::ceil(zs[k] - kOnSurface)));
        const int z1 = std::min(nz - 1, static_cast<int>(std::floor(zs[k + 1] + kOnSurface)));
        for (int z = z0; z <= z1; ++z) mask.at(x, y, z) = 1;
      }
    }
  }
  if (touched > 0 && double(odd) > 0.005 * double(touched)) {
    std::ostringstream msg;
    msg << "voxelize: surface is not closed (" << odd << " of " << touched
        << " columns have odd crossing parity)";
    throw Error(msg.str());
  }
  return mask;
}

BinaryMask voxelize(const LabeledMesh& mesh, SurfaceTarget region, const GridGeometry& grid,
                    const NdcMap& ndc) {
  const ClosedSurface surface = region_surface(mesh, region);
  return voxelize_surface(surface.vertices, surface.faces, grid, ndc);
}

LabelVolume mesh_to_labels(const LabeledMesh& mesh, const GridGeometry& grid, const NdcMap& ndc) {
  LabelVolume out(grid, TissueLabel::Background);
  auto paint = [&](SurfaceTarget target, TissueLabel label) {
    const BinaryMask m = voxelize(mesh, target, grid, ndc);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.values[i]) out.values[i] = label;
  };
  paint(SurfaceTarget::LvEpi, TissueLabel::Myo);
  paint(SurfaceTarget::RvEpi, TissueLabel::Myo);
  paint(SurfaceTarget::RvEndo, TissueLabel::RV);
  paint(SurfaceTarget::LvEndo, TissueLabel::LV);
  return out;
}

}  // namespace bivfit
