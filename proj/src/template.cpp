#include <cmath>
#include <cstdint>
#include <numbers>

#include "bivfit/phantom.hpp"

namespace bivfit {
namespace {

struct Cup {
  std::vector<Vec3> points;  // apex first, then rings bottom to top
  int segments = 0;
  int rings = 0;
};

// Rings of constant polar angle on an ellipsoid, from the apex up to the base plane.
Cup ellipsoid_cup(const Ellipsoid& e, const AnalyticSurfaces& s, int segments, int rings) {
  const Vec3 base_local = e.rotation.transpose() * (s.base_point - e.center);
  const double cos_top = std::clamp(-base_local.z() / e.axes.z(), -1.0, 1.0);
  const double theta_top = std::acos(cos_top);
  Cup cup;
  cup.segments = segments;
  cup.rings = rings;
  auto to_world = [&](const Vec3& local) { return Vec3(e.center + e.rotation * local); };
  cup.points.push_back(to_world(Vec3(0.0, 0.0, -e.axes.z())));
  for (int k = 1; k <= rings; ++k) {
    const double theta = theta_top * double(k) / double(rings);
    for (int j = 0; j < segments; ++j) {
      const double phi = 2.0 * std::numbers::pi * double(j) / double(segments);
      cup.points.push_back(to_world(Vec3(e.axes.x() * std::sin(theta) * std::cos(phi),
                                         e.axes.y() * std::sin(theta) * std::sin(phi),
                                         -e.axes.z() * std::cos(theta))));
    }
  }
  return cup;
}

// Radial projection (about the LV axis, keeping height) onto the LV epicardium.
bool project_onto(Vec3& p, const Ellipsoid& lv_epi) {
  const Vec3 q = lv_epi.rotation.transpose() * (p - lv_epi.center);
  const double t = 1.0 - (q.z() / lv_epi.axes.z()) * (q.z() / lv_epi.axes.z());
  const double r2 = (q.x() / lv_epi.axes.x()) * (q.x() / lv_epi.axes.x()) +
                    (q.y() / lv_epi.axes.y()) * (q.y() / lv_epi.axes.y());
  if (t <= 0.0 || r2 <= 0.0) return false;
  const double f = std::sqrt(t / r2);
  p = lv_epi.center + lv_epi.rotation * Vec3(q.x() * f, q.y() * f, q.z());
  return true;
}

bool push_out_of_lv(Vec3& p, const Ellipsoid& lv_epi) {
  return lv_epi.contains(p) && project_onto(p, lv_epi);
}

// The radial push bunches septal vertices into slivers; spread them out again
// with umbrella steps projected back onto the LV epicardium.
void relax_septum(LabeledMesh& mesh, const std::vector<std::uint8_t>& pushed,
                  const Ellipsoid& lv_epi, int iterations = 50) {
  const EdgeTable t = build_edges(mesh);
  for (int it = 0; it < iterations; ++it) {
    std::vector<Vec3> next = mesh.vertices;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      if (!pushed[i]) continue;
      // Rim vertices only slide along the rim.
      const bool rim = mesh.labels[i] == VertexLabel::Valve;
      Vec3 mean = Vec3::Zero();
      int count = 0;
      for (int j : t.neighbors_of(static_cast<int>(i))) {
        if (rim && mesh.labels[j] != VertexLabel::Valve) continue;
        mean += mesh.vertices[j];
        ++count;
      }
      Vec3 p = mean / double(count);
      if (project_onto(p, lv_epi)) next[i] = p;
    }
    mesh.vertices.swap(next);
  }
}

}  // namespace

LabeledMesh procedural_template(const TemplateOptions& opts) {
  if (opts.level < 0) throw Error("procedural_template: level must be non-negative");
  if (opts.segments < 3 || opts.rings < 2)
    throw Error("procedural_template: need at least 3 segments and 2 rings");
  const int segments = opts.segments << opts.level;
  const int rings = opts.rings << opts.level;

  const PhantomSpec spec;
  const AnalyticSurfaces s = phantom_surfaces(spec);
  GridGeometry grid;
  grid.dims = spec.dims;
  grid.spacing = Vec3::Constant(spec.spacing);
  const NdcMap ndc = NdcMap::for_grid(grid);

  struct Part {
    const Ellipsoid* surface;
    VertexLabel label;
    bool rv;
  };
  const std::array<Part, 4> parts = {{{&s.lv_endo, VertexLabel::LvEndo, false},
                                      {&s.lv_epi, VertexLabel::LvEpi, false},
                                      {&s.rv_endo, VertexLabel::RvEndo, true},
                                      {&s.rv_epi, VertexLabel::RvEpi, true}}};
  LabeledMesh mesh;
  std::vector<std::uint8_t> pushed;
  for (const Part& part : parts) {
    Cup cup = ellipsoid_cup(*part.surface, s, segments, rings);
    const int base = static_cast<int>(mesh.vertices.size());
    for (std::size_t i = 0; i < cup.points.size(); ++i) {
      Vec3 p = cup.points[i];
      const bool top = i >= cup.points.size() - static_cast<std::size_t>(segments);
      VertexLabel label = top ? VertexLabel::Valve : part.label;
      const bool moved = part.rv && push_out_of_lv(p, s.lv_epi);
      if (moved && part.label == VertexLabel::RvEpi && !top) label = VertexLabel::LvEpi;
      mesh.vertices.push_back(p);
      mesh.labels.push_back(label);
      pushed.push_back(moved ? 1 : 0);
    }
    auto ring = [&](int k, int j) { return base + 1 + (k - 1) * segments + (j % segments); };
    for (int j = 0; j < segments; ++j) mesh.faces.push_back({base, ring(1, j + 1), ring(1, j)});
    for (int k = 1; k < rings; ++k) {
      for (int j = 0; j < segments; ++j) {
        mesh.faces.push_back({ring(k, j), ring(k, j + 1), ring(k + 1, j + 1)});
        mesh.faces.push_back({ring(k, j), ring(k + 1, j + 1), ring(k + 1, j)});
      }
    }
  }
  relax_septum(mesh, pushed, s.lv_epi);
  for (Vec3& p : mesh.vertices) p = ndc.to_ndc((p - grid.origin).cwiseQuotient(grid.spacing));
  validate(mesh);
  return mesh;
}

}  // namespace bivfit
