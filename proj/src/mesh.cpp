#include "bivfit/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <tuple>

namespace bivfit {
namespace {

int label_priority(VertexLabel label) {
  switch (label) {
    case VertexLabel::Valve: return 4;
    case VertexLabel::LvEpi: return 3;
    case VertexLabel::RvEpi: return 2;
    case VertexLabel::LvEndo: return 1;
    case VertexLabel::RvEndo: return 0;
  }
  return -1;
}

int find_root(std::vector<int>& parent, int v) {
  while (parent[v] != v) {
    parent[v] = parent[parent[v]];
    v = parent[v];
  }
  return v;
}

}  // namespace

std::optional<SurfaceTarget> target_of(VertexLabel label) {
  switch (label) {
    case VertexLabel::LvEndo: return SurfaceTarget::LvEndo;
    case VertexLabel::RvEndo: return SurfaceTarget::RvEndo;
    case VertexLabel::LvEpi: return SurfaceTarget::LvEpi;
    case VertexLabel::RvEpi: return SurfaceTarget::RvEpi;
    case VertexLabel::Valve: return std::nullopt;
  }
  return std::nullopt;
}

VertexLabel label_of(SurfaceTarget target) {
  switch (target) {
    case SurfaceTarget::LvEndo: return VertexLabel::LvEndo;
    case SurfaceTarget::RvEndo: return VertexLabel::RvEndo;
    case SurfaceTarget::LvEpi: return VertexLabel::LvEpi;
    case SurfaceTarget::RvEpi: return VertexLabel::RvEpi;
  }
  return VertexLabel::Valve;
}

std::string_view to_string(VertexLabel label) {
  if (label == VertexLabel::Valve) return "valve";
  return to_string(*target_of(label));
}

void validate(const LabeledMesh& mesh, double bound) {
  const auto n = static_cast<int>(mesh.vertices.size());
  if (mesh.labels.size() != mesh.vertices.size())
    throw Error("mesh: label count does not match vertex count");
  std::vector<std::uint8_t> referenced(mesh.vertices.size(), 0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (int k : face) {
      if (k < 0 || k >= n) {
        std::ostringstream msg;
        msg << "mesh: face " << f << " references vertex " << k << " out of range";
        throw Error(msg.str());
      }
      referenced[k] = 1;
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      std::ostringstream msg;
      msg << "mesh: face " << f << " repeats a vertex index";
      throw Error(msg.str());
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!referenced[v]) {
      std::ostringstream msg;
      msg << "mesh: vertex " << v << " is not referenced by any face";
      throw Error(msg.str());
    }
    if (!mesh.vertices[v].allFinite() || mesh.vertices[v].cwiseAbs().maxCoeff() > bound) {
      std::ostringstream msg;
      msg << "mesh: vertex " << v << " lies outside [-" << bound << ", " << bound << "]^3";
      throw Error(msg.str());
    }
    if (static_cast<int>(mesh.labels[v]) >= kVertexLabelCount)
      throw Error("mesh: invalid vertex label");
  }
}

VertexLabel merge_labels(VertexLabel a, VertexLabel b) {
  if (a == b) return a;
  return label_priority(a) > label_priority(b) ? a : b;
}

EdgeTable build_edges(const LabeledMesh& mesh) {
  const auto nv = static_cast<int>(mesh.vertices.size());
  // (lo, hi, face, slot) records sorted so that equal edges are adjacent.
  std::vector<std::tuple<int, int, int, int>> records;
  records.reserve(mesh.faces.size() * 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (int s = 0; s < 3; ++s) {
      const int a = face[s], b = face[(s + 1) % 3];
      if (a < 0 || b < 0 || a >= nv || b >= nv) {
        std::ostringstream msg;
        msg << "build_edges: face " << f << " references an out-of-range vertex";
        throw Error(msg.str());
      }
      records.emplace_back(std::min(a, b), std::max(a, b), static_cast<int>(f), s);
    }
  }
  std::sort(records.begin(), records.end());

  EdgeTable t;
  t.face_edges.assign(mesh.faces.size(), {-1, -1, -1});
  t.face_offsets.push_back(0);
  for (std::size_t r = 0; r < records.size();) {
    const auto [lo, hi, f0, s0] = records[r];
    const int e = static_cast<int>(t.edges.size());
    t.edges.push_back({lo, hi});
    std::size_t q = r;
    while (q < records.size() && std::get<0>(records[q]) == lo && std::get<1>(records[q]) == hi) {
      t.face_ids.push_back(std::get<2>(records[q]));
      t.face_edges[std::get<2>(records[q])][std::get<3>(records[q])] = e;
      ++q;
    }
    t.face_offsets.push_back(static_cast<int>(t.face_ids.size()));
    r = q;
  }

  t.degree.assign(nv, 0);
  for (const auto& e : t.edges) {
    ++t.degree[e[0]];
    ++t.degree[e[1]];
  }
  t.neighbor_offsets.assign(nv + 1, 0);
  for (int v = 0; v < nv; ++v) t.neighbor_offsets[v + 1] = t.neighbor_offsets[v] + t.degree[v];
  t.neighbors.resize(t.neighbor_offsets[nv]);
  std::vector<int> fill(t.neighbor_offsets.begin(), t.neighbor_offsets.end() - 1);
  for (const auto& e : t.edges) {
    t.neighbors[fill[e[0]]++] = e[1];
    t.neighbors[fill[e[1]]++] = e[0];
  }
  for (int v = 0; v < nv; ++v)
    std::sort(t.neighbors.begin() + t.neighbor_offsets[v],
              t.neighbors.begin() + t.neighbor_offsets[v + 1]);
  return t;
}

std::vector<std::uint8_t> boundary_vertices(const EdgeTable& edges, std::size_t vertex_count) {
  std::vector<std::uint8_t> boundary(vertex_count, 0);
  for (std::size_t e = 0; e < edges.edge_count(); ++e) {
    if (edges.incident_face_count(e) == 1) {
      boundary[edges.edges[e][0]] = 1;
      boundary[edges.edges[e][1]] = 1;
    }
  }
  return boundary;
}

std::vector<int> component_ids(const LabeledMesh& mesh) {
  const auto n = static_cast<int>(mesh.vertices.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& f : mesh.faces) {
    for (int s = 1; s < 3; ++s) {
      const int a = find_root(parent, f[0]);
      const int b = find_root(parent, f[s]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<int> ids(n, -1), root_id(n, -1);
  int next = 0;
  for (int v = 0; v < n; ++v) {
    const int r = find_root(parent, v);
    if (root_id[r] < 0) root_id[r] = next++;
    ids[v] = root_id[r];
  }
  return ids;
}

int component_count(const LabeledMesh& mesh) {
  const auto ids = component_ids(mesh);
  return ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
}

Subdivision midpoint_subdivide(const LabeledMesh& mesh, int level) {
  const EdgeTable table = build_edges(mesh);
  for (std::size_t e = 0; e < table.edge_count(); ++e) {
    if (table.incident_face_count(e) > 2) {
      std::ostringstream msg;
      msg << "midpoint_subdivide: non-manifold edge (" << table.edges[e][0] << ", "
          << table.edges[e][1] << ") has " << table.incident_face_count(e) << " faces";
      throw Error(msg.str());
    }
  }
  const auto nv = static_cast<int>(mesh.vertices.size());
  Subdivision out;
  out.map.level = level;
  out.map.parents = table.edges;
  auto& m = out.mesh;
  m.vertices = mesh.vertices;
  m.labels = mesh.labels;
  m.vertices.reserve(nv + table.edge_count());
  m.labels.reserve(nv + table.edge_count());
  for (const auto& e : table.edges) {
    m.vertices.push_back(0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]]));
    m.labels.push_back(merge_labels(mesh.labels[e[0]], mesh.labels[e[1]]));
  }
  m.faces.reserve(mesh.faces.size() * 4);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [a, b, c] = mesh.faces[f];
    const int mab = nv + table.face_edges[f][0];
    const int mbc = nv + table.face_edges[f][1];
    const int mca = nv + table.face_edges[f][2];
    m.faces.push_back({a, mab, mca});
    m.faces.push_back({b, mbc, mab});
    m.faces.push_back({c, mca, mbc});
    m.faces.push_back({mab, mbc, mca});
  }
  return out;
}

LabeledMesh loop_subdivide(const LabeledMesh& mesh) {
  const EdgeTable table = build_edges(mesh);
  Subdivision sub = midpoint_subdivide(mesh);
  const auto boundary = boundary_vertices(table, mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (boundary[v]) continue;
    const int deg = table.degree[v];
    if (deg < 3) continue;
    const double alpha = deg == 3 ? 3.0 / 16.0 : 3.0 / (8.0 * deg);
    Vec3 sum = Vec3::Zero();
    for (int j : table.neighbors_of(v)) sum += mesh.vertices[j] - mesh.vertices[v];
    sub.mesh.vertices[v] = mesh.vertices[v] + alpha * sum;
  }
  return std::move(sub.mesh);
}

LabeledMesh laplacian_filter(const LabeledMesh& mesh, double lambda, int iterations) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error("laplacian_filter: lambda must lie in (0, 1)");
  if (iterations < 0) throw Error("laplacian_filter: iterations must be non-negative");
  LabeledMesh out = mesh;
  if (iterations == 0) return out;
  const EdgeTable table = build_edges(mesh);
  const auto boundary = boundary_vertices(table, mesh.vertices.size());
  std::vector<Vec3> next(out.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
      const auto nbrs = table.neighbors_of(v);
      if (boundary[v] || nbrs.empty()) {
        next[v] = out.vertices[v];
        continue;
      }
      Vec3 mean = Vec3::Zero();
      for (int j : nbrs) mean += out.vertices[j];
      mean /= double(nbrs.size());
      next[v] = out.vertices[v] + lambda * (mean - out.vertices[v]);
    }
    out.vertices.swap(next);
  }
  return out;
}

}  // namespace bivfit
