#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bivfit/volume.hpp"

namespace bivfit {

/// Per-vertex anatomical label of the bi-ventricular template.
enum class VertexLabel : std::uint8_t { LvEndo = 0, RvEndo = 1, LvEpi = 2, RvEpi = 3, Valve = 4 };

inline constexpr int kVertexLabelCount = 5;

using Face = std::array<int, 3>;

/// Triangle mesh in NDC with one anatomical label per vertex.
struct LabeledMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;  // counter-clockwise
  std::vector<VertexLabel> labels;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

/// Surface target a label deforms against; valve vertices have none.
std::optional<SurfaceTarget> target_of(VertexLabel label);
VertexLabel label_of(SurfaceTarget target);
std::string_view to_string(VertexLabel label);

/// Throws unless indices are in range, faces are non-degenerate, every vertex
/// is referenced, label count matches and coordinates lie inside [-bound, bound]^3.
void validate(const LabeledMesh& mesh, double bound = 1.5);

/// Label of a vertex inserted on edge (a, b): shared label if equal, otherwise
/// the higher priority of valve > LV-epi > RV-epi > LV-endo > RV-endo.
VertexLabel merge_labels(VertexLabel a, VertexLabel b);

/// Undirected edge connectivity of a triangle mesh.
struct EdgeTable {
  std::vector<std::array<int, 2>> edges;  // (i < j), lexicographically sorted
  std::vector<int> face_offsets;          // CSR: faces incident to edge e
  std::vector<int> face_ids;
  std::vector<std::array<int, 3>> face_edges;  // edges (a,b), (b,c), (c,a) of each face
  std::vector<int> degree;                     // number of distinct neighbours
  std::vector<int> neighbor_offsets;           // CSR: neighbours of vertex v, ascending
  std::vector<int> neighbors;

  std::size_t edge_count() const { return edges.size(); }
  int incident_face_count(std::size_t e) const { return face_offsets[e + 1] - face_offsets[e]; }
  std::span<const int> incident_faces(std::size_t e) const {
    return {face_ids.data() + face_offsets[e], face_ids.data() + face_offsets[e + 1]};
  }
  std::span<const int> neighbors_of(std::size_t v) const {
    return {neighbors.data() + neighbor_offsets[v], neighbors.data() + neighbor_offsets[v + 1]};
  }
};

EdgeTable build_edges(const LabeledMesh& mesh);

/// Vertices lying on an edge with exactly one incident face.
std::vector<std::uint8_t> boundary_vertices(const EdgeTable& edges, std::size_t vertex_count);

/// Connected component id per vertex (ids ordered by first vertex).
std::vector<int> component_ids(const LabeledMesh& mesh);
int component_count(const LabeledMesh& mesh);

/// Parent edge of every vertex appended by one subdivision step.
struct SubdivisionMap {
  std::vector<std::array<int, 2>> parents;
  int level = 1;
};

struct Subdivision {
  LabeledMesh mesh;
  SubdivisionMap map;
};

/// 1-to-4 split with new vertices at exact edge midpoints, appended after the
/// originals in edge-table order. Throws on edges with more than two faces.
Subdivision midpoint_subdivide(const LabeledMesh& mesh, int level = 1);

/// Midpoint topology with interior original vertices relaxed by the Loop
/// stencil v + alpha * sum(v_j - v), alpha = 3/16 (degree 3) or 3/(8 deg).
/// Boundary vertices stay fixed.
LabeledMesh loop_subdivide(const LabeledMesh& mesh);

/// Uniform umbrella smoothing v += lambda * (mean(neighbours) - v), applied
/// simultaneously to all interior vertices for the given number of passes.
LabeledMesh laplacian_filter(const LabeledMesh& mesh, double lambda = 0.13, int iterations = 1);

// ---------------------------------------------------------------------------
// Voxelization

/// Closed surface bounding the region of `target`: the connected component
/// holding the most vertices with that label, with open rims capped by a fan
/// over each rim's centroid. Empty when no vertex carries the label.
struct ClosedSurface {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
};
ClosedSurface region_surface(const LabeledMesh& mesh, SurfaceTarget target);

/// Foreground iff the voxel centre lies inside the closed surface, using z-column
/// ray parity with symbolically perturbed edge tests. Throws if more than 0.5%
/// of the columns the surface touches see an odd number of crossings.
BinaryMask voxelize_surface(std::span<const Vec3> vertices, std::span<const Face> faces,
                            const GridGeometry& grid, const NdcMap& ndc);

BinaryMask voxelize(const LabeledMesh& mesh, SurfaceTarget region, const GridGeometry& grid,
                    const NdcMap& ndc);

/// Tissue labels implied by the mesh regions: Myo inside either epicardium,
/// then RV cavity, then LV cavity painted on top.
LabelVolume mesh_to_labels(const LabeledMesh& mesh, const GridGeometry& grid, const NdcMap& ndc);

// ---------------------------------------------------------------------------
// I/O

/// Binary little-endian PLY with a `uchar anat_label` vertex property.
LabeledMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const LabeledMesh& mesh, const std::filesystem::path& path);

/// Wavefront OBJ plus `<stem>.labels` with one integer label per vertex.
void save_obj(const LabeledMesh& mesh, const std::filesystem::path& path);

}  // namespace bivfit
