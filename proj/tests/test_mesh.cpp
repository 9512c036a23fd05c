#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <Eigen/Geometry>

#include "bivfit/mesh.hpp"
#include "helpers.hpp"

using namespace bivfit;

namespace {

int euler(const LabeledMesh& m) {
  return int(m.vertex_count()) - int(build_edges(m).edge_count()) + int(m.face_count());
}

double enclosed_volume(const LabeledMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces)
    v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]])) / 6.0;
  return v;
}

LabeledMesh two_components(double r_inner, double r_outer) {
  LabeledMesh a = testing::icosphere(2, r_inner, VertexLabel::LvEndo);
  const LabeledMesh b = testing::icosphere(2, r_outer, VertexLabel::LvEpi);
  const int off = int(a.vertices.size());
  a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
  a.labels.insert(a.labels.end(), b.labels.begin(), b.labels.end());
  for (auto f : b.faces) a.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
  return a;
}

}  // namespace

TEST_CASE("edge table of closed meshes") {
  const auto ico = testing::icosahedron();
  const auto t = build_edges(ico);
  CHECK(t.edge_count() == 30);
  CHECK(euler(ico) == 2);
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    CHECK(t.edges[e][0] < t.edges[e][1]);
    CHECK(t.incident_face_count(e) == 2);
  }
  for (int d : t.degree) CHECK(d == 5);
  const auto b = boundary_vertices(t, ico.vertex_count());
  CHECK(std::count(b.begin(), b.end(), 1) == 0);

  const auto tet = testing::tetrahedron();
  CHECK(build_edges(tet).edge_count() == 6);
  CHECK(euler(tet) == 2);
}

TEST_CASE("boundary and components of open meshes") {
  const auto hex = testing::hexagon();
  const auto t = build_edges(hex);
  CHECK(t.edge_count() == 12);
  const auto b = boundary_vertices(t, hex.vertex_count());
  CHECK(b[0] == 0);
  for (int k = 1; k <= 6; ++k) CHECK(b[k] == 1);
  CHECK(euler(hex) == 1);
  CHECK(component_count(hex) == 1);
  const auto two = two_components(0.3, 0.6);
  CHECK(component_count(two) == 2);
  const auto ids = component_ids(two);
  CHECK(ids.front() == 0);
  CHECK(ids.back() == 1);
}

TEST_CASE("merge_labels priority") {
  using L = VertexLabel;
  CHECK(merge_labels(L::RvEndo, L::RvEndo) == L::RvEndo);
  CHECK(merge_labels(L::LvEndo, L::RvEndo) == L::LvEndo);
  CHECK(merge_labels(L::RvEndo, L::RvEpi) == L::RvEpi);
  CHECK(merge_labels(L::RvEpi, L::LvEpi) == L::LvEpi);
  CHECK(merge_labels(L::LvEpi, L::Valve) == L::Valve);
  CHECK(merge_labels(L::Valve, L::LvEndo) == L::Valve);
  for (int a = 0; a < kVertexLabelCount; ++a)
    for (int b = 0; b < kVertexLabelCount; ++b)
      CHECK(merge_labels(L(a), L(b)) == merge_labels(L(b), L(a)));
}

TEST_CASE("target_of and label_of are inverse") {
  for (SurfaceTarget t : kAllTargets) CHECK(target_of(label_of(t)) == t);
  CHECK_FALSE(target_of(VertexLabel::Valve).has_value());
}

TEST_CASE("validate catches malformed meshes") {
  CHECK_NOTHROW(validate(testing::tetrahedron()));
  auto m = testing::tetrahedron();
  m.faces[0][1] = 9;
  CHECK_THROWS_AS(validate(m), Error);
  m = testing::tetrahedron();
  m.faces[0] = {0, 0, 1};
  CHECK_THROWS_AS(validate(m), Error);
  m = testing::tetrahedron();
  m.vertices.push_back(Vec3::Zero());
  m.labels.push_back(VertexLabel::LvEndo);
  CHECK_THROWS_AS(validate(m), Error);
  m = testing::tetrahedron();
  m.vertices[2].x() = 2.0;
  CHECK_THROWS_AS(validate(m), Error);
  m = testing::tetrahedron();
  m.labels.pop_back();
  CHECK_THROWS_AS(validate(m), Error);
}

TEST_CASE("midpoint subdivision") {
  auto tet = testing::tetrahedron();
  tet.labels = {VertexLabel::LvEndo, VertexLabel::Valve, VertexLabel::RvEpi, VertexLabel::LvEpi};
  const auto sub = midpoint_subdivide(tet);
  const auto& m = sub.mesh;
  CHECK(m.vertex_count() == 10);
  CHECK(m.face_count() == 16);
  CHECK(euler(m) == 2);
  REQUIRE(sub.map.parents.size() == 6);
  const auto t = build_edges(tet);
  for (std::size_t k = 0; k < 6; ++k) {
    const auto [a, b] = sub.map.parents[k];
    CHECK(t.edges[k] == std::array<int, 2>{a, b});
    CHECK(m.vertices[4 + k] == 0.5 * (tet.vertices[a] + tet.vertices[b]));
    CHECK(m.labels[4 + k] == merge_labels(tet.labels[a], tet.labels[b]));
  }
  for (int v = 0; v < 4; ++v) {
    CHECK(m.vertices[v] == tet.vertices[v]);
    CHECK(m.labels[v] == tet.labels[v]);
  }
  // Face orientation carries over: the enclosed volume stays positive.
  CHECK(enclosed_volume(m) == doctest::Approx(enclosed_volume(tet)));

  const auto twice = midpoint_subdivide(m, 2);
  CHECK(twice.mesh.vertex_count() == 34);
  CHECK(twice.mesh.face_count() == 64);
  CHECK(twice.map.level == 2);

  auto triple = testing::single_triangle();
  triple.vertices.push_back({0, 0, 1});
  triple.vertices.push_back({0, -1, 0});
  triple.labels.resize(5, VertexLabel::LvEndo);
  triple.faces.push_back({0, 1, 3});
  triple.faces.push_back({1, 0, 4});
  CHECK_THROWS_AS(midpoint_subdivide(triple), Error);
}

TEST_CASE("loop subdivision stencil") {
  SUBCASE("degree-3 vertices of a centred tetrahedron shrink to a quarter") {
    const auto tet = testing::tetrahedron();
    const auto m = loop_subdivide(tet);
    CHECK(m.face_count() == 16);
    for (int v = 0; v < 4; ++v) CHECK((m.vertices[v] - 0.25 * tet.vertices[v]).norm() < 1e-12);
    for (int v = 4; v < 10; ++v) CHECK((m.vertices[v] - midpoint_subdivide(tet).mesh.vertices[v]).norm() == 0.0);
  }
  SUBCASE("degree-6 interior vertex with fixed boundary") {
    auto hex = testing::hexagon();
    hex.vertices[0] = Vec3(0.0, 0.0, 0.4);
    const auto m = loop_subdivide(hex);
    CHECK(m.vertices[0].z() == doctest::Approx(0.4 - 6.0 * 0.4 * 3.0 / 48.0));
    for (int v = 1; v <= 6; ++v) CHECK(m.vertices[v] == hex.vertices[v]);
  }
}

TEST_CASE("laplacian filter") {
  auto hex = testing::hexagon();
  CHECK(laplacian_filter(hex, 0.13, 5).vertices[0].norm() < 1e-15);
  CHECK(laplacian_filter(hex, 0.5, 0).vertices == hex.vertices);
  hex.vertices[0] = Vec3(0.2, -0.1, 0.5);
  const auto one = laplacian_filter(hex, 0.25, 1);
  CHECK((one.vertices[0] - 0.75 * hex.vertices[0]).norm() < 1e-12);
  const auto many = laplacian_filter(hex, 0.5, 60);
  CHECK(many.vertices[0].norm() < 1e-12);
  CHECK_THROWS_AS(laplacian_filter(hex, 1.0, 1), Error);
  CHECK_THROWS_AS(laplacian_filter(hex, 0.1, -1), Error);
}

TEST_CASE("voxelize a box exactly") {
  const auto grid = testing::cube_grid(33);
  const auto ndc = NdcMap::for_grid(grid);
  const auto box = testing::cube(-0.47, 0.47);
  const auto mask = voxelize(box, SurfaceTarget::LvEndo, grid, ndc);
  CHECK(count_foreground(mask) == 15 * 15 * 15);
  for (int z = 0; z < 33; ++z)
    for (int y = 0; y < 33; ++y)
      for (int x = 0; x < 33; ++x) {
        const Vec3 p = ndc.voxel_ndc(x, y, z);
        CHECK(bool(mask.at(x, y, z)) == (p.cwiseAbs().maxCoeff() < 0.47));
      }

  SUBCASE("open top is capped") {
    auto open = box;
    open.faces.erase(open.faces.begin() + 2, open.faces.begin() + 4);
    CHECK(count_foreground(voxelize(open, SurfaceTarget::LvEndo, grid, ndc)) == 15 * 15 * 15);
  }
  SUBCASE("outside the grid or absent label gives nothing") {
    auto far = testing::cube(1.5, 2.5);
    CHECK(count_foreground(voxelize(far, SurfaceTarget::LvEndo, grid, ndc)) == 0);
    CHECK(count_foreground(voxelize(box, SurfaceTarget::RvEndo, grid, ndc)) == 0);
    CHECK(region_surface(box, SurfaceTarget::RvEpi).faces.empty());
  }
}

TEST_CASE("voxelized sphere volume matches the polyhedron") {
  const auto grid = testing::cube_grid(64);
  const auto ndc = NdcMap::for_grid(grid);
  const auto sphere = testing::icosphere(3, 0.6);
  const auto mask = voxelize(sphere, SurfaceTarget::LvEndo, grid, ndc);
  const double voxel = std::pow(ndc.voxel_size(), 3);
  const double measured = double(count_foreground(mask)) * voxel;
  CHECK(measured == doctest::Approx(enclosed_volume(sphere)).epsilon(0.02));
}

TEST_CASE("mesh_to_labels paints nested regions") {
  const auto grid = testing::cube_grid(40);
  const auto ndc = NdcMap::for_grid(grid);
  const auto mesh = two_components(0.3, 0.6);
  const auto labels = mesh_to_labels(mesh, grid, ndc);
  int checked = 0;
  for (int z = 0; z < 40; ++z)
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) {
        const double r = ndc.voxel_ndc(x, y, z).norm();
        TissueLabel expected = TissueLabel::Background;
        if (r < 0.25) expected = TissueLabel::LV;
        else if (r > 0.31 && r < 0.5) expected = TissueLabel::Myo;
        else if (r < 0.62) continue;  // near a faceted surface
        CHECK(labels.at(x, y, z) == expected);
        ++checked;
      }
  CHECK(checked > 1000);
}

TEST_CASE("PLY round trip and errors") {
  const auto dir = std::filesystem::temp_directory_path() / "bivfit_test_ply";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto tet = testing::tetrahedron(0.5);
  for (auto& v : tet.vertices) v = v.cast<float>().cast<double>();
  tet.labels = {VertexLabel::Valve, VertexLabel::RvEndo, VertexLabel::LvEpi, VertexLabel::RvEpi};
  save_mesh(tet, dir / "tet.ply");
  const auto back = load_mesh(dir / "tet.ply");
  CHECK(back.vertices == tet.vertices);
  CHECK(back.faces == tet.faces);
  CHECK(back.labels == tet.labels);

  auto write = [&](const std::string& name, const std::string& header, auto body) {
    std::ofstream out(dir / name, std::ios::binary);
    out << header;
    body(out);
    return dir / name;
  };
  auto put_f = [](std::ofstream& o, float f) { o.write(reinterpret_cast<char*>(&f), 4); };
  auto put_u = [](std::ofstream& o, std::uint32_t u) { o.write(reinterpret_cast<char*>(&u), 4); };
  const auto nolabel = write("nolabel.ply",
                             "ply\nformat binary_little_endian 1.0\nelement vertex 3\n"
                             "property float x\nproperty float y\nproperty float z\n"
                             "element face 1\nproperty list uchar uint vertex_indices\nend_header\n",
                             [&](std::ofstream& o) {
                               for (int k = 0; k < 9; ++k) put_f(o, k == 3 || k == 7 ? 0.5f : 0.0f);
                               o.put(3);
                               for (std::uint32_t k = 0; k < 3; ++k) put_u(o, k);
                             });
  CHECK_THROWS_WITH_AS(load_mesh(nolabel), doctest::Contains("anat_label"), Error);
  const auto quad = write("quad.ply",
                          "ply\nformat binary_little_endian 1.0\nelement vertex 4\n"
                          "property float x\nproperty float y\nproperty float z\n"
                          "property uchar anat_label\n"
                          "element face 1\nproperty list uchar uint vertex_indices\nend_header\n",
                          [&](std::ofstream& o) {
                            const float xy[4][2] = {{0, 0}, {0.5f, 0}, {0.5f, 0.5f}, {0, 0.5f}};
                            for (auto& p : xy) {
                              put_f(o, p[0]);
                              put_f(o, p[1]);
                              put_f(o, 0.0f);
                              o.put(0);
                            }
                            o.put(4);
                            for (std::uint32_t k = 0; k < 4; ++k) put_u(o, k);
                          });
  CHECK_THROWS_WITH_AS(load_mesh(quad), doctest::Contains("only triangles"), Error);
  const auto ascii = write("ascii.ply", "ply\nformat ascii 1.0\nend_header\n", [](std::ofstream&) {});
  CHECK_THROWS_AS(load_mesh(ascii), Error);
  CHECK_THROWS_AS(load_mesh(dir / "missing.ply"), Error);

  save_obj(tet, dir / "tet.obj");
  std::ifstream labels(dir / "tet.labels");
  int first = -1;
  labels >> first;
  CHECK(first == int(VertexLabel::Valve));
}
