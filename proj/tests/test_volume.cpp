#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bivfit/volume.hpp"
#include "helpers.hpp"

using namespace bivfit;
using testing::cube_grid;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bivfit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("squared_edt matches brute force on random masks") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = testing::random_mask(cube_grid(9), seed, 0.1);
    for (std::uint8_t site : {std::uint8_t(0), std::uint8_t(1)}) {
      const auto fast = squared_edt(m, site);
      const auto slow = testing::brute_squared_edt(m, site);
      REQUIRE(fast.size() == slow.size());
      for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
    }
  }
}

TEST_CASE("squared_edt honours anisotropic spacing") {
  GridGeometry g;
  g.dims = {7, 6, 5};
  g.spacing = Vec3(0.5, 1.25, 2.0);
  const auto m = testing::random_mask(g, 11, 0.05);
  const auto fast = squared_edt(m, 1);
  const auto slow = testing::brute_squared_edt(m, 1);
  for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]));
}

TEST_CASE("edt of a single voxel") {
  BinaryMask m(cube_grid(5), 0);
  m.at(2, 2, 2) = 1;
  const auto d = edt(m);
  CHECK(d.at(2, 2, 2) == 1.0);
  CHECK(d.at(3, 2, 2) == 1.0);
  CHECK(d.at(3, 3, 3) == doctest::Approx(std::sqrt(3.0)));
  CHECK(d.at(0, 0, 0) == doctest::Approx(std::sqrt(12.0)));
}

TEST_CASE("edt of a degenerate mask uses the grid diagonal") {
  reset_warning_count();
  BinaryMask m(cube_grid(4), 0);
  CHECK(is_degenerate(m));
  const auto d = edt(m);
  CHECK(d.at(1, 1, 1) == doctest::Approx(std::sqrt(27.0)));
  CHECK(warning_count() == 1);
}

TEST_CASE("surface_distance is one voxel below edt and never negative") {
  BinaryMask m(cube_grid(6, 2.0), 0);
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) m.at(x, y, z) = 1;
  const auto e = edt(m);
  const auto s = surface_distance(m);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(s.values[i] >= 0.0);
    CHECK(s.values[i] == doctest::Approx(std::max(e.values[i] - 2.0, 0.0)));
  }
  // The interface lies between z=2 and z=3.
  CHECK(s.at(1, 1, 2) == 0.0);
  CHECK(s.at(1, 1, 3) == 0.0);
  CHECK(s.at(1, 1, 0) == doctest::Approx(4.0));
  CHECK(s.at(1, 1, 5) == doctest::Approx(4.0));
}

TEST_CASE("NdcMap spans the longest axis and is centred") {
  GridGeometry g;
  g.dims = {11, 21, 6};
  g.spacing = Vec3(1.0, 0.5, 3.0);
  const auto ndc = NdcMap::for_grid(g);
  CHECK(ndc.ndc_per_mm == doctest::Approx(2.0 / 15.0));
  CHECK(ndc.voxel_ndc(0, 0, 0).z() == doctest::Approx(-1.0));
  CHECK(ndc.voxel_ndc(0, 0, 5).z() == doctest::Approx(1.0));
  CHECK(ndc.voxel_ndc(5, 10, 0).head<2>().norm() == doctest::Approx(0.0));
  const Vec3 idx(3.25, 7.5, 1.0);
  CHECK((ndc.to_index(ndc.to_ndc(idx)) - idx).norm() < 1e-12);
  CHECK(ndc.voxel_size() == doctest::Approx(0.5 * 2.0 / 15.0));
}

TEST_CASE("spatial_gradient of a linear ramp is exact everywhere") {
  const auto g = cube_grid(6, 2.0);
  const auto ndc = NdcMap::for_grid(g);
  ScalarField d(g, 0.0);
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) d.at(x, y, z) = 3.0 * x - 1.0 * z;  // mm per voxel
  const auto grad = spatial_gradient(d, ndc);
  // d/dx in NDC: 3 mm per voxel = 3 mm per 2 mm = 1.5 mm/mm, value scaled to NDC too.
  for (const Vec3& v : grad.values) {
    CHECK(v.x() == doctest::Approx(1.5));
    CHECK(v.y() == doctest::Approx(0.0));
    CHECK(v.z() == doctest::Approx(-0.5));
  }
}

TEST_CASE("gradient_field points to the sphere and has length d") {
  const int n = 24;
  const auto g = cube_grid(n);
  const auto ndc = NdcMap::for_grid(g);
  const double r = 0.5;
  ScalarField d(g, 0.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        d.at(x, y, z) = std::abs(ndc.voxel_ndc(x, y, z).norm() - r) / ndc.ndc_per_mm;
  const auto field = gradient_field(d, ndc);
  const Vec3 p = ndc.voxel_ndc(20, 12, 12);
  const Vec3 v = field.at(20, 12, 12);
  CHECK(v.normalized().dot(-p.normalized()) > 0.999);
  CHECK(v.norm() == doctest::Approx(p.norm() - r).epsilon(1e-9));
  const Vec3 q = ndc.voxel_ndc(14, 12, 12);
  CHECK(field.at(14, 12, 12).normalized().dot(q.normalized()) > 0.999);
  CHECK_THROWS_AS(gradient_field(ScalarField(cube_grid(2), 0.0), ndc), Error);
}

TEST_CASE("trilinear sampling reproduces affine fields and clamps") {
  GridGeometry g;
  g.dims = {5, 7, 4};
  g.spacing = Vec3(1.0, 1.5, 2.0);
  const auto ndc = NdcMap::for_grid(g);
  VectorField f(g);
  ScalarField s(g);
  auto affine = [](const Vec3& p) { return 0.3 * p.x() - 2.0 * p.y() + 0.7 * p.z() + 0.1; };
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 5; ++x) {
        const Vec3 p = ndc.voxel_ndc(x, y, z);
        s.at(x, y, z) = affine(p);
        f.at(x, y, z) = Vec3(affine(p), -affine(p), 2.0 * p.x());
      }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Vec3 idx(u(rng) * 4, u(rng) * 6, u(rng) * 3);
    const Vec3 p = ndc.to_ndc(idx);
    CHECK(sample_trilinear(s, ndc, p) == doctest::Approx(affine(p)));
    CHECK(sample_trilinear(f, ndc, p).z() == doctest::Approx(2.0 * p.x()));
  }
  const Vec3 far = ndc.to_ndc(Vec3(10.0, 3.0, 1.0));
  const Vec3 edge = ndc.to_ndc(Vec3(4.0, 3.0, 1.0));
  CHECK(sample_trilinear(s, ndc, far) == doctest::Approx(affine(edge)));
  CHECK_THROWS_AS(sample_trilinear(s, ndc, Vec3(NAN, 0, 0)), Error);
}

TEST_CASE("resample_isotropic") {
  GridGeometry g;
  g.dims = {4, 4, 7};
  g.spacing = Vec3(1.0, 1.0, 0.5);
  LabelVolume v(g, TissueLabel::Background);
  for (int z = 0; z < 7; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) v.at(x, y, z) = z < 3 ? TissueLabel::LV : TissueLabel::Myo;

  SUBCASE("identity at the same spacing") {
    LabelVolume iso(cube_grid(5), TissueLabel::RV);
    iso.at(1, 2, 3) = TissueLabel::LV;
    const auto r = resample_isotropic(iso, 1.0);
    CHECK(r.dims() == iso.dims());
    CHECK(r.values == iso.values);
  }
  SUBCASE("anisotropic step") {
    const auto r = resample_isotropic(v, 1.0);
    CHECK(r.dims() == Index3{4, 4, 4});
    CHECK(r.at(0, 0, 0) == TissueLabel::LV);
    CHECK(r.at(0, 0, 1) == TissueLabel::LV);
    CHECK(r.at(0, 0, 2) == TissueLabel::Myo);
    CHECK(r.at(3, 3, 3) == TissueLabel::Myo);
  }
  SUBCASE("bad spacing") {
    CHECK_THROWS_AS(resample_isotropic(v, 0.0), Error);
    CHECK_THROWS_AS(resample_isotropic(v, 100.0), Error);
  }
}

TEST_CASE("surface_mask maps tissue classes to regions") {
  LabelVolume v(cube_grid(2), TissueLabel::Background);
  v.values = {TissueLabel::Background, TissueLabel::LV, TissueLabel::RV, TissueLabel::Myo,
              TissueLabel::LV,         TissueLabel::LV, TissueLabel::RV, TissueLabel::Background};
  auto bits = [&](SurfaceTarget t) { return surface_mask(v, t).values; };
  CHECK(bits(SurfaceTarget::LvEndo) == std::vector<std::uint8_t>{0, 1, 0, 0, 1, 1, 0, 0});
  CHECK(bits(SurfaceTarget::RvEndo) == std::vector<std::uint8_t>{0, 0, 1, 0, 0, 0, 1, 0});
  CHECK(bits(SurfaceTarget::LvEpi) == std::vector<std::uint8_t>{0, 1, 0, 1, 1, 1, 0, 0});
  CHECK(bits(SurfaceTarget::RvEpi) == std::vector<std::uint8_t>{0, 1, 1, 1, 1, 1, 1, 0});
}

TEST_CASE("validate rejects bad volumes") {
  LabelVolume v(cube_grid(3), TissueLabel::Background);
  CHECK_NOTHROW(validate(v));
  v.values[4] = static_cast<TissueLabel>(9);
  CHECK_THROWS_AS(validate(v), Error);
  LabelVolume thin(GridGeometry{{1, 3, 3}, Vec3::Ones(), Vec3::Zero()});
  CHECK_THROWS_AS(validate(thin), Error);
}

TEST_CASE("volume files round trip") {
  const auto dir = temp_dir("volume_io");
  GridGeometry g;
  g.dims = {3, 4, 5};
  g.spacing = Vec3(0.75, 1.0, 2.5);
  g.origin = Vec3(-3.0, 1.0, 7.5);
  LabelVolume v(g, TissueLabel::Background);
  for (std::size_t i = 0; i < v.size(); ++i) v.values[i] = static_cast<TissueLabel>(i % 4);
  save_volume(v, dir / "vol.json");
  for (const auto& p : {dir / "vol.json", dir / "vol.raw", dir / "vol"}) {
    const auto back = load_volume(p);
    CHECK(back.dims() == g.dims);
    CHECK(back.geometry.spacing == g.spacing);
    CHECK(back.geometry.origin == g.origin);
    CHECK(back.values == v.values);
  }

  ScalarField s(g, 0.0);
  VectorField f(g, Vec3::Zero());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Fields are stored as float32; pick exactly representable values.
    s.values[i] = 0.125 * double(i) - 1.0;
    f.values[i] = Vec3(double(i), -0.5 * double(i), 0.0078125);
  }
  save_scalar_field(s, dir / "dist");
  save_vector_field(f, dir / "grad");
  CHECK(load_scalar_field(dir / "dist").values == s.values);
  CHECK(load_vector_field(dir / "grad").values == f.values);

  std::filesystem::resize_file(dir / "vol.raw", 10);
  CHECK_THROWS_AS(load_volume(dir / "vol"), Error);
  CHECK_THROWS_AS(load_volume(dir / "missing"), Error);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{\"dims\": [3, 4]}";
  }
  CHECK_THROWS_AS(load_volume(dir / "bad.json"), Error);
}
