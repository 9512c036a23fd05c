#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <queue>

#include "bivfit/fit.hpp"
#include "bivfit/metrics.hpp"
#include "bivfit/phantom.hpp"

using namespace bivfit;

namespace {

const Phantom& default_phantom() {
  static const Phantom p = generate_phantom(PhantomSpec{});
  return p;
}

std::size_t count_label(const LabelVolume& v, TissueLabel l) {
  return std::size_t(std::count(v.values.begin(), v.values.end(), l));
}

bool six_connected(const LabelVolume& v, TissueLabel l) {
  const auto& g = v.geometry;
  std::vector<std::uint8_t> seen(v.size(), 0);
  std::size_t start = v.size();
  for (std::size_t i = 0; i < v.size() && start == v.size(); ++i)
    if (v.values[i] == l) start = i;
  if (start == v.size()) return false;
  std::queue<std::size_t> q;
  q.push(start);
  seen[start] = 1;
  std::size_t reached = 0;
  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!q.empty()) {
    const auto c = g.coords(q.front());
    q.pop();
    ++reached;
    for (const auto& o : off) {
      const int x = c[0] + o[0], y = c[1] + o[1], z = c[2] + o[2];
      if (!g.contains(x, y, z)) continue;
      const auto j = g.index(x, y, z);
      if (!seen[j] && v.values[j] == l) {
        seen[j] = 1;
        q.push(j);
      }
    }
  }
  return reached == count_label(v, l);
}

double dice_all(const LabelVolume& a, const LabelVolume& b) {
  double sum = 0.0;
  for (auto l : {TissueLabel::LV, TissueLabel::RV, TissueLabel::Myo}) {
    BinaryMask x(a.geometry, 0), y(b.geometry, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      x.values[i] = a.values[i] == l;
      y.values[i] = b.values[i] == l;
    }
    sum += dice(x, y) / 3.0;
  }
  return sum;
}

}  // namespace

TEST_CASE("default phantom has connected, disjoint regions") {
  const auto& v = default_phantom().volume;
  CHECK(v.dims() == Index3{128, 128, 128});
  CHECK(count_label(v, TissueLabel::LV) > 1000);
  CHECK(count_label(v, TissueLabel::RV) > 1000);
  CHECK(count_label(v, TissueLabel::Myo) > 1000);
  CHECK(six_connected(v, TissueLabel::Myo));
  CHECK(six_connected(v, TissueLabel::LV));
  CHECK(six_connected(v, TissueLabel::RV));
  CHECK_NOTHROW(validate(v));
}

TEST_CASE("zero swing phantom is mirror symmetric in y") {
  const auto& v = default_phantom().volume;
  std::size_t mismatched = 0;
  for (int z = 0; z < 128; ++z)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 128; ++x) mismatched += v.at(x, y, z) != v.at(x, 127 - y, z);
  CHECK(mismatched == 0);
}

TEST_CASE("myocardial boundary lies on the analytic surfaces") {
  const auto& p = default_phantom();
  BinaryMask myo(p.volume.geometry, 0);
  for (std::size_t i = 0; i < myo.size(); ++i) myo.values[i] = p.volume.values[i] == TissueLabel::Myo;
  const auto b = boundary_voxels(myo);
  const double diag = std::sqrt(3.0) * 2.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.values[i]) continue;
    const auto c = b.geometry.coords(i);
    worst = std::max(worst, p.surfaces.distance(p.volume.geometry.physical(c[0], c[1], c[2])));
  }
  CHECK(worst <= diag);
}

TEST_CASE("phantom is deterministic and the seed matters") {
  PhantomSpec s;
  s.dims = {48, 48, 48};
  s.spacing = 5.0;
  s.variability = 0.1;
  s.seed = 3;
  const auto a = generate_phantom(s).volume;
  CHECK(a.values == generate_phantom(s).volume.values);
  s.seed = 4;
  CHECK(a.values != generate_phantom(s).volume.values);
}

TEST_CASE("swing angle shows up in the segmentation centroid") {
  PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = 2.5;
  const auto ndc = [&] {
    GridGeometry g;
    g.dims = s.dims;
    g.spacing = Vec3::Constant(s.spacing);
    return NdcMap::for_grid(g);
  }();
  const Vec3 base = seg_rv_centroid(generate_phantom(s).volume, ndc);
  for (double phi : {0.35, -0.6, 1.2}) {
    s.swing = phi;
    const Vec3 c = seg_rv_centroid(generate_phantom(s).volume, ndc);
    CHECK(std::abs(swing_angle(base, c) - phi) < 2.0 * std::numbers::pi / 180.0);
  }
}

TEST_CASE("invalid phantom specs") {
  PhantomSpec s;
  s.lv_wall = 0.0;
  CHECK_THROWS_AS(validate(s), Error);
  s = PhantomSpec{};
  s.variability = 0.7;
  CHECK_THROWS_AS(validate(s), Error);
  s = PhantomSpec{};
  s.rv_offset = 200.0;
  CHECK_THROWS_AS(generate_phantom(s), Error);
}

TEST_CASE("phantom spec JSON") {
  PhantomSpec s;
  s.swing = 0.25;
  s.seed = 99;
  s.dims = {64, 70, 80};
  const auto back = phantom_spec_from_json(to_json(s));
  CHECK(back.swing == s.swing);
  CHECK(back.seed == 99);
  CHECK(back.dims == s.dims);
  CHECK(phantom_spec_from_json("{}").spacing == PhantomSpec{}.spacing);
  CHECK_THROWS_WITH_AS(phantom_spec_from_json("{\n\"swing\": 0.1,\n  oops\n}"),
                       doctest::Contains("line 3"), Error);
  CHECK_THROWS_AS(phantom_spec_from_json("{\"dims\": [1, 2]}"), Error);

  const auto dir = std::filesystem::temp_directory_path() / "bivfit_test_phantom";
  std::filesystem::create_directories(dir);
  save_phantom_spec(s, dir / "spec.json");
  CHECK(load_phantom_spec(dir / "spec.json").swing == s.swing);

  const auto d = degradation_from_json(R"({"slice_multiplier": 4, "max_shift_mm": 3.0})");
  CHECK(d.slice_multiplier == 4);
  CHECK(d.max_shift_mm == 3.0);
  CHECK(d.drop_basal == 0);
}

TEST_CASE("degradation") {
  const auto& v = default_phantom().volume;
  CHECK(degrade(v, DegradationSpec{}, 1).values == v.values);

  DegradationSpec five;
  five.slice_multiplier = 5;
  const auto d5 = degrade(v, five, 1);
  CHECK(d5.dims()[2] == 26);
  CHECK(d5.geometry.spacing.z() == 10.0);
  CHECK(d5.at(60, 60, 13) == v.at(60, 60, 65));

  DegradationSpec drop;
  drop.drop_apical = 2;
  drop.drop_basal = 3;
  const auto dd = degrade(v, drop, 1);
  for (int z : {0, 1, 125, 126, 127})
    for (int y = 0; y < 128; y += 7)
      for (int x = 0; x < 128; x += 7) CHECK(dd.at(x, y, z) == TissueLabel::Background);

  double previous = 1.0;
  for (double shift : {2.0, 6.0, 12.0}) {
    DegradationSpec s;
    s.max_shift_mm = shift;
    const auto a = degrade(v, s, 7);
    CHECK(a.values == degrade(v, s, 7).values);
    for (auto l : a.values) CHECK(int(l) <= 3);
    const double dsc = dice_all(a, v);
    CHECK(dsc < previous);
    previous = dsc;
  }

  DegradationSpec bad;
  bad.slice_multiplier = 100;
  CHECK_THROWS_AS(degrade(v, bad, 0), Error);
  bad.slice_multiplier = 0;
  CHECK_THROWS_AS(degrade(v, bad, 0), Error);
}

TEST_CASE("procedural template") {
  const auto t = procedural_template();
  CHECK(t.vertex_count() >= std::size_t(388 * 0.85));
  CHECK(t.vertex_count() <= std::size_t(388 * 1.15));
  CHECK(t.face_count() >= std::size_t(780 * 0.85));
  CHECK(t.face_count() <= std::size_t(780 * 1.15));
  std::array<int, kVertexLabelCount> counts{};
  for (auto l : t.labels) ++counts[int(l)];
  for (int c : counts) CHECK(c >= 8);
  CHECK_NOTHROW(validate(t));
  CHECK(non_manifold_ratio(t) == 0.0);
  for (const Vec3& p : t.vertices) CHECK(p.cwiseAbs().maxCoeff() <= 1.0);
  // Long axis on Z: the valve rims sit at the top.
  double valve_z = 0.0, rest_z = 0.0;
  for (std::size_t v = 0; v < t.vertex_count(); ++v)
    (t.labels[v] == VertexLabel::Valve ? valve_z : rest_z) += t.vertices[v].z();
  CHECK(valve_z / counts[int(VertexLabel::Valve)] > rest_z / double(t.vertex_count() - counts[4]));

  const auto fine = procedural_template(TemplateOptions{1});
  CHECK(fine.vertex_count() > 3 * t.vertex_count());
  CHECK(procedural_template().vertices == t.vertices);
  CHECK_THROWS_AS(procedural_template(TemplateOptions{-1}), Error);
}
