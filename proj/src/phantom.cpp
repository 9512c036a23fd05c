#include "bivfit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace bivfit {
namespace {

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

// Bisection for the closest-point parameter, after D. Eberly, "Distance from a
// Point to an Ellipse, an Ellipsoid, or a Hyperellipsoid".
double root_2d(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = z1 / (s + 1.0);
    const double v = a * a + b * b - 1.0;
    if (v > 0.0) {
      s0 = s;
    } else if (v < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

double root_3d(double r0, double r1, double z0, double z1, double z2, double g) {
  const double n0 = r0 * z0, n1 = r1 * z1;
  double s0 = z2 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::sqrt(n0 * n0 + n1 * n1 + z2 * z2) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = n1 / (s + r1), c = z2 / (s + 1.0);
    const double v = a * a + b * b + c * c - 1.0;
    if (v > 0.0) {
      s0 = s;
    } else if (v < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// e0 >= e1 > 0, y0, y1 >= 0.
double ellipse_distance(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return 0.0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double s = root_2d(r0, z0, z1, g);
      const double x0 = r0 * y0 / (s + r0), x1 = y1 / (s + 1.0);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer = e0 * y0, denom = e0 * e0 - e1 * e1;
  if (numer < denom) {
    const double xde0 = numer / denom;
    const double x0 = e0 * xde0, x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0));
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

// e0 >= e1 >= e2 > 0, y >= 0.
double ellipsoid_distance(double e0, double e1, double e2, double y0, double y1, double y2) {
  if (y2 > 0.0) {
    if (y1 > 0.0) {
      if (y0 > 0.0) {
        const double z0 = y0 / e0, z1 = y1 / e1, z2 = y2 / e2;
        const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1.0;
        if (g == 0.0) return 0.0;
        const double r0 = (e0 / e2) * (e0 / e2), r1 = (e1 / e2) * (e1 / e2);
        const double s = root_3d(r0, r1, z0, z1, z2, g);
        const Vec3 x(r0 * y0 / (s + r0), r1 * y1 / (s + r1), y2 / (s + 1.0));
        return (x - Vec3(y0, y1, y2)).norm();
      }
      return ellipse_distance(e1, e2, y1, y2);
    }
    if (y0 > 0.0) return ellipse_distance(e0, e2, y0, y2);
    return std::abs(y2 - e2);
  }
  const double d0 = e0 * e0 - e2 * e2, d1 = e1 * e1 - e2 * e2;
  const double n0 = e0 * y0, n1 = e1 * y1;
  if (n0 < d0 && n1 < d1) {
    const double xde0 = n0 / d0, xde1 = n1 / d1;
    const double discr = 1.0 - xde0 * xde0 - xde1 * xde1;
    if (discr > 0.0) {
      const Vec3 x(e0 * xde0, e1 * xde1, e2 * std::sqrt(discr));
      return (x - Vec3(y0, y1, 0.0)).norm();
    }
  }
  return ellipse_distance(e0, e1, y0, y1);
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("phantom spec: expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

nlohmann::json ellipsoid_json(const Ellipsoid& e) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({e.rotation(r, 0), e.rotation(r, 1), e.rotation(r, 2)});
  return {{"center_mm", vec_json(e.center)}, {"semi_axes_mm", vec_json(e.axes)}, {"rotation", rows}};
}

double lv_radius_towards(const Ellipsoid& lv, double azimuth, double local_z) {
  const double c = std::cos(azimuth), s = std::sin(azimuth);
  const double ax = lv.axes.x(), ay = lv.axes.y();
  const double r = 1.0 / std::sqrt(c * c / (ax * ax) + s * s / (ay * ay));
  const double t = 1.0 - (local_z / lv.axes.z()) * (local_z / lv.axes.z());
  return t > 0.0 ? r * std::sqrt(t) : 0.0;
}

}  // namespace

bool Ellipsoid::contains(const Vec3& p) const {
  const Vec3 q = (rotation.transpose() * (p - center)).cwiseQuotient(axes);
  return q.squaredNorm() <= 1.0;
}

double Ellipsoid::distance(const Vec3& p) const {
  const Vec3 q = (rotation.transpose() * (p - center)).cwiseAbs();
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return axes[a] > axes[b]; });
  return ellipsoid_distance(axes[order[0]], axes[order[1]], axes[order[2]], q[order[0]],
                            q[order[1]], q[order[2]]);
}

double AnalyticSurfaces::distance(const Vec3& p) const {
  return std::min({lv_endo.distance(p), lv_epi.distance(p), rv_endo.distance(p),
                   rv_epi.distance(p), std::abs((p - base_point).dot(base_normal))});
}

TissueLabel AnalyticSurfaces::label_at(const Vec3& p) const {
  if (!below_base(p)) return TissueLabel::Background;
  if (lv_endo.contains(p)) return TissueLabel::LV;
  if (lv_epi.contains(p)) return TissueLabel::Myo;
  if (rv_endo.contains(p)) return TissueLabel::RV;
  if (rv_epi.contains(p)) return TissueLabel::Myo;
  return TissueLabel::Background;
}

void validate(const PhantomSpec& spec) {
  for (int d : spec.dims)
    if (d < 3) throw Error("phantom: grid needs at least 3 voxels per axis");
  auto positive = [](const Vec3& v) { return v.minCoeff() > 0.0; };
  if (!(spec.spacing > 0.0) || !positive(spec.lv_endo_axes) || !positive(spec.rv_endo_axes) ||
      !(spec.lv_wall > 0.0) || !(spec.rv_wall > 0.0) || !(spec.rv_offset > 0.0))
    throw Error("phantom: sizes, walls and spacing must be positive");
  if (spec.variability < 0.0 || spec.variability >= 0.5)
    throw Error("phantom: variability must lie in [0, 0.5)");
}

AnalyticSurfaces phantom_surfaces(const PhantomSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double v = spec.variability;
  auto jitter = [&](double x) { return x * (1.0 + v * unit(rng)); };

  const Vec3 lv_endo(jitter(spec.lv_endo_axes.x()), jitter(spec.lv_endo_axes.y()),
                     jitter(spec.lv_endo_axes.z()));
  const double lv_wall = jitter(spec.lv_wall);
  const Vec3 rv_endo(jitter(spec.rv_endo_axes.x()), jitter(spec.rv_endo_axes.y()),
                     jitter(spec.rv_endo_axes.z()));
  const double rv_wall = jitter(spec.rv_wall);
  const double rv_offset = jitter(spec.rv_offset);
  const double base_height = spec.base_height + 10.0 * v * unit(rng);
  const double rv_dz = spec.rv_center_dz + 10.0 * v * unit(rng);

  const Vec3 spacing = Vec3::Constant(spec.spacing);
  const Vec3 grid_centre =
      spacing.cwiseProduct(Vec3(spec.dims[0] - 1, spec.dims[1] - 1, spec.dims[2] - 1)) / 2.0;
  const Vec3 lv_centre = grid_centre + Vec3(0.0, 0.0, spec.lv_center_z);
  const Eigen::Matrix3d tilt = rot_x(spec.tilt);

  AnalyticSurfaces s;
  s.lv_endo = {lv_centre, tilt, lv_endo};
  s.lv_epi = {lv_centre, tilt, lv_endo + Vec3::Constant(lv_wall)};
  const Vec3 rv_local(rv_offset * std::cos(spec.swing), rv_offset * std::sin(spec.swing), rv_dz);
  const Eigen::Matrix3d rv_rot = tilt * rot_z(spec.swing);
  s.rv_endo = {lv_centre + tilt * rv_local, rv_rot, rv_endo};
  s.rv_epi = {lv_centre + tilt * rv_local, rv_rot, rv_endo + Vec3::Constant(rv_wall)};
  s.base_point = lv_centre + tilt * Vec3(0.0, 0.0, base_height);
  s.base_normal = tilt * Vec3::UnitZ();

  // The RV cavity must reach into the LV epicardium (shared septum) and out past it (free wall).
  const double lv_r = lv_radius_towards(s.lv_epi, spec.swing, rv_dz);
  if (!(rv_offset - rv_endo.x() < lv_r) || !(rv_offset + rv_endo.x() > lv_r) ||
      !(base_height > rv_dz - rv_endo.z()) || !(base_height < lv_endo.z()))
    throw Error("phantom: RV cannot be attached to the LV wall with these parameters");
  return s;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  Phantom p;
  p.surfaces = phantom_surfaces(spec);
  GridGeometry g;
  g.dims = spec.dims;
  g.spacing = Vec3::Constant(spec.spacing);
  g.origin = Vec3::Zero();
  p.volume = LabelVolume(g, TissueLabel::Background);
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        p.volume.at(x, y, z) = p.surfaces.label_at(g.physical(x, y, z));
  return p;
}

LabelVolume degrade(const LabelVolume& volume, const DegradationSpec& spec, std::uint64_t seed) {
  if (spec.slice_multiplier < 1) throw Error("degrade: slice multiplier must be at least 1");
  if (spec.max_shift_mm < 0.0) throw Error("degrade: shift bound must be non-negative");
  if (spec.drop_apical < 0 || spec.drop_basal < 0)
    throw Error("degrade: dropped slice counts must be non-negative");
  const auto& g = volume.geometry;
  const int k = spec.slice_multiplier;
  const int nz = (g.dims[2] + k - 1) / k;
  if (nz < 3) throw Error("degrade: decimation leaves fewer than 3 slices");

  GridGeometry out_g = g;
  out_g.dims[2] = nz;
  out_g.spacing.z() *= k;
  LabelVolume out(out_g, TissueLabel::Background);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-spec.max_shift_mm, spec.max_shift_mm);
  for (int z = 0; z < nz; ++z) {
    int dx = 0, dy = 0;
    if (spec.max_shift_mm > 0.0) {
      dx = static_cast<int>(std::lround(shift(rng) / g.spacing.x()));
      dy = static_cast<int>(std::lround(shift(rng) / g.spacing.y()));
    }
    if (z < spec.drop_apical || z >= nz - spec.drop_basal) continue;
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        const int sx = x - dx, sy = y - dy;
        if (g.contains(sx, sy, z * k)) out.at(x, y, z) = volume.at(sx, sy, z * k);
      }
  }
  return out;
}

std::string to_json(const PhantomSpec& s) {
  nlohmann::json j = {
      {"dims", {s.dims[0], s.dims[1], s.dims[2]}},
      {"spacing_mm", s.spacing},
      {"lv_endo_axes_mm", vec_json(s.lv_endo_axes)},
      {"lv_wall_mm", s.lv_wall},
      {"lv_center_z_mm", s.lv_center_z},
      {"base_height_mm", s.base_height},
      {"rv_offset_mm", s.rv_offset},
      {"rv_endo_axes_mm", vec_json(s.rv_endo_axes)},
      {"rv_center_dz_mm", s.rv_center_dz},
      {"rv_wall_mm", s.rv_wall},
      {"swing_rad", s.swing},
      {"tilt_rad", s.tilt},
      {"variability", s.variability},
      {"seed", s.seed},
  };
  return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("phantom spec: ") + e.what());
  }
  if (!j.is_object()) throw Error("phantom spec: top level must be an object");
  PhantomSpec s;
  try {
    if (j.contains("dims")) {
      const auto d = j.at("dims");
      if (!d.is_array() || d.size() != 3) throw Error("phantom spec: dims must have 3 entries");
      s.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    }
    s.spacing = j.value("spacing_mm", s.spacing);
    if (j.contains("lv_endo_axes_mm")) s.lv_endo_axes = json_vec(j["lv_endo_axes_mm"]);
    s.lv_wall = j.value("lv_wall_mm", s.lv_wall);
    s.lv_center_z = j.value("lv_center_z_mm", s.lv_center_z);
    s.base_height = j.value("base_height_mm", s.base_height);
    s.rv_offset = j.value("rv_offset_mm", s.rv_offset);
    if (j.contains("rv_endo_axes_mm")) s.rv_endo_axes = json_vec(j["rv_endo_axes_mm"]);
    s.rv_center_dz = j.value("rv_center_dz_mm", s.rv_center_dz);
    s.rv_wall = j.value("rv_wall_mm", s.rv_wall);
    s.swing = j.value("swing_rad", s.swing);
    s.tilt = j.value("tilt_rad", s.tilt);
    s.variability = j.value("variability", s.variability);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("phantom spec: ") + e.what());
  }
  validate(s);
  return s;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("phantom spec: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return phantom_spec_from_json(buf.str());
}

void save_phantom_spec(const PhantomSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("phantom spec: cannot write " + path.string());
  out << to_json(spec) << '\n';
}

DegradationSpec degradation_from_json(const std::string& text) {
  DegradationSpec d;
  try {
    const auto j = nlohmann::json::parse(text);
    d.slice_multiplier = j.value("slice_multiplier", d.slice_multiplier);
    d.max_shift_mm = j.value("max_shift_mm", d.max_shift_mm);
    d.drop_apical = j.value("drop_apical", d.drop_apical);
    d.drop_basal = j.value("drop_basal", d.drop_basal);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("degradation spec: ") + e.what());
  }
  return d;
}

std::string to_json(const AnalyticSurfaces& s) {
  nlohmann::json j = {
      {"lv_endo", ellipsoid_json(s.lv_endo)},
      {"lv_epi", ellipsoid_json(s.lv_epi)},
      {"rv_endo", ellipsoid_json(s.rv_endo)},
      {"rv_epi", ellipsoid_json(s.rv_epi)},
      {"base_plane", {{"point_mm", vec_json(s.base_point)}, {"normal", vec_json(s.base_normal)}}},
  };
  return j.dump(2);
}

}  // namespace bivfit
