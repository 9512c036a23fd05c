#include "bivfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <json.hpp>

#include "bivfit/spatial.hpp"

namespace bivfit {
namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* who) {
  if (!a.geometry.same_shape(b.geometry)) {
    std::ostringstream msg;
    msg << who << ": volumes have different dimensions";
    throw Error(msg.str());
  }
}

// Distances (voxel units) from every boundary voxel of `from` to the nearest boundary voxel of `to`.
std::vector<double> directed_distances(const BinaryMask& from, const BinaryMask& to) {
  BinaryMask unit = to;
  unit.geometry.spacing = Vec3::Ones();
  const std::vector<double> d2 = squared_edt(unit, 1);
  std::vector<double> out;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from.values[i]) out.push_back(std::sqrt(d2[i]));
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

struct Corner {
  Vec3 a, b, c;
};

Corner corners(const LabeledMesh& m, std::size_t f) {
  const auto& face = m.faces[f];
  return {m.vertices[face[0]], m.vertices[face[1]], m.vertices[face[2]]};
}

QualityStats finish(std::vector<double> per_face) {
  QualityStats s;
  s.per_face = std::move(per_face);
  for (double v : s.per_face) s.mean += v;
  if (!s.per_face.empty()) s.mean /= double(s.per_face.size());
  return s;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b, "dice");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values[i] != 0, y = b.values[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

BinaryMask boundary_voxels(const BinaryMask& mask) {
  BinaryMask out(mask.geometry, 0);
  const auto& g = mask.geometry;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        const bool edge = x == 0 || y == 0 || z == 0 || x == g.dims[0] - 1 ||
                          y == g.dims[1] - 1 || z == g.dims[2] - 1;
        if (edge || !mask.at(x - 1, y, z) || !mask.at(x + 1, y, z) || !mask.at(x, y - 1, z) ||
            !mask.at(x, y + 1, z) || !mask.at(x, y, z - 1) || !mask.at(x, y, z + 1))
          out.at(x, y, z) = 1;
      }
  return out;
}

HausdorffResult hausdorff(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b, "hausdorff");
  if (count_foreground(a) == 0 || count_foreground(b) == 0)
    throw Error("hausdorff: input volume is empty");
  const BinaryMask ba = boundary_voxels(a);
  const BinaryMask bb = boundary_voxels(b);
  const auto ab = directed_distances(ba, bb);
  const auto ba_d = directed_distances(bb, ba);
  HausdorffResult r;
  r.max = std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba_d.begin(), ba_d.end()));
  r.p95 = std::max(percentile(ab, 0.95), percentile(ba_d, 0.95));
  return r;
}

double asd(const LabeledMesh& mesh, std::span<const Vec3> samples, const NdcMap& ndc) {
  if (mesh.faces.empty()) throw Error("asd: mesh has no faces");
  if (samples.empty()) throw Error("asd: no surface samples");
  const TriangleTree tree(mesh.vertices, mesh.faces);
  double sum = 0.0;
  for (const Vec3& p : samples) sum += std::sqrt(tree.closest(p).squared_distance);
  return sum / double(samples.size()) / ndc.ndc_per_mm;
}

double asd(const LabeledMesh& mesh, const LabelVolume& gt, const NdcMap& ndc, std::size_t n,
           std::uint64_t seed) {
  BinaryMask surface(gt.geometry, 0);
  for (SurfaceTarget t : kAllTargets) {
    const BinaryMask b = boundary_voxels(surface_mask(gt, t));
    for (std::size_t i = 0; i < b.size(); ++i) surface.values[i] |= b.values[i];
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < surface.size(); ++i)
    if (surface.values[i]) pool.push_back(i);
  if (pool.empty()) throw Error("asd: ground truth has no surface voxels");
  if (n == 0) throw Error("asd: sample count must be positive");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  if (pool.size() >= n) {
    std::sample(pool.begin(), pool.end(), std::back_inserter(picked), n, rng);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = 0; k < n; ++k) picked.push_back(pool[pick(rng)]);
  }
  std::vector<Vec3> samples;
  samples.reserve(picked.size());
  for (std::size_t i : picked) {
    const Index3 c = gt.geometry.coords(i);
    samples.push_back(ndc.voxel_ndc(c[0], c[1], c[2]));
  }
  return asd(mesh, samples, ndc);
}

QualityStats aspect_ratio(const LabeledMesh& mesh) {
  std::vector<double> out;
  out.reserve(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto [a, b, c] = corners(mesh, f);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (!(area > 0.0)) {
      std::ostringstream msg;
      msg << "aspect_ratio: face " << f << " has zero area";
      throw Error(msg.str());
    }
    const double inradius = 2.0 * area / (la + lb + lc);
    out.push_back(std::max({la, lb, lc}) / (2.0 * std::sqrt(3.0) * inradius));
  }
  return finish(std::move(out));
}

QualityStats scaled_jacobian(const LabeledMesh& mesh) {
  std::vector<double> out;
  out.reserve(mesh.faces.size());
  std::size_t collinear = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto [a, b, c] = corners(mesh, f);
    const std::array<std::array<Vec3, 2>, 3> edges = {{{b - a, c - a}, {c - b, a - b}, {a - c, b - c}}};
    double best = 1.0;
    for (const auto& e : edges) {
      const double l0 = e[0].norm(), l1 = e[1].norm();
      if (!(l0 > 0.0) || !(l1 > 0.0)) {
        std::ostringstream msg;
        msg << "scaled_jacobian: face " << f << " has a zero-length edge";
        throw Error(msg.str());
      }
      best = std::min(best, e[0].cross(e[1]).norm() / (l0 * l1));
    }
    if (best == 0.0) ++collinear;
    out.push_back(std::min(1.0, 2.0 / std::sqrt(3.0) * best));
  }
  if (collinear > 0) {
    std::ostringstream msg;
    msg << "scaled_jacobian: " << collinear << " face(s) have collinear vertices";
    log_warning(msg.str());
  }
  return finish(std::move(out));
}

double normal_consistency(const LabeledMesh& mesh) {
  const EdgeTable t = build_edges(mesh);
  std::vector<Vec3> normals(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto [a, b, c] = corners(mesh, f);
    const Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    normals[f] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < t.edge_count(); ++e) {
    if (t.incident_face_count(e) != 2) continue;
    const auto fs = t.incident_faces(e);
    sum += normals[fs[0]].dot(normals[fs[1]]);
    ++count;
  }
  return count == 0 ? 1.0 : sum / double(count);
}

double non_manifold_ratio(const LabeledMesh& mesh) {
  if (mesh.faces.empty()) return 0.0;
  const EdgeTable t = build_edges(mesh);
  std::vector<std::uint8_t> bad(mesh.faces.size(), 0);
  for (std::size_t e = 0; e < t.edge_count(); ++e)
    if (t.incident_face_count(e) > 2)
      for (int f : t.incident_faces(e)) bad[f] = 1;
  std::size_t n = 0;
  for (auto b : bad) n += b;
  return double(n) / double(mesh.faces.size());
}

MetricsReport evaluate(const LabeledMesh& mesh, const LabelVolume& gt, const NdcMap& ndc,
                       const EvalOptions& opts) {
  MetricsReport r;
  r.vertices = mesh.vertices.size();
  r.faces = mesh.faces.size();
  const LabelVolume pred = mesh_to_labels(mesh, gt.geometry, ndc);
  const auto& g = gt.geometry;
  const double diagonal = std::sqrt(double(g.dims[0]) * g.dims[0] + double(g.dims[1]) * g.dims[1] +
                                    double(g.dims[2]) * g.dims[2]);
  static constexpr std::array<TissueLabel, 3> kLabels = {TissueLabel::LV, TissueLabel::RV,
                                                         TissueLabel::Myo};
  for (std::size_t k = 0; k < kLabels.size(); ++k) {
    BinaryMask a(g, 0), b(g, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.values[i] = pred.values[i] == kLabels[k];
      b.values[i] = gt.values[i] == kLabels[k];
    }
    r.dice[k] = dice(a, b);
    if (count_foreground(a) == 0 || count_foreground(b) == 0) {
      std::ostringstream msg;
      msg << "evaluate: label " << int(kLabels[k]) << " is empty in "
          << (count_foreground(a) == 0 ? "the reconstruction" : "the ground truth")
          << "; Hausdorff set to the grid diagonal";
      log_warning(msg.str());
      r.hausdorff[k] = diagonal;
      r.hausdorff95_mean += diagonal / 3.0;
    } else {
      const HausdorffResult h = hausdorff(a, b);
      r.hausdorff[k] = h.max;
      r.hausdorff95_mean += h.p95 / 3.0;
    }
    r.dice_mean += r.dice[k] / 3.0;
    r.hausdorff_mean += r.hausdorff[k] / 3.0;
  }
  r.asd_mm = asd(mesh, gt, ndc, opts.asd_samples, opts.seed);
  r.aspect_ratio = aspect_ratio(mesh).mean;
  r.scaled_jacobian = scaled_jacobian(mesh).mean;
  r.normal_consistency = normal_consistency(mesh);
  r.non_manifold_ratio = non_manifold_ratio(mesh);
  return r;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::json j = {
      {"case_id", r.case_id},
      {"scheme", r.scheme},
      {"vertices", r.vertices},
      {"faces", r.faces},
      {"dice", {{"lv", r.dice[0]}, {"rv", r.dice[1]}, {"myo", r.dice[2]}, {"mean", r.dice_mean}}},
      {"hausdorff_voxels",
       {{"lv", r.hausdorff[0]},
        {"rv", r.hausdorff[1]},
        {"myo", r.hausdorff[2]},
        {"mean", r.hausdorff_mean},
        {"mean_p95", r.hausdorff95_mean}}},
      {"asd_mm", r.asd_mm},
      {"aspect_ratio", r.aspect_ratio},
      {"scaled_jacobian", r.scaled_jacobian},
      {"normal_consistency", r.normal_consistency},
      {"non_manifold_ratio", r.non_manifold_ratio},
      {"inference_seconds", r.inference_seconds},
  };
  return j.dump(2);
}

void save_report(const MetricsReport& report, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error("report: cannot write " + path.string());
    out << to_json(report) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> csv_columns() {
  return {"dice_lv",   "dice_rv",      "dice_myo",        "dice_mean",          "hd_lv",
          "hd_rv",     "hd_myo",       "hd_mean",         "hd95_mean",          "asd_mm",
          "aspect_ratio", "scaled_jacobian", "normal_consistency", "non_manifold_ratio",
          "inference_s", "vertices", "faces"};
}

std::vector<double> csv_values(const MetricsReport& r) {
  return {r.dice[0],         r.dice[1],          r.dice[2],         r.dice_mean,
          r.hausdorff[0],    r.hausdorff[1],     r.hausdorff[2],    r.hausdorff_mean,
          r.hausdorff95_mean, r.asd_mm,          r.aspect_ratio,    r.scaled_jacobian,
          r.normal_consistency, r.non_manifold_ratio, r.inference_seconds,
          double(r.vertices), double(r.faces)};
}

void save_csv(std::span<const MetricsReport> reports, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error("csv: cannot write " + path.string());
    out.precision(10);
    out << "case_id,scheme";
    for (const auto& c : csv_columns()) out << ',' << c;
    out << '\n';
    const std::size_t ncol = csv_columns().size();
    std::vector<double> mean(ncol, 0.0), m2(ncol, 0.0);
    for (const auto& r : reports) {
      const auto v = csv_values(r);
      out << r.case_id << ',' << r.scheme;
      for (double x : v) out << ',' << x;
      out << '\n';
      for (std::size_t c = 0; c < ncol; ++c) mean[c] += v[c];
    }
    if (!reports.empty()) {
      const double n = double(reports.size());
      for (auto& m : mean) m /= n;
      for (const auto& r : reports) {
        const auto v = csv_values(r);
        for (std::size_t c = 0; c < ncol; ++c) m2[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
      }
      out << "mean,";
      for (double m : mean) out << ',' << m;
      out << "\nstd,";
      for (double s : m2) out << ',' << (reports.size() > 1 ? std::sqrt(s / (n - 1.0)) : 0.0);
      out << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace bivfit
