#include "bivfit/fit.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace bivfit {

Eigen::Matrix3d SwingRotation::matrix() const {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

const VectorField* TargetFields::descent_for(SurfaceTarget t) const {
  const auto& f = descent[static_cast<int>(t)];
  return f ? &*f : nullptr;
}

const ScalarField* TargetFields::distance_for(SurfaceTarget t) const {
  const auto& f = distance[static_cast<int>(t)];
  return f ? &*f : nullptr;
}

TargetFields build_target_fields(const LabelVolume& volume, const NdcMap& ndc) {
  TargetFields out;
  out.ndc = ndc;
  for (SurfaceTarget t : kAllTargets) {
    const BinaryMask mask = surface_mask(volume, t);
    if (is_degenerate(mask)) {
      std::ostringstream msg;
      msg << "fields: " << to_string(t) << " mask is "
          << (count_foreground(mask) == 0 ? "empty" : "full");
      log_warning(msg.str());
    }
    ScalarField d = surface_distance(mask);
    out.descent[static_cast<int>(t)] = gradient_field(d, ndc);
    out.distance[static_cast<int>(t)] = std::move(d);
  }
  return out;
}

Vec3 rv_centroid(const LabeledMesh& mesh) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (mesh.labels[v] != VertexLabel::RvEpi) continue;
    sum += mesh.vertices[v];
    ++n;
  }
  if (n == 0) throw Error("rv_centroid: mesh has no RV-epi vertices");
  return sum / double(n);
}

Vec3 seg_rv_centroid(const LabelVolume& volume, const NdcMap& ndc) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  const auto& g = volume.geometry;
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (volume.at(x, y, z) == TissueLabel::RV) {
          sum += Vec3(x, y, z);
          ++n;
        }
  if (n == 0) throw Error("seg_rv_centroid: segmentation has no RV voxels");
  return ndc.to_ndc(sum / double(n));
}

double swing_angle(const Vec3& from, const Vec3& to) {
  const double nf = std::hypot(from.x(), from.y());
  const double nt = std::hypot(to.x(), to.y());
  if (nf <= 1e-6 || nt <= 1e-6)
    throw Error("swing_align: RV centroid lies on the Z axis, rotation is undefined");
  const double cross = from.x() * to.y() - from.y() * to.x();
  const double dot = from.x() * to.x() + from.y() * to.y();
  double phi = std::atan2(cross, dot);
  if (phi <= -std::numbers::pi) phi = std::numbers::pi;
  return phi;
}

SwingResult swing_align(const LabeledMesh& mesh, const Vec3& target_centroid) {
  SwingResult out;
  out.rotation.angle = swing_angle(rv_centroid(mesh), target_centroid);
  out.mesh = mesh;
  const Eigen::Matrix3d r = out.rotation.matrix();
  for (auto& v : out.mesh.vertices) v = r * v;
  return out;
}

double mean_sampled_distance(const LabeledMesh& mesh, const TargetFields& fields,
                             const FitConfig& cfg) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const auto t = target_of(mesh.labels[v]);
    if (!t || !cfg.is_enabled(*t)) continue;
    if (const ScalarField* d = fields.distance_for(*t)) {
      sum += sample_trilinear(*d, fields.ndc, mesh.vertices[v]) * fields.ndc.ndc_per_mm;
    } else if (const VectorField* g = fields.descent_for(*t)) {
      sum += sample_trilinear(*g, fields.ndc, mesh.vertices[v]).norm();
    } else {
      continue;
    }
    ++n;
  }
  return n == 0 ? 0.0 : sum / double(n);
}

LabeledMesh deform_in_field(const LabeledMesh& mesh, const TargetFields& fields,
                            const FitConfig& cfg, FitLog* log) {
  if (cfg.iterations < 0) throw Error("deform_in_field: iterations must be non-negative");
  if (!(cfg.step_clamp > 0.0)) throw Error("deform_in_field: step clamp must be positive");
  for (SurfaceTarget t : kAllTargets) {
    if (cfg.is_enabled(t) && !fields.descent_for(t)) {
      std::ostringstream msg;
      msg << "deform_in_field: no field for enabled target " << to_string(t);
      throw Error(msg.str());
    }
  }

  // Label groups are disjoint and each reads only its own field, so the
  // iteration loop can sit outside the per-label loop.
  static constexpr std::array<SurfaceTarget, 4> kOrder = {
      SurfaceTarget::LvEpi, SurfaceTarget::LvEndo, SurfaceTarget::RvEndo, SurfaceTarget::RvEpi};
  std::array<std::vector<int>, 4> groups;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    if (const auto t = target_of(mesh.labels[v])) groups[static_cast<int>(*t)].push_back(int(v));

  LabeledMesh out = mesh;
  if (log) {
    log->mean_distance.clear();
    log->mean_distance.push_back(mean_sampled_distance(out, fields, cfg));
  }
  for (int it = 0; it < cfg.iterations; ++it) {
    for (SurfaceTarget t : kOrder) {
      if (!cfg.is_enabled(t)) continue;
      const VectorField& g = *fields.descent_for(t);
      for (int v : groups[static_cast<int>(t)]) {
        Vec3 step = sample_trilinear(g, fields.ndc, out.vertices[v]);
        const double len = step.norm();
        if (len > cfg.step_clamp) step *= cfg.step_clamp / len;
        out.vertices[v] += step;
      }
    }
    if (log) log->mean_distance.push_back(mean_sampled_distance(out, fields, cfg));
  }
  return out;
}

}  // namespace bivfit
