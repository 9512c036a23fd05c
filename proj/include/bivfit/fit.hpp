#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bivfit/mesh.hpp"
#include "bivfit/volume.hpp"

namespace bivfit {

/// Rigid rotation about the Z axis through the NDC origin.
struct SwingRotation {
  double angle = 0.0;  // radians, in (-pi, pi]

  Eigen::Matrix3d matrix() const;
  Vec3 apply(const Vec3& p) const { return matrix() * p; }
};

struct FitConfig {
  int iterations = 10;
  std::array<bool, 4> enabled{true, true, true, true};  // indexed by SurfaceTarget
  double step_clamp = 0.25;                              // NDC per iteration

  bool is_enabled(SurfaceTarget t) const { return enabled[static_cast<int>(t)]; }
};

/// Per-target descent fields and the distance fields they were built from.
struct TargetFields {
  NdcMap ndc;
  std::array<std::optional<VectorField>, 4> descent;
  std::array<std::optional<ScalarField>, 4> distance;  // mm

  const VectorField* descent_for(SurfaceTarget t) const;
  const ScalarField* distance_for(SurfaceTarget t) const;
};

/// Builds surface distance and descent fields for every target of the volume.
TargetFields build_target_fields(const LabelVolume& volume, const NdcMap& ndc);

/// Mean of the RV-epi vertex positions.
Vec3 rv_centroid(const LabeledMesh& mesh);

/// Mean NDC position of the RV voxel centres.
Vec3 seg_rv_centroid(const LabelVolume& volume, const NdcMap& ndc);

/// Signed XY angle from `from` to `to`. Throws if either projection is shorter than 1e-6.
double swing_angle(const Vec3& from, const Vec3& to);

struct SwingResult {
  LabeledMesh mesh;
  SwingRotation rotation;
};

/// Rotates the mesh about Z so the XY direction of its RV-epi centroid matches
/// that of `target_centroid`.
SwingResult swing_align(const LabeledMesh& mesh, const Vec3& target_centroid);

/// Mean sampled distance (NDC) of the moved vertices, before the first
/// iteration and after each one.
struct FitLog {
  std::vector<double> mean_distance;
};

/// Moves every vertex of an enabled target label by its clamped sampled
/// descent vector, cfg.iterations times. Valve vertices never move.
LabeledMesh deform_in_field(const LabeledMesh& mesh, const TargetFields& fields,
                            const FitConfig& cfg, FitLog* log = nullptr);

/// Mean over the vertices of enabled targets of the sampled distance (NDC).
/// Falls back to the descent magnitude for targets without a distance field.
double mean_sampled_distance(const LabeledMesh& mesh, const TargetFields& fields,
                             const FitConfig& cfg);

}  // namespace bivfit
