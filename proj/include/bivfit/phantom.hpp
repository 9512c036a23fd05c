#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bivfit/mesh.hpp"
#include "bivfit/volume.hpp"

namespace bivfit {

/// Synthetic bi-ventricular geometry. Lengths in mm, angles in radians.
/// The LV long axis runs along +Z through the grid centre (before tilt); the
/// RV sits at azimuth `swing` around it. Everything above the base plane is cut.
struct PhantomSpec {
  Index3 dims{128, 128, 128};
  double spacing = 2.0;

  Vec3 lv_endo_axes{25.0, 25.0, 55.0};  // x, y, z semi-axes
  double lv_wall = 10.0;
  double lv_center_z = 20.0;   // LV ellipsoid centre relative to the grid centre
  double base_height = 25.0;   // base plane above the LV centre

  double rv_offset = 30.0;                 // RV centre distance from the LV axis
  Vec3 rv_endo_axes{28.0, 42.0, 50.0};     // radial, tangential, z
  double rv_center_dz = -5.0;              // RV centre height relative to the LV centre
  double rv_wall = 3.0;

  double swing = 0.0;  // RV azimuth about Z
  double tilt = 0.0;   // long-axis tilt about X
  double variability = 0.0;  // relative random perturbation of the shape parameters
  std::uint64_t seed = 0;
};

/// Ellipsoid {p : |R^T (p - c) ./ axes| <= 1} in physical mm.
struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 axes = Vec3::Ones();

  bool contains(const Vec3& p) const;
  /// Exact Euclidean distance from p to the ellipsoid surface.
  double distance(const Vec3& p) const;
};

/// Closed-form description of the phantom surfaces (physical mm).
struct AnalyticSurfaces {
  Ellipsoid lv_endo, lv_epi, rv_endo, rv_epi;
  Vec3 base_point = Vec3::Zero();
  Vec3 base_normal = Vec3::UnitZ();  // points out of the heart

  bool below_base(const Vec3& p) const { return (p - base_point).dot(base_normal) <= 0.0; }
  /// Distance to the nearest of the four ellipsoids and the base plane.
  double distance(const Vec3& p) const;
  /// Tissue label of a physical point.
  TissueLabel label_at(const Vec3& p) const;
};

struct Phantom {
  LabelVolume volume;
  AnalyticSurfaces surfaces;
};

/// Throws unless the parameters are positive and the RV cavity touches the LV wall.
void validate(const PhantomSpec& spec);

/// Concrete surfaces after applying the seeded variability.
AnalyticSurfaces phantom_surfaces(const PhantomSpec& spec);

Phantom generate_phantom(const PhantomSpec& spec);

struct DegradationSpec {
  int slice_multiplier = 1;
  double max_shift_mm = 0.0;
  int drop_apical = 0;  // blanked slices at low z
  int drop_basal = 0;   // blanked slices at high z
};

/// Keeps every k-th z slice, shifts each retained slice in-plane by a random
/// whole-voxel offset of at most max_shift_mm, and blanks end slices.
LabelVolume degrade(const LabelVolume& volume, const DegradationSpec& spec, std::uint64_t seed);

// JSON for specs and surfaces.
PhantomSpec load_phantom_spec(const std::filesystem::path& path);
void save_phantom_spec(const PhantomSpec& spec, const std::filesystem::path& path);
DegradationSpec degradation_from_json(const std::string& text);
std::string to_json(const AnalyticSurfaces& surfaces);
std::string to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const std::string& text);

struct TemplateOptions {
  int level = 0;      // each level doubles the segment and ring counts
  int segments = 16;  // vertices per ring
  int rings = 6;      // rings per component, the top one on the valve plane
};

/// Four open cup-shaped components (LV endo, LV epi, RV endo, RV epi) built
/// from the default phantom's surfaces, in that phantom's NDC frame. The top
/// ring of each cup is labelled valve; RV vertices that would fall inside the
/// LV epicardium are pushed onto it, and those of the RV-epi cup are labelled LV-epi.
LabeledMesh procedural_template(const TemplateOptions& opts = {});

}  // namespace bivfit
