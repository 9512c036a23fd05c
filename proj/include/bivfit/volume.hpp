#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bivfit/log.hpp"

namespace bivfit {

using Vec3 = Eigen::Vector3d;
using Index3 = std::array<int, 3>;

/// Anatomical tissue classes stored in a label volume.
enum class TissueLabel : std::uint8_t { Background = 0, LV = 1, RV = 2, Myo = 3 };

/// The four surfaces the template is fitted against.
enum class SurfaceTarget : std::uint8_t { LvEndo = 0, RvEndo = 1, LvEpi = 2, RvEpi = 3 };

inline constexpr std::array<SurfaceTarget, 4> kAllTargets = {
    SurfaceTarget::LvEndo, SurfaceTarget::RvEndo, SurfaceTarget::LvEpi, SurfaceTarget::RvEpi};

std::string_view to_string(SurfaceTarget target);

/// Shape and physical placement of a voxel grid. Storage is z-slowest, x-fastest.
struct GridGeometry {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm per voxel
  Vec3 origin{0.0, 0.0, 0.0};   // mm, centre of voxel (0,0,0)

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  Index3 coords(std::size_t i) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny),
            static_cast<int>(i / (nx * ny))};
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }
  Vec3 physical(int x, int y, int z) const {
    return origin + spacing.cwiseProduct(Vec3(x, y, z));
  }
  /// Physical distance between the first and last voxel centre along each axis.
  Vec3 extent() const {
    return spacing.cwiseProduct(Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1));
  }
  bool same_shape(const GridGeometry& other) const { return dims == other.dims; }
};

/// Dense voxel grid holding one value per voxel.
template <typename T>
struct Grid {
  GridGeometry geometry;
  std::vector<T> values;

  Grid() = default;
  explicit Grid(const GridGeometry& g, T fill = T{})
      : geometry(g), values(g.voxel_count(), fill) {}

  const Index3& dims() const { return geometry.dims; }
  std::size_t size() const { return values.size(); }
  T& at(int x, int y, int z) { return values[geometry.index(x, y, z)]; }
  const T& at(int x, int y, int z) const { return values[geometry.index(x, y, z)]; }
};

using LabelVolume = Grid<TissueLabel>;
using BinaryMask = Grid<std::uint8_t>;  // 0 = background, 1 = foreground
using ScalarField = Grid<double>;
using VectorField = Grid<Vec3>;

/// Throws unless dims >= 2 per axis, spacing > 0 and every label is valid.
void validate(const LabelVolume& volume);

/// Affine map between voxel-index space and the normalized cube [-1,1]^3.
/// ndc = scale .* index + translation. The scale is isotropic in physical
/// space, so `ndc_per_mm` converts physical lengths to NDC lengths.
struct NdcMap {
  Vec3 scale{1.0, 1.0, 1.0};
  Vec3 translation{0.0, 0.0, 0.0};
  double ndc_per_mm = 1.0;

  /// Centred map whose longest physical axis spans exactly [-1,1].
  static NdcMap for_grid(const GridGeometry& geometry);

  Vec3 to_ndc(const Vec3& index) const { return scale.cwiseProduct(index) + translation; }
  Vec3 to_index(const Vec3& ndc) const { return (ndc - translation).cwiseQuotient(scale); }
  Vec3 voxel_ndc(int x, int y, int z) const { return to_ndc(Vec3(x, y, z)); }
  /// Edge length of one voxel in NDC along the smallest-spacing axis.
  double voxel_size() const { return scale.cwiseAbs().minCoeff(); }
};

// ---------------------------------------------------------------------------
// Resampling and masks

/// Nearest-neighbour resampling onto an isotropic grid with the given spacing.
/// The origin is kept; the physical bounding box shrinks by less than one voxel.
LabelVolume resample_isotropic(const LabelVolume& volume, double target_mm);

/// Foreground region bounded by a surface target:
/// LV-endo -> {LV}, RV-endo -> {RV}, LV-epi -> {LV, Myo}, RV-epi -> {LV, RV, Myo}.
BinaryMask surface_mask(const LabelVolume& volume, SurfaceTarget target);

std::size_t count_foreground(const BinaryMask& mask);

// ---------------------------------------------------------------------------
// Distance transforms

/// Exact squared Euclidean distance (mm^2) from each voxel centre to the
/// nearest voxel whose mask value equals `site_value`. Voxels with no site
/// anywhere in the grid get +infinity. Separable lower-envelope algorithm.
std::vector<double> squared_edt(const BinaryMask& mask, std::uint8_t site_value);

/// Unsigned boundary distance: edt_fg + edt_bg in mm. When one class is
/// absent its term is replaced by the grid diagonal and a warning is logged.
ScalarField edt(const BinaryMask& mask);

/// True when the mask is all-foreground or all-background.
bool is_degenerate(const BinaryMask& mask);

/// Boundary distance shifted down by the smallest voxel spacing, so that it is
/// zero on the two voxel layers straddling the interface between the classes.
ScalarField surface_distance(const BinaryMask& mask);

// ---------------------------------------------------------------------------
// Gradients and sampling

/// Spatial gradient of `d` in NDC units (the field value is converted from mm
/// to NDC first). Central differences inside, one-sided at the borders.
VectorField spatial_gradient(const ScalarField& d, const NdcMap& ndc);

/// Descent displacement field g = -d * grad(d) / max(|grad(d)|, 1e-6), with d
/// in NDC units. Adding g(p) to p moves p approximately onto the zero set of d.
/// Requires at least 3 voxels per axis.
VectorField gradient_field(const ScalarField& d, const NdcMap& ndc);

/// Trilinear interpolation at an NDC point. Points outside the hull of voxel
/// centres are clamped onto it. Throws on non-finite input.
Vec3 sample_trilinear(const VectorField& field, const NdcMap& ndc, const Vec3& p);
double sample_trilinear(const ScalarField& field, const NdcMap& ndc, const Vec3& p);

// ---------------------------------------------------------------------------
// File I/O: `<stem>.json` header plus `<stem>.raw` little-endian payload.

/// Accepts the header path, the payload path or the bare stem.
LabelVolume load_volume(const std::filesystem::path& path);
void save_volume(const LabelVolume& volume, const std::filesystem::path& path);

ScalarField load_scalar_field(const std::filesystem::path& path);
void save_scalar_field(const ScalarField& field, const std::filesystem::path& path);

VectorField load_vector_field(const std::filesystem::path& path);
void save_vector_field(const VectorField& field, const std::filesystem::path& path);

}  // namespace bivfit
