#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bivfit/mesh.hpp"
#include "bivfit/volume.hpp"

namespace bivfit {

/// 2|a & b| / (|a| + |b|); 1 when both are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Foreground voxels with a background 6-neighbour (outside the grid counts as background).
BinaryMask boundary_voxels(const BinaryMask& mask);

struct HausdorffResult {
  double max = 0.0;  // voxels
  double p95 = 0.0;  // larger of the two directed 95th percentiles
};

/// Symmetric Hausdorff distance between the boundary voxel sets, in voxel units.
HausdorffResult hausdorff(const BinaryMask& a, const BinaryMask& b);

/// Mean exact point-to-mesh distance over `samples` (NDC), converted to mm.
double asd(const LabeledMesh& mesh, std::span<const Vec3> samples, const NdcMap& ndc);

/// Samples n ground-truth boundary voxel centres (union over the four surface
/// targets) and returns their mean distance to the mesh in mm.
double asd(const LabeledMesh& mesh, const LabelVolume& gt, const NdcMap& ndc,
           std::size_t n = 5000, std::uint64_t seed = 0);

struct QualityStats {
  std::vector<double> per_face;
  double mean = 0.0;
};

/// Longest edge / (2 sqrt(3) inradius); 1 for an equilateral triangle.
QualityStats aspect_ratio(const LabeledMesh& mesh);

/// (2 / sqrt(3)) * min over corners of sin(corner angle); 1 for an equilateral triangle.
QualityStats scaled_jacobian(const LabeledMesh& mesh);

/// Mean dot product of unit face normals across edges with exactly two faces.
double normal_consistency(const LabeledMesh& mesh);

/// Fraction of faces touching an edge shared by more than two faces.
double non_manifold_ratio(const LabeledMesh& mesh);

/// Runs f and returns its result with the elapsed wall time in seconds.
template <typename F>
auto timed(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
    std::forward<F>(f)();
    return seconds();
  } else {
    auto result = std::forward<F>(f)();
    const double s = seconds();
    return std::pair<decltype(result), double>(std::move(result), s);
  }
}

struct MetricsReport {
  std::string case_id;
  int scheme = 0;
  std::size_t vertices = 0;
  std::size_t faces = 0;
  std::array<double, 3> dice{};       // LV, RV, Myo
  double dice_mean = 0.0;
  std::array<double, 3> hausdorff{};  // voxels
  double hausdorff_mean = 0.0;
  double hausdorff95_mean = 0.0;
  double asd_mm = 0.0;
  double aspect_ratio = 0.0;
  double scaled_jacobian = 0.0;
  double normal_consistency = 0.0;
  double non_manifold_ratio = 0.0;
  double inference_seconds = 0.0;
};

struct EvalOptions {
  std::size_t asd_samples = 5000;
  std::uint64_t seed = 0;
};

/// Voxelizes the mesh on the ground-truth grid and computes every metric
/// except the inference time.
MetricsReport evaluate(const LabeledMesh& mesh, const LabelVolume& gt, const NdcMap& ndc,
                       const EvalOptions& opts = {});

std::string to_json(const MetricsReport& report);
void save_report(const MetricsReport& report, const std::filesystem::path& path);

std::vector<std::string> csv_columns();
std::vector<double> csv_values(const MetricsReport& report);

/// One row per report plus `mean` and `std` footer rows (omitted when empty).
void save_csv(std::span<const MetricsReport> reports, const std::filesystem::path& path);

}  // namespace bivfit
