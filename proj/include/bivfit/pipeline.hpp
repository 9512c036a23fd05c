#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bivfit/fit.hpp"
#include "bivfit/gsn.hpp"
#include "bivfit/mesh.hpp"
#include "bivfit/metrics.hpp"
#include "bivfit/volume.hpp"

namespace bivfit {

/// Ablation schemes, numbered as in the evaluation tables.
enum class Scheme {
  BaseLoop = 1,  // unadjusted template + Loop subdivision x2
  FitLoop = 2,   // fit + Loop subdivision x2
  FitOnly = 3,   // fit
  FitGsn1 = 4,   // fit + one GSN layer
  FitGsn2 = 5,   // fit + two GSN layers
};

Scheme scheme_from_int(int id);
bool scheme_needs_checkpoint(Scheme s);
std::string_view describe(Scheme s);

struct PipelineConfig {
  FitConfig fit;
  bool align = true;
  bool deform = true;
  double target_spacing = 2.0;  // mm, isotropic working resolution
  double smooth_lambda = 0.13;
  int smooth_iterations = 10;
};

/// Volume at the working resolution with its NDC frame and target fields.
struct PreparedCase {
  LabelVolume volume;
  NdcMap ndc;
  TargetFields fields;
};

/// Resamples to isotropic target_spacing (unless already there) and builds the fields.
PreparedCase prepare_case(const LabelVolume& volume, double target_spacing);

struct FitResult {
  LabeledMesh mesh;
  SwingRotation rotation;
  FitLog log;
};

/// Swing alignment (if enabled) followed by gradient-field deformation (if enabled).
FitResult fit_template(const LabeledMesh& templ, const PreparedCase& c, const PipelineConfig& cfg);

struct Reconstruction {
  LabeledMesh mesh;
  FitResult fit;
  double seconds = 0.0;  // deformation, subdivision and smoothing
};

/// Runs one ablation scheme end to end, finishing with the Laplacian filter.
/// `stack` is required for the learned schemes.
Reconstruction reconstruct(const PreparedCase& c, const LabeledMesh& templ, Scheme scheme,
                           const GsnStack* stack, const PipelineConfig& cfg);

/// Adjusted template plus ground-truth point clouds for GSN training.
TrainCase make_train_case(const std::string& id, const PreparedCase& c, const LabeledMesh& templ,
                          const PipelineConfig& cfg, std::size_t max_points, std::uint64_t seed);

}  // namespace bivfit
