#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bivfit/mesh.hpp"
#include "bivfit/volume.hpp"

namespace bivfit {

// ---------------------------------------------------------------------------
// Vertex-update network

/// 3 -> 16 -> 16 -> 3 perceptron with ReLU hidden units and a linear output.
struct MlpParams {
  static constexpr int kHidden = 16;
  static constexpr std::size_t kSize = 16 * 3 + 16 + 16 * 16 + 16 + 3 * 16 + 3;

  Eigen::Matrix<double, 16, 3> w1 = Eigen::Matrix<double, 16, 3>::Zero();
  Eigen::Matrix<double, 16, 1> b1 = Eigen::Matrix<double, 16, 1>::Zero();
  Eigen::Matrix<double, 16, 16> w2 = Eigen::Matrix<double, 16, 16>::Zero();
  Eigen::Matrix<double, 16, 1> b2 = Eigen::Matrix<double, 16, 1>::Zero();
  Eigen::Matrix<double, 3, 16> w3 = Eigen::Matrix<double, 3, 16>::Zero();
  Eigen::Vector3d b3 = Eigen::Vector3d::Zero();

  /// Row-major weights then bias, layer by layer.
  void flatten(std::span<double> out) const;
  void unflatten(std::span<const double> in);
  bool all_finite() const;
};

/// Glorot-uniform hidden layers, zero biases and a zero output layer.
MlpParams init_mlp(std::uint64_t seed);

Vec3 mlp_forward(const MlpParams& theta, const Vec3& x);

/// The two GSN layers.
struct GsnStack {
  static constexpr std::size_t kLayers = 2;
  static constexpr std::size_t kSize = kLayers * MlpParams::kSize;

  std::array<MlpParams, kLayers> layers;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> in);
};

GsnStack init_stack(std::uint64_t seed);

/// Midpoint subdivision followed by the degree-normalised update
/// v_i += sum_j h(v_j - v_i) / sqrt(deg_i * deg_j) over the subdivided graph.
LabeledMesh gsn_layer(const LabeledMesh& mesh, const MlpParams& theta);

/// Output of each layer in order; the last entry is the final mesh.
std::vector<LabeledMesh> gsn_forward(const LabeledMesh& mesh, const GsnStack& stack,
                                     std::size_t layers = GsnStack::kLayers);

// ---------------------------------------------------------------------------
// Supervision

/// Ground-truth points per surface target, in NDC.
struct PointCloudSet {
  std::array<std::vector<Vec3>, 4> points;

  const std::vector<Vec3>& operator[](SurfaceTarget t) const { return points[static_cast<int>(t)]; }
  std::vector<Vec3>& operator[](SurfaceTarget t) { return points[static_cast<int>(t)]; }
};

/// Centres of mask voxels with at least one background 6-neighbour (outside the
/// grid counts as background), in NDC. Seeded uniform subsample above max_points.
std::vector<Vec3> extract_point_cloud(const LabelVolume& volume, SurfaceTarget target,
                                      const NdcMap& ndc, std::size_t max_points,
                                      std::uint64_t seed);
PointCloudSet extract_point_clouds(const LabelVolume& volume, const NdcMap& ndc,
                                   std::size_t max_points, std::uint64_t seed);

struct LossValue {
  double value = 0.0;
  std::vector<Vec3> grad;  // d value / d vertex
};

/// Nearest-neighbour pairs of one Chamfer evaluation, per target.
struct ChamferMatch {
  struct Group {
    std::vector<int> vertices;       // mesh vertex ids carrying the label
    std::vector<int> vertex_to_point;  // nearest point per group vertex
    std::vector<int> point_to_vertex;  // nearest group vertex (index into `vertices`) per point
  };
  std::array<Group, 4> groups;
};

ChamferMatch chamfer_match(const LabeledMesh& mesh, const PointCloudSet& clouds);

/// Symmetric squared-distance Chamfer summed over the four targets, each
/// direction divided by its set size. Targets with an empty side are skipped.
LossValue chamfer_loss(const LabeledMesh& mesh, const PointCloudSet& clouds,
                       const ChamferMatch& match);
LossValue chamfer_loss(const LabeledMesh& mesh, const PointCloudSet& clouds);

/// Cotangent weights (cot a + cot b) / (4 A_i) per directed neighbour slot of
/// the edge table, with A_i the total area of the faces around vertex i.
struct CotanWeights {
  EdgeTable edges;
  std::vector<double> weight;  // aligned with edges.neighbors
};

CotanWeights cotan_weights(const LabeledMesh& mesh);

/// Mean over vertices of |sum_j w_ij (v_j - v_i)|. The gradient treats the
/// weights as constants.
LossValue laplacian_loss(const LabeledMesh& mesh, const CotanWeights& weights);
LossValue laplacian_loss(const LabeledMesh& mesh);

struct LossWeights {
  double chamfer = 0.56;
  double laplacian = 0.12;
};

struct LevelLoss {
  double chamfer = 0.0;
  double laplacian = 0.0;
};

struct TotalLoss {
  double value = 0.0;
  std::vector<LevelLoss> levels;
  std::vector<std::vector<Vec3>> grad;  // per level, d value / d vertex
};

/// Neighbour matches and cotangent weights of every level, captured at one
/// parameter point so that nearby evaluations differentiate the same function.
struct FrozenState {
  std::vector<ChamferMatch> matches;
  std::vector<CotanWeights> weights;
};

/// Mean over levels of (w.chamfer * chamfer + w.laplacian * laplacian).
/// Uses `frozen` when given, otherwise matches afresh (and stores them in
/// `capture` when given).
TotalLoss total_loss(std::span<const LabeledMesh> levels, const PointCloudSet& clouds,
                     const LossWeights& w, const FrozenState* frozen = nullptr,
                     FrozenState* capture = nullptr);

struct Gradient {
  double loss = 0.0;
  std::vector<LevelLoss> levels;
  std::vector<double> params;  // d loss / d stack.flatten()
};

/// Forward pass, total loss and reverse-mode parameter gradient.
Gradient backprop(const GsnStack& stack, const LabeledMesh& input, const PointCloudSet& clouds,
                  const LossWeights& w, const FrozenState* frozen = nullptr,
                  FrozenState* capture = nullptr);

// ---------------------------------------------------------------------------
// Training

struct TrainCase {
  std::string id;
  LabeledMesh mesh;  // adjusted template
  PointCloudSet clouds;
};

struct TrainConfig {
  int epochs = 120;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  LossWeights weights;
};

struct EpochRecord {
  int epoch = 0;  // number of updates applied before this evaluation
  double loss = 0.0;
  double chamfer = 0.0;
  double laplacian = 0.0;
};

struct TrainResult {
  GsnStack best;
  GsnStack last;
  int best_epoch = 0;
  double best_loss = 0.0;
  std::vector<EpochRecord> history;  // epochs + 1 entries
};

/// Raised when the loss or a gradient becomes non-finite; carries the history.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::vector<EpochRecord> history_;
};

/// Full-batch AdamW with decoupled weight decay, one step per epoch.
TrainResult train(std::span<const TrainCase> cases, const TrainConfig& cfg);

/// CSV with columns epoch,loss,chamfer,laplacian.
void save_history(std::span<const EpochRecord> history, const std::filesystem::path& path);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  int epoch = 0;
  double loss = 0.0;
};

/// JSON header line plus little-endian f32 payload (`.gsn`).
void save_checkpoint(const GsnStack& stack, const CheckpointInfo& info,
                     const std::filesystem::path& path);
GsnStack load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace bivfit
