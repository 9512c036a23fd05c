#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bivfit/gsn.hpp"

namespace bivfit {
namespace {

struct Evaluation {
  EpochRecord record;
  std::vector<double> grad;
};

Evaluation evaluate(const GsnStack& stack, std::span<const TrainCase> cases, const TrainConfig& cfg,
                    int epoch) {
  Evaluation out;
  out.record.epoch = epoch;
  out.grad.assign(GsnStack::kSize, 0.0);
  const double inv = 1.0 / double(cases.size());
  for (const TrainCase& c : cases) {
    const Gradient g = backprop(stack, c.mesh, c.clouds, cfg.weights);
    out.record.loss += g.loss * inv;
    for (const LevelLoss& l : g.levels) {
      out.record.chamfer += l.chamfer * inv / double(g.levels.size());
      out.record.laplacian += l.laplacian * inv / double(g.levels.size());
    }
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += g.params[k] * inv;
  }
  return out;
}

bool finite(const Evaluation& e) {
  if (!std::isfinite(e.record.loss)) return false;
  for (double g : e.grad)
    if (!std::isfinite(g)) return false;
  return true;
}

}  // namespace

TrainResult train(std::span<const TrainCase> cases, const TrainConfig& cfg) {
  if (cases.empty()) throw Error("train: dataset is empty");
  if (cfg.epochs < 1) throw Error("train: epochs must be at least 1");
  if (!(cfg.learning_rate >= 0.0)) throw Error("train: learning rate must be non-negative");

  GsnStack stack = init_stack(cfg.seed);
  std::vector<double> theta = stack.flatten();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);

  TrainResult result;
  auto record = [&](const Evaluation& e) {
    if (!finite(e)) {
      std::ostringstream msg;
      msg << "train: loss diverged at epoch " << e.record.epoch;
      throw TrainingDiverged(msg.str(), result.history);
    }
    result.history.push_back(e.record);
    if (result.history.size() == 1 || e.record.loss < result.best_loss) {
      result.best_loss = e.record.loss;
      result.best_epoch = e.record.epoch;
      result.best = stack;
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Evaluation e = evaluate(stack, cases, cfg, epoch);
    record(e);
    const int step = epoch + 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, step);
    const double c2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] -= cfg.learning_rate * cfg.weight_decay * theta[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * e.grad[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * e.grad[k] * e.grad[k];
      theta[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
    }
    stack.unflatten(theta);
    std::ostringstream msg;
    msg << "epoch " << step << "/" << cfg.epochs << " loss " << e.record.loss;
    log_debug(msg.str());
  }
  record(evaluate(stack, cases, cfg, cfg.epochs));
  result.last = stack;
  return result;
}

void save_history(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("history: cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,chamfer,laplacian\n";
  for (const auto& r : history)
    out << r.epoch << ',' << r.loss << ',' << r.chamfer << ',' << r.laplacian << '\n';
}

void save_checkpoint(const GsnStack& stack, const CheckpointInfo& info,
                     const std::filesystem::path& path) {
  nlohmann::json header = {
      {"format", "bivfit-gsn"},
      {"version", 1},
      {"architecture",
       {{"layers", GsnStack::kLayers}, {"sizes", {3, 16, 16, 3}}, {"activation", "relu"}}},
      {"params", GsnStack::kSize},
      {"dtype", "f32"},
      {"seed", info.seed},
      {"epoch", info.epoch},
      {"loss", info.loss},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out << header.dump() << '\n';
  for (double p : stack.flatten()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p));
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
  }
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

GsnStack load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint: malformed header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != "bivfit-gsn" ||
      header.value("params", std::size_t{0}) != GsnStack::kSize)
    throw Error("checkpoint: " + path.string() + " is not a compatible GSN checkpoint");
  std::vector<double> theta(GsnStack::kSize);
  for (double& p : theta) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
      throw Error("checkpoint: payload of " + path.string() + " is truncated");
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                               (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    p = std::bit_cast<float>(bits);
  }
  GsnStack stack;
  stack.unflatten(theta);
  if (info) {
    info->seed = header.value("seed", std::uint64_t{0});
    info->epoch = header.value("epoch", 0);
    info->loss = header.value("loss", 0.0);
  }
  return stack;
}

}  // namespace bivfit
