#include <cmath>
#include <random>

#include "bivfit/gsn.hpp"

namespace bivfit {
namespace {

template <typename M>
double* write_block(const M& m, double* out) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) *out++ = m(r, c);
  return out;
}

template <typename M>
const double* read_block(M& m, const double* in) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = *in++;
  return in;
}

template <typename M>
void glorot(M& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

}  // namespace

void MlpParams::flatten(std::span<double> out) const {
  if (out.size() < kSize) throw Error("MlpParams::flatten: buffer too small");
  double* p = out.data();
  p = write_block(w1, p);
  p = write_block(b1, p);
  p = write_block(w2, p);
  p = write_block(b2, p);
  p = write_block(w3, p);
  write_block(b3, p);
}

void MlpParams::unflatten(std::span<const double> in) {
  if (in.size() < kSize) throw Error("MlpParams::unflatten: buffer too small");
  const double* p = in.data();
  p = read_block(w1, p);
  p = read_block(b1, p);
  p = read_block(w2, p);
  p = read_block(b2, p);
  p = read_block(w3, p);
  read_block(b3, p);
}

bool MlpParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w3.allFinite() && b3.allFinite();
}

MlpParams init_mlp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MlpParams p;
  glorot(p.w1, rng);
  glorot(p.w2, rng);
  return p;
}

Vec3 mlp_forward(const MlpParams& theta, const Vec3& x) {
  const Eigen::Matrix<double, 16, 1> a1 = (theta.w1 * x + theta.b1).cwiseMax(0.0);
  const Eigen::Matrix<double, 16, 1> a2 = (theta.w2 * a1 + theta.b2).cwiseMax(0.0);
  return theta.w3 * a2 + theta.b3;
}

std::vector<double> GsnStack::flatten() const {
  std::vector<double> out(kSize);
  for (std::size_t l = 0; l < kLayers; ++l)
    layers[l].flatten(std::span<double>(out).subspan(l * MlpParams::kSize, MlpParams::kSize));
  return out;
}

void GsnStack::unflatten(std::span<const double> in) {
  if (in.size() != kSize) throw Error("GsnStack::unflatten: wrong parameter count");
  for (std::size_t l = 0; l < kLayers; ++l)
    layers[l].unflatten(in.subspan(l * MlpParams::kSize, MlpParams::kSize));
}

GsnStack init_stack(std::uint64_t seed) {
  GsnStack s;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::vector<std::uint64_t> seeds(GsnStack::kLayers);
  seq.generate(seeds.begin(), seeds.end());
  for (std::size_t l = 0; l < GsnStack::kLayers; ++l) s.layers[l] = init_mlp(seeds[l]);
  return s;
}

}  // namespace bivfit
