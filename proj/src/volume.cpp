#include "bivfit/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bivfit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform over a strided line:
//   out[q] = min_p ( w2 * (q - p)^2 + f[p] )
// Lower envelope of parabolas rooted at finite samples.
struct EnvelopeScratch {
  std::vector<double> f;
  std::vector<int> sites;
  std::vector<double> bounds;
  void resize(int n) {
    f.resize(n);
    sites.resize(n);
    bounds.resize(n + 1);
  }
};

void transform_line(double* data, std::ptrdiff_t stride, int n, double w2, EnvelopeScratch& s) {
  for (int q = 0; q < n; ++q) s.f[q] = data[q * stride];

  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (s.f[q] == kInf) continue;
    const double fq = s.f[q] + w2 * double(q) * double(q);
    double boundary = -kInf;
    while (k >= 0) {
      const int v = s.sites[k];
      const double fv = s.f[v] + w2 * double(v) * double(v);
      boundary = (fq - fv) / (2.0 * w2 * double(q - v));
      if (boundary <= s.bounds[k]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      s.sites[0] = q;
      s.bounds[0] = -kInf;
    } else {
      ++k;
      s.sites[k] = q;
      s.bounds[k] = boundary;
    }
    s.bounds[k + 1] = kInf;
  }
  if (k < 0) return;  // no sites on this line: leave +inf

  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (s.bounds[j + 1] < double(q)) ++j;
    const double dq = double(q - s.sites[j]);
    data[q * stride] = w2 * dq * dq + s.f[s.sites[j]];
  }
}

template <typename T>
T lerp(const T& a, const T& b, double t) {
  return a * (1.0 - t) + b * t;
}

template <typename T>
T trilinear(const Grid<T>& field, const NdcMap& ndc, const Vec3& p) {
  if (!p.allFinite()) throw Error("sample_trilinear: non-finite sample point");
  const auto& dims = field.geometry.dims;
  const Vec3 idx = ndc.to_index(p);
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double hi = double(dims[a] - 1);
    const double c = std::clamp(idx[a], 0.0, hi);
    int i0 = static_cast<int>(std::floor(c));
    if (i0 >= dims[a] - 1) i0 = std::max(dims[a] - 2, 0);
    base[a] = i0;
    frac[a] = c - double(i0);
  }
  const auto& g = field.geometry;
  auto v = [&](int dx, int dy, int dz) -> const T& {
    return field.values[g.index(base[0] + dx, base[1] + dy, base[2] + dz)];
  };
  const T c00 = lerp(v(0, 0, 0), v(1, 0, 0), frac[0]);
  const T c10 = lerp(v(0, 1, 0), v(1, 1, 0), frac[0]);
  const T c01 = lerp(v(0, 0, 1), v(1, 0, 1), frac[0]);
  const T c11 = lerp(v(0, 1, 1), v(1, 1, 1), frac[0]);
  const T c0 = lerp(c00, c10, frac[1]);
  const T c1 = lerp(c01, c11, frac[1]);
  return lerp(c0, c1, frac[2]);
}

}  // namespace

std::string_view to_string(SurfaceTarget target) {
  switch (target) {
    case SurfaceTarget::LvEndo: return "lv_endo";
    case SurfaceTarget::RvEndo: return "rv_endo";
    case SurfaceTarget::LvEpi: return "lv_epi";
    case SurfaceTarget::RvEpi: return "rv_epi";
  }
  return "unknown";
}

void validate(const LabelVolume& volume) {
  const auto& g = volume.geometry;
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] < 2) throw Error("label volume: every axis needs at least 2 voxels");
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a]))
      throw Error("label volume: spacing must be positive and finite");
  }
  if (volume.values.size() != g.voxel_count())
    throw Error("label volume: payload size does not match dims");
  for (auto label : volume.values) {
    if (static_cast<std::uint8_t>(label) > 3) {
      std::ostringstream msg;
      msg << "label volume: label value " << int(static_cast<std::uint8_t>(label))
          << " outside {0,1,2,3}";
      throw Error(msg.str());
    }
  }
}

NdcMap NdcMap::for_grid(const GridGeometry& geometry) {
  const Vec3 extent = geometry.extent();
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0)) throw Error("ndc map: grid has zero physical extent");
  NdcMap map;
  map.ndc_per_mm = 2.0 / longest;
  for (int a = 0; a < 3; ++a) {
    map.scale[a] = map.ndc_per_mm * geometry.spacing[a];
    map.translation[a] = -map.scale[a] * 0.5 * double(geometry.dims[a] - 1);
  }
  return map;
}

LabelVolume resample_isotropic(const LabelVolume& volume, double target_mm) {
  if (!(target_mm > 0.0)) throw Error("resample_isotropic: target spacing must be positive");
  const auto& in = volume.geometry;
  const Vec3 extent = in.extent();
  GridGeometry out;
  out.origin = in.origin;
  out.spacing = Vec3::Constant(target_mm);
  for (int a = 0; a < 3; ++a) {
    if (target_mm > extent[a])
      throw Error("resample_isotropic: target spacing exceeds the physical extent");
    out.dims[a] = static_cast<int>(std::floor(extent[a] / target_mm + 1e-9)) + 1;
  }
  LabelVolume result(out);
  std::vector<int> lookup[3];
  for (int a = 0; a < 3; ++a) {
    lookup[a].resize(out.dims[a]);
    for (int i = 0; i < out.dims[a]; ++i) {
      const double src = (double(i) * target_mm) / in.spacing[a];
      lookup[a][i] = std::clamp(static_cast<int>(std::lround(src)), 0, in.dims[a] - 1);
    }
  }
  for (int z = 0; z < out.dims[2]; ++z)
    for (int y = 0; y < out.dims[1]; ++y)
      for (int x = 0; x < out.dims[0]; ++x)
        result.at(x, y, z) = volume.at(lookup[0][x], lookup[1][y], lookup[2][z]);
  return result;
}

BinaryMask surface_mask(const LabelVolume& volume, SurfaceTarget target) {
  BinaryMask mask(volume.geometry, 0);
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const auto label = volume.values[i];
    bool inside = false;
    switch (target) {
      case SurfaceTarget::LvEndo: inside = label == TissueLabel::LV; break;
      case SurfaceTarget::RvEndo: inside = label == TissueLabel::RV; break;
      case SurfaceTarget::LvEpi:
        inside = label == TissueLabel::LV || label == TissueLabel::Myo;
        break;
      case SurfaceTarget::RvEpi: inside = label != TissueLabel::Background; break;
    }
    mask.values[i] = inside ? 1 : 0;
  }
  return mask;
}

std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values.begin(), mask.values.end(), [](auto v) { return v != 0; }));
}

std::vector<double> squared_edt(const BinaryMask& mask, std::uint8_t site_value) {
  const auto& g = mask.geometry;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<double> d(mask.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = (mask.values[i] != 0) == (site_value != 0) ? 0.0 : kInf;

  EnvelopeScratch scratch;
  scratch.resize(std::max({nx, ny, nz}));
  const double wx = g.spacing[0] * g.spacing[0];
  const double wy = g.spacing[1] * g.spacing[1];
  const double wz = g.spacing[2] * g.spacing[2];
  const std::ptrdiff_t sx = 1, sy = nx, sz = std::ptrdiff_t(nx) * ny;

  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y) transform_line(&d[g.index(0, y, z)], sx, nx, wx, scratch);
  for (int z = 0; z < nz; ++z)
    for (int x = 0; x < nx; ++x) transform_line(&d[g.index(x, 0, z)], sy, ny, wy, scratch);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) transform_line(&d[g.index(x, y, 0)], sz, nz, wz, scratch);
  return d;
}

bool is_degenerate(const BinaryMask& mask) {
  const auto fg = count_foreground(mask);
  return fg == 0 || fg == mask.size();
}

ScalarField edt(const BinaryMask& mask) {
  const auto fg = squared_edt(mask, 1);
  const auto bg = squared_edt(mask, 0);
  const double sentinel = mask.geometry.extent().norm();
  if (is_degenerate(mask)) {
    log_warning(count_foreground(mask) == 0
                    ? "edt: mask has no foreground voxels; using grid-diagonal sentinel"
                    : "edt: mask has no background voxels; using grid-diagonal sentinel");
  }
  ScalarField out(mask.geometry, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = fg[i] == kInf ? sentinel : std::sqrt(fg[i]);
    const double b = bg[i] == kInf ? sentinel : std::sqrt(bg[i]);
    out.values[i] = a + b;
  }
  return out;
}

ScalarField surface_distance(const BinaryMask& mask) {
  ScalarField d = edt(mask);
  const double shift = mask.geometry.spacing.minCoeff();
  for (auto& v : d.values) v = std::max(v - shift, 0.0);
  return d;
}

VectorField spatial_gradient(const ScalarField& d, const NdcMap& ndc) {
  const auto& g = d.geometry;
  VectorField out(g, Vec3::Zero());
  const int n[3] = {g.dims[0], g.dims[1], g.dims[2]};
  const std::ptrdiff_t stride[3] = {1, n[0], std::ptrdiff_t(n[0]) * n[1]};
  for (int z = 0; z < n[2]; ++z)
    for (int y = 0; y < n[1]; ++y)
      for (int x = 0; x < n[0]; ++x) {
        const std::size_t i = g.index(x, y, z);
        const int c[3] = {x, y, z};
        Vec3 grad;
        for (int a = 0; a < 3; ++a) {
          double diff = 0.0;
          if (n[a] < 2) {
            diff = 0.0;
          } else if (c[a] == 0) {
            diff = d.values[i + stride[a]] - d.values[i];
          } else if (c[a] == n[a] - 1) {
            diff = d.values[i] - d.values[i - stride[a]];
          } else {
            diff = 0.5 * (d.values[i + stride[a]] - d.values[i - stride[a]]);
          }
          grad[a] = diff * ndc.ndc_per_mm / ndc.scale[a];
        }
        out.values[i] = grad;
      }
  return out;
}

VectorField gradient_field(const ScalarField& d, const NdcMap& ndc) {
  for (int a = 0; a < 3; ++a)
    if (d.geometry.dims[a] < 3) throw Error("gradient_field: every axis needs at least 3 voxels");
  VectorField grad = spatial_gradient(d, ndc);
  constexpr double kEps = 1e-6;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double dist = d.values[i] * ndc.ndc_per_mm;
    const Vec3& gr = grad.values[i];
    grad.values[i] = -dist * gr / std::max(gr.norm(), kEps);
  }
  return grad;
}

Vec3 sample_trilinear(const VectorField& field, const NdcMap& ndc, const Vec3& p) {
  return trilinear(field, ndc, p);
}

double sample_trilinear(const ScalarField& field, const NdcMap& ndc, const Vec3& p) {
  return trilinear(field, ndc, p);
}

}  // namespace bivfit
