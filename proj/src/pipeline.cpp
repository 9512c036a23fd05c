#include "bivfit/pipeline.hpp"

#include <cmath>
#include <sstream>

namespace bivfit {

Scheme scheme_from_int(int id) {
  if (id < 1 || id > 5) {
    std::ostringstream msg;
    msg << "unknown scheme " << id << " (expected 1..5)";
    throw Error(msg.str());
  }
  return static_cast<Scheme>(id);
}

bool scheme_needs_checkpoint(Scheme s) { return s == Scheme::FitGsn1 || s == Scheme::FitGsn2; }

std::string_view describe(Scheme s) {
  switch (s) {
    case Scheme::BaseLoop: return "base template + loop subdivision x2";
    case Scheme::FitLoop: return "gradient deformation + loop subdivision x2";
    case Scheme::FitOnly: return "gradient deformation";
    case Scheme::FitGsn1: return "gradient deformation + single GSN";
    case Scheme::FitGsn2: return "gradient deformation + double GSN";
  }
  return "";
}

PreparedCase prepare_case(const LabelVolume& volume, double target_spacing) {
  validate(volume);
  PreparedCase c;
  const Vec3& s = volume.geometry.spacing;
  const bool isotropic = s.x() == target_spacing && s.y() == target_spacing && s.z() == target_spacing;
  c.volume = isotropic ? volume : resample_isotropic(volume, target_spacing);
  c.ndc = NdcMap::for_grid(c.volume.geometry);
  c.fields = build_target_fields(c.volume, c.ndc);
  return c;
}

FitResult fit_template(const LabeledMesh& templ, const PreparedCase& c, const PipelineConfig& cfg) {
  FitResult r;
  r.mesh = templ;
  if (cfg.align) {
    SwingResult s = swing_align(templ, seg_rv_centroid(c.volume, c.ndc));
    r.mesh = std::move(s.mesh);
    r.rotation = s.rotation;
  }
  if (cfg.deform) r.mesh = deform_in_field(r.mesh, c.fields, cfg.fit, &r.log);
  return r;
}

Reconstruction reconstruct(const PreparedCase& c, const LabeledMesh& templ, Scheme scheme,
                           const GsnStack* stack, const PipelineConfig& cfg) {
  if (scheme_needs_checkpoint(scheme) && !stack)
    throw Error("reconstruct: scheme " + std::to_string(int(scheme)) + " needs a GSN checkpoint");
  Reconstruction out;
  auto [mesh, seconds] = timed([&] {
    LabeledMesh m;
    switch (scheme) {
      case Scheme::BaseLoop:
        m = loop_subdivide(loop_subdivide(templ));
        break;
      case Scheme::FitLoop:
        out.fit = fit_template(templ, c, cfg);
        m = loop_subdivide(loop_subdivide(out.fit.mesh));
        break;
      case Scheme::FitOnly:
        out.fit = fit_template(templ, c, cfg);
        m = out.fit.mesh;
        break;
      case Scheme::FitGsn1:
      case Scheme::FitGsn2:
        out.fit = fit_template(templ, c, cfg);
        m = gsn_forward(out.fit.mesh, *stack, scheme == Scheme::FitGsn1 ? 1 : 2).back();
        break;
    }
    if (cfg.smooth_iterations > 0) m = laplacian_filter(m, cfg.smooth_lambda, cfg.smooth_iterations);
    return m;
  });
  out.mesh = std::move(mesh);
  out.seconds = seconds;
  return out;
}

TrainCase make_train_case(const std::string& id, const PreparedCase& c, const LabeledMesh& templ,
                          const PipelineConfig& cfg, std::size_t max_points, std::uint64_t seed) {
  TrainCase t;
  t.id = id;
  t.mesh = fit_template(templ, c, cfg).mesh;
  t.clouds = extract_point_clouds(c.volume, c.ndc, max_points, seed);
  return t;
}

}  // namespace bivfit
