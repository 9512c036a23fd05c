// bivfit command-line driver: phantom, fit, train, reconstruct, eval.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bivfit/fit.hpp"
#include "bivfit/gsn.hpp"
#include "bivfit/log.hpp"
#include "bivfit/mesh.hpp"
#include "bivfit/metrics.hpp"
#include "bivfit/phantom.hpp"
#include "bivfit/pipeline.hpp"
#include "bivfit/volume.hpp"

namespace fs = std::filesystem;
using namespace bivfit;

namespace {

struct ManifestRow {
  std::string id;
  fs::path volume;
  fs::path mesh;  // template for fit/train, reconstructed mesh for eval
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// CSV of case_id,volume,mesh. Relative paths resolve against the manifest's folder.
std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  std::vector<ManifestRow> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (rows.empty() && !cells.empty() && (cells[0] == "case_id" || cells[0] == "id")) continue;
    if (cells.size() < 2 || cells.size() > 3) {
      std::ostringstream msg;
      msg << path.string() << ":" << number << ": expected case_id,volume[,mesh]";
      throw Error(msg.str());
    }
    rows.push_back({cells[0], resolve(cells[1]), cells.size() == 3 ? resolve(cells[2]) : fs::path{}});
  }
  return rows;
}

LabeledMesh template_or_default(const fs::path& path) {
  return path.empty() ? procedural_template() : load_mesh(path);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

fs::path with_suffix(fs::path p, const std::string& suffix) {
  p.replace_extension();
  p += suffix;
  return p;
}

// Shared pipeline flags.
struct PipelineFlags {
  double spacing = 2.0;
  int iterations = 10;
  bool no_align = false;
  bool no_deform = false;
  double smooth_lambda = 0.13;
  int smooth_iterations = 10;

  void add(CLI::App* app, bool smoothing) {
    app->add_option("--spacing", spacing, "Working isotropic spacing in mm")
        ->check(CLI::PositiveNumber);
    app->add_option("--iterations", iterations, "Gradient-field deformation iterations")
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--no-align", no_align, "Skip the swing rotation");
    app->add_flag("--no-deform", no_deform, "Skip the gradient-field deformation");
    if (smoothing) {
      app->add_option("--smooth-lambda", smooth_lambda, "Laplacian post-filter weight")
          ->check(CLI::Range(0.0, 1.0));
      app->add_option("--smooth-iterations", smooth_iterations, "Laplacian post-filter passes")
          ->check(CLI::NonNegativeNumber);
    }
  }

  PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.target_spacing = spacing;
    cfg.fit.iterations = iterations;
    cfg.align = !no_align;
    cfg.deform = !no_deform && iterations > 0;
    cfg.smooth_lambda = smooth_lambda;
    cfg.smooth_iterations = smooth_iterations;
    return cfg;
  }
};

// Volume at the working resolution plus its NDC frame, without target fields.
std::pair<LabelVolume, NdcMap> working_volume(const LabelVolume& v, double spacing) {
  const Vec3& s = v.geometry.spacing;
  LabelVolume w = (s.x() == spacing && s.y() == spacing && s.z() == spacing)
                      ? v
                      : resample_isotropic(v, spacing);
  NdcMap ndc = NdcMap::for_grid(w.geometry);
  return {std::move(w), ndc};
}

// Splices `--config FILE` (flat key = value lines) into the argument list right
// after the subcommand, so later command-line flags take precedence.
std::vector<std::string> expand_config(int argc, char** argv,
                                       const std::vector<std::string>& subcommands) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> out;
  fs::path config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config.empty()) return out;
  std::ifstream in(config);
  if (!in) throw Error("cannot open config file " + config.string());
  std::vector<std::string> extra;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << config.string() << ":" << number << ": expected key = value";
      throw Error(msg.str());
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    extra.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  auto sub = std::find_if(out.begin() + 1, out.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == out.end()) throw Error("--config needs a subcommand");
  out.insert(sub + 1, extra.begin(), extra.end());
  return out;
}

void print_report(const MetricsReport& r) {
  std::printf("%s scheme=%d dice=%.4f (LV %.4f RV %.4f Myo %.4f) hd=%.3f hd95=%.3f asd=%.3fmm "
              "aspr=%.3f jacr=%.3f mnc=%.3f nmf=%.4f t=%.3fs\n",
              r.case_id.c_str(), r.scheme, r.dice_mean, r.dice[0], r.dice[1], r.dice[2],
              r.hausdorff_mean, r.hausdorff95_mean, r.asd_mm, r.aspect_ratio, r.scaled_jacobian,
              r.normal_consistency, r.non_manifold_ratio, r.inference_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-ventricular template fitting and graph subdivision"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Every subcommand accepts --config FILE with flat key = value lines; flags override it.");
  std::string level = "info";
  app.add_option("--log-level", level, "debug, info, warning or silent")
      ->check(CLI::IsMember({"debug", "info", "warning", "silent"}));

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic phantom volume");
  phantom->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fs::path spec_path, phantom_out = "phantom", degrade_path, template_out;
  std::optional<std::uint64_t> phantom_seed;
  phantom->add_option("--spec", spec_path, "Phantom spec JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  phantom->add_option("--out", phantom_out, "Output directory");
  phantom->add_option("--seed", phantom_seed, "Overrides the spec seed");
  phantom->add_option("--degrade", degrade_path, "Degradation JSON; adds a degraded volume")
      ->check(CLI::ExistingFile);
  phantom->add_option("--template-out", template_out, "Also write the procedural template PLY");

  // fit
  auto* fit = app.add_subcommand("fit", "Align and deform the template to a label volume");
  fit->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fs::path fit_volume, fit_template_path, fit_out, fit_log;
  PipelineFlags fit_flags;
  fit->add_option("--volume", fit_volume, "Label volume (.json header)")->required();
  fit->add_option("--template", fit_template_path, "Template PLY (procedural when omitted)");
  fit->add_option("--out", fit_out, "Output mesh (.ply or .obj)")->required();
  fit->add_option("--log", fit_log, "CSV of mean distance per iteration");
  fit_flags.add(fit, false);

  // train
  auto* tr = app.add_subcommand("train", "Train the two-layer GSN over a manifest");
  tr->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fs::path train_manifest, train_out, train_history;
  TrainConfig tcfg;
  PipelineFlags train_flags;
  std::size_t max_points = 4000;
  tr->add_option("--manifest", train_manifest, "CSV of case_id,volume[,template]")
      ->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--out", train_out, "Checkpoint path (.gsn)")->required();
  tr->add_option("--history", train_history, "Loss history CSV (next to the checkpoint by default)");
  tr->add_option("--seed", tcfg.seed, "Initialisation and sampling seed")->required();
  tr->add_option("--epochs", tcfg.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  tr->add_option("--lr", tcfg.learning_rate, "AdamW learning rate")->check(CLI::NonNegativeNumber);
  tr->add_option("--weight-decay", tcfg.weight_decay)->check(CLI::NonNegativeNumber);
  tr->add_option("--lambda-chamfer", tcfg.weights.chamfer)->check(CLI::NonNegativeNumber);
  tr->add_option("--lambda-laplacian", tcfg.weights.laplacian)->check(CLI::NonNegativeNumber);
  tr->add_option("--points", max_points, "Max ground-truth points per surface (0 = all)");
  train_flags.add(tr, false);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Run one ablation scheme and report metrics");
  rec->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fs::path rec_volume, rec_template, rec_checkpoint, rec_out, rec_report;
  int scheme_id = 5;
  EvalOptions rec_eval;
  std::string rec_case = "case";
  PipelineFlags rec_flags;
  rec->add_option("--volume", rec_volume, "Label volume (.json header)")->required();
  rec->add_option("--template", rec_template, "Template PLY (procedural when omitted)");
  rec->add_option("--checkpoint", rec_checkpoint, "GSN checkpoint, needed by schemes 4 and 5");
  rec->add_option("--scheme", scheme_id, "Ablation scheme 1..5");
  rec->add_option("--out", rec_out, "Output mesh (.ply or .obj)")->required();
  rec->add_option("--report", rec_report, "Metrics JSON (next to the mesh by default)");
  rec->add_option("--case-id", rec_case);
  rec->add_option("--asd-samples", rec_eval.asd_samples)->check(CLI::PositiveNumber);
  rec->add_option("--seed", rec_eval.seed, "ASD sampling seed");
  rec_flags.add(rec, true);

  // eval
  auto* ev = app.add_subcommand("eval", "Score meshes against ground-truth volumes");
  ev->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fs::path ev_mesh, ev_volume, ev_manifest, ev_out;
  EvalOptions ev_opts;
  double ev_spacing = 2.0;
  std::string ev_case = "case";
  ev->add_option("--mesh", ev_mesh, "Mesh PLY");
  ev->add_option("--volume", ev_volume, "Ground-truth label volume");
  ev->add_option("--manifest", ev_manifest, "Batch CSV of case_id,volume,mesh")
      ->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report JSON (single) or CSV (batch)")->required();
  ev->add_option("--case-id", ev_case);
  ev->add_option("--spacing", ev_spacing, "Working isotropic spacing in mm")
      ->check(CLI::PositiveNumber);
  ev->add_option("--asd-samples", ev_opts.asd_samples)->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_opts.seed, "ASD sampling seed");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv, {"phantom", "fit", "train", "reconstruct", "eval"});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::reverse(args.begin(), args.end());
  args.pop_back();
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (level == "debug") set_log_level(LogLevel::Debug);
  if (level == "info") set_log_level(LogLevel::Info);
  if (level == "warning") set_log_level(LogLevel::Warning);
  if (level == "silent") set_log_level(LogLevel::Silent);

  try {
    if (*phantom) {
      PhantomSpec spec = spec_path.empty() ? PhantomSpec{} : load_phantom_spec(spec_path);
      if (phantom_seed) spec.seed = *phantom_seed;
      std::optional<DegradationSpec> deg;
      if (!degrade_path.empty()) {
        std::ifstream in(degrade_path);
        std::stringstream text;
        text << in.rdbuf();
        deg = degradation_from_json(text.str());
      }
      const Phantom p = generate_phantom(spec);
      fs::create_directories(phantom_out);
      save_volume(p.volume, phantom_out / "phantom.json");
      {
        std::ofstream out(phantom_out / "phantom_surfaces.json");
        out << to_json(p.surfaces) << '\n';
        if (!out) throw Error("cannot write " + (phantom_out / "phantom_surfaces.json").string());
      }
      if (deg) save_volume(degrade(p.volume, *deg, spec.seed), phantom_out / "phantom_degraded.json");
      if (!template_out.empty()) {
        ensure_parent(template_out);
        save_mesh(procedural_template(), template_out);
      }
      log_info("phantom written to " + phantom_out.string());
    } else if (*fit) {
      const PreparedCase c = prepare_case(load_volume(fit_volume), fit_flags.spacing);
      const FitResult r = fit_template(template_or_default(fit_template_path), c, fit_flags.config());
      if (fit_flags.config().align) {
        std::ostringstream msg;
        msg << "swing rotation " << r.rotation.angle << " rad";
        log_info(msg.str());
      }
      for (std::size_t k = 0; k < r.log.mean_distance.size(); ++k) {
        std::ostringstream msg;
        msg << "iteration " << k << ": mean |d| = " << r.log.mean_distance[k] << " ndc ("
            << r.log.mean_distance[k] / c.ndc.voxel_size() << " voxels)";
        log_info(msg.str());
      }
      ensure_parent(fit_out);
      if (fit_out.extension() == ".obj") save_obj(r.mesh, fit_out);
      else save_mesh(r.mesh, fit_out);
      if (!fit_log.empty()) {
        ensure_parent(fit_log);
        std::ofstream out(fit_log);
        out.precision(10);
        out << "iteration,mean_distance_ndc,mean_distance_voxels\n";
        for (std::size_t k = 0; k < r.log.mean_distance.size(); ++k)
          out << k << ',' << r.log.mean_distance[k] << ','
              << r.log.mean_distance[k] / c.ndc.voxel_size() << '\n';
      }
    } else if (*tr) {
      const PipelineConfig cfg = train_flags.config();
      std::vector<TrainCase> cases;
      for (const ManifestRow& row : read_manifest(train_manifest)) {
        try {
          const PreparedCase c = prepare_case(load_volume(row.volume), cfg.target_spacing);
          cases.push_back(make_train_case(row.id, c, template_or_default(row.mesh), cfg,
                                          max_points, tcfg.seed));
        } catch (const Error& e) {
          throw Error("case " + row.id + ": " + e.what());
        }
      }
      if (cases.empty()) throw Error("train: manifest has no cases");
      if (train_history.empty()) train_history = with_suffix(train_out, "_history.csv");
      ensure_parent(train_out);
      ensure_parent(train_history);
      try {
        const TrainResult r = train(cases, tcfg);
        save_history(r.history, train_history);
        save_checkpoint(r.best, {tcfg.seed, r.best_epoch, r.best_loss}, train_out);
        std::printf("loss %.6f -> %.6f (best %.6f at epoch %d)\n", r.history.front().loss,
                    r.history.back().loss, r.best_loss, r.best_epoch);
      } catch (const TrainingDiverged& e) {
        save_history(e.history(), train_history);
        throw;
      }
    } else if (*rec) {
      const Scheme scheme = scheme_from_int(scheme_id);
      std::optional<GsnStack> stack;
      if (scheme_needs_checkpoint(scheme)) {
        if (rec_checkpoint.empty())
          throw Error("scheme " + std::to_string(scheme_id) + " needs --checkpoint");
        stack = load_checkpoint(rec_checkpoint);
      }
      const PipelineConfig cfg = rec_flags.config();
      const PreparedCase c = prepare_case(load_volume(rec_volume), cfg.target_spacing);
      const Reconstruction r = reconstruct(c, template_or_default(rec_template), scheme,
                                           stack ? &*stack : nullptr, cfg);
      ensure_parent(rec_out);
      if (rec_out.extension() == ".obj") save_obj(r.mesh, rec_out);
      else save_mesh(r.mesh, rec_out);
      MetricsReport report = evaluate(r.mesh, c.volume, c.ndc, rec_eval);
      report.case_id = rec_case;
      report.scheme = scheme_id;
      report.inference_seconds = r.seconds;
      if (rec_report.empty()) rec_report = with_suffix(rec_out, "_report.json");
      ensure_parent(rec_report);
      save_report(report, rec_report);
      print_report(report);
    } else if (*ev) {
      ensure_parent(ev_out);
      if (!ev_manifest.empty()) {
        std::vector<MetricsReport> reports;
        std::size_t failed = 0;
        for (const ManifestRow& row : read_manifest(ev_manifest)) {
          try {
            if (row.mesh.empty()) throw Error("no mesh path");
            const auto [gt, ndc] = working_volume(load_volume(row.volume), ev_spacing);
            MetricsReport r = evaluate(load_mesh(row.mesh), gt, ndc, ev_opts);
            r.case_id = row.id;
            print_report(r);
            reports.push_back(std::move(r));
          } catch (const Error& e) {
            ++failed;
            log_warning("case " + row.id + " skipped: " + e.what());
          }
        }
        save_csv(reports, ev_out);
        if (failed > 0) {
          std::fprintf(stderr, "%zu case(s) failed\n", failed);
          return 2;
        }
      } else {
        if (ev_mesh.empty() || ev_volume.empty())
          throw Error("eval needs --mesh and --volume, or --manifest");
        const auto [gt, ndc] = working_volume(load_volume(ev_volume), ev_spacing);
        MetricsReport r = evaluate(load_mesh(ev_mesh), gt, ndc, ev_opts);
        r.case_id = ev_case;
        if (ev_out.extension() == ".csv") {
          save_csv(std::span<const MetricsReport>(&r, 1), ev_out);
        } else {
          save_report(r, ev_out);
          save_csv(std::span<const MetricsReport>(&r, 1), with_suffix(ev_out, ".csv"));
        }
        print_report(r);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
