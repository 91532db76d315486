#include "app.hpp"

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>

#include <json.hpp>

#include "photocov/error.hpp"
#include "photocov/evaluation.hpp"
#include "photocov/monte_carlo.hpp"
#include "photocov/pfm.hpp"
#include "photocov/reconstruction_io.hpp"
#include "photocov/spatial_index.hpp"
#include "photocov/table_io.hpp"

namespace photocov::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, field + ": " + what);
}

const char* terrain_name(TerrainKind k) {
  switch (k) {
    case TerrainKind::Flat: return "flat";
    case TerrainKind::Sinusoidal: return "sinusoidal";
    case TerrainKind::StepEdge: return "step_edge";
  }
  return "";
}

const char* gauge_name(GaugeChoice g) {
  switch (g) {
    case GaugeChoice::Auto: return "auto";
    case GaugeChoice::Fixed: return "fixed";
    case GaugeChoice::Prior: return "prior";
  }
  return "";
}

const char* format_name(CloudFormat f) {
  switch (f) {
    case CloudFormat::LAS: return "las";
    case CloudFormat::PLY: return "ply";
    case CloudFormat::CSV: return "csv";
  }
  return "";
}

/// Applies the keys of one config section; each handler reads its value.
class Section {
 public:
  Section(const json& node, std::string pointer, bool strict, std::vector<std::string>* warnings)
      : node_(node), pointer_(std::move(pointer)), strict_(strict), warnings_(warnings) {
    if (!node_.is_object()) bad_config(pointer_, "expected an object");
  }

  template <typename T>
  Section& field(const std::string& key, T& out) {
    handlers_[key] = [this, key, &out](const json& v) {
      try {
        out = v.get<T>();
      } catch (const json::exception&) {
        bad_config(pointer_ + "/" + key, "wrong type");
      }
    };
    return *this;
  }

  Section& custom(const std::string& key, std::function<void(const json&, const std::string&)> f) {
    handlers_[key] = [this, key, f](const json& v) { f(v, pointer_ + "/" + key); };
    return *this;
  }

  void apply() {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      auto h = handlers_.find(it.key());
      if (h != handlers_.end()) {
        h->second(it.value());
      } else if (strict_) {
        bad_config(pointer_ + "/" + it.key(), "unknown field");
      } else if (warnings_) {
        warnings_->push_back(pointer_ + "/" + it.key() + ": unknown field ignored");
      }
    }
  }

 private:
  const json& node_;
  std::string pointer_;
  bool strict_;
  std::vector<std::string>* warnings_;
  std::map<std::string, std::function<void(const json&)>> handlers_;
};

std::string as_string(const json& v, const std::string& ptr) {
  if (!v.is_string()) bad_config(ptr, "expected a string");
  return v.get<std::string>();
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

ReadOptions read_options(const Config& cfg, std::vector<std::string>& warnings) {
  ReadOptions o;
  o.strict = cfg.strict_io;
  o.warnings = &warnings;
  return o;
}

Reconstruction load_reconstruction(const fs::path& dir, const Config& cfg) {
  std::vector<std::string> warnings;
  Reconstruction r = read_reconstruction(dir / files::kReconstruction, read_options(cfg, warnings));
  print_warnings(warnings);
  return r;
}

std::vector<PairRecord> load_pair_records(const fs::path& dir, const Config& cfg) {
  std::vector<std::string> warnings;
  std::vector<PairRecord> p = read_pairs(dir / files::kPairs, read_options(cfg, warnings));
  print_warnings(warnings);
  return p;
}

std::vector<PairMeasurements> load_measurements(const fs::path& dir,
                                                const std::vector<PairRecord>& records) {
  std::vector<PairMeasurements> out;
  out.reserve(records.size());
  for (const PairRecord& r : records) {
    PairMeasurements m;
    m.pair_id = r.pair_id;
    m.pair = r.geometry;
    m.disparity = read_pfm(dir / r.disparity_file);
    m.cost = read_pfm(dir / r.cost_file);
    validate(m);
    out.push_back(std::move(m));
  }
  return out;
}

FloatGrid read_pair_grid(const fs::path& path, ErrorCode missing, const std::string& what, int pair_id) {
  if (!fs::exists(path))
    throw Error(missing, what + " for pair " + std::to_string(pair_id) + " not found at " + path.string());
  return read_pfm(path);
}

}  // namespace

ParameterCovariance sfm_covariance(const Reconstruction& recon, GaugeChoice choice) {
  const bool has_priors = !recon.gps_priors.empty() || !recon.gcp_priors.empty();
  const bool anchored = choice == GaugeChoice::Prior || (choice == GaugeChoice::Auto && has_priors);
  if (!anchored) return parameter_covariance(linearize(recon), GaugeMode::FixedGauge);
  return parameter_covariance(assemble_with_priors(linearize(recon), priors_from(recon)),
                              GaugeMode::PriorAnchored);
}

DispCovMode parse_disp_cov_mode(const std::string& s) {
  if (s == "diagonal") return DispCovMode::Diagonal;
  if (s == "rank1") return DispCovMode::Rank1;
  bad_config("disp_cov_mode", "expected diagonal or rank1, got '" + s + "'");
}

CloudFormat parse_cloud_format(const std::string& s) {
  if (s == "las") return CloudFormat::LAS;
  if (s == "ply") return CloudFormat::PLY;
  if (s == "csv") return CloudFormat::CSV;
  bad_config("cloud_format", "expected las, ply or csv, got '" + s + "'");
}

void validate(const Config& cfg) {
  if (cfg.threads < 1) bad_config("threads", "must be at least 1");
  try {
    validate(cfg.scene);
    validate(cfg.propagation);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (cfg.calibration.n_min < 3) bad_config("calibration/n_min", "must be at least 3");
  if (cfg.calibration.table.bin_count < 1) bad_config("calibration/bin_count", "must be positive");
  if (cfg.calibration.table.min_bin_count < 1) bad_config("calibration/min_bin_count", "must be positive");
  if (cfg.calibration.fusion.min_views < 2) bad_config("calibration/min_views", "must be at least 2");
  if (!(cfg.calibration.fusion.agree_tol > 0.0)) bad_config("calibration/agree_tol", "must be positive");
  if (!(cfg.calibration.u_min > 0.0)) bad_config("calibration/u_min", "must be positive");
  if (cfg.k_neighbors < 3) bad_config("evaluation/k_neighbors", "must be at least 3");
  if (cfg.hist_bins < 1) bad_config("evaluation/hist_bins", "must be positive");
  if (!(cfg.lr_tol > 0.0)) bad_config("evaluation/lr_tol", "must be positive");
  if (cfg.verify_trials < 100) bad_config("verify/trials", "must be at least 100");
}

void apply_config_json(Config& cfg, const std::string& text, bool strict,
                       std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    bad_config("config", std::string("not valid JSON: ") + e.what());
  }
  Section root(doc, "", strict, warnings);
  root.field("seed", cfg.seed).field("threads", cfg.threads);
  root.custom("scene", [&](const json& v, const std::string& ptr) {
    SceneSpec& s = cfg.scene;
    Section sec(v, ptr, strict, warnings);
    sec.field("grid_rows", s.grid_rows)
        .field("grid_cols", s.grid_cols)
        .field("altitude", s.altitude)
        .field("overlap_forward", s.overlap_forward)
        .field("overlap_side", s.overlap_side)
        .field("image_size", s.image_size)
        .field("focal", s.focal)
        .field("attitude_jitter", s.attitude_jitter)
        .field("texture_seed", s.texture_seed)
        .field("obs_noise_px", s.obs_noise_px)
        .field("tie_points", s.tie_points)
        .field("gps_sigma", s.gps_sigma)
        .field("cost_a", s.cost_a)
        .field("cost_b", s.cost_b)
        .field("cost_max", s.cost_max)
        .field("cost_scale_spread", s.cost_scale_spread)
        .field("reference_spacing", s.reference_spacing)
        .field("census_max_disparity", s.census_max_disparity);
    sec.custom("source", [&](const json& sv, const std::string& sp) {
      const std::string name = as_string(sv, sp);
      if (name == "noise_model") s.source = MeasurementSource::NoiseModel;
      else if (name == "census") s.source = MeasurementSource::Census;
      else bad_config(sp, "expected noise_model or census");
    });
    sec.custom("terrain", [&](const json& tv, const std::string& tp) {
      Section t(tv, tp, strict, warnings);
      t.field("amplitude", s.terrain.amplitude)
          .field("wavelength", s.terrain.wavelength)
          .field("step_height", s.terrain.step_height);
      t.custom("kind", [&](const json& kv, const std::string& kp) {
        const std::string name = as_string(kv, kp);
        if (name == "flat") s.terrain.kind = TerrainKind::Flat;
        else if (name == "sinusoidal") s.terrain.kind = TerrainKind::Sinusoidal;
        else if (name == "step_edge") s.terrain.kind = TerrainKind::StepEdge;
        else bad_config(kp, "expected flat, sinusoidal or step_edge");
      });
      t.apply();
    });
    sec.apply();
  });
  root.custom("calibration", [&](const json& v, const std::string& ptr) {
    CalibrationOptions& c = cfg.calibration;
    Section sec(v, ptr, strict, warnings);
    sec.field("n_min", c.n_min)
        .field("bin_count", c.table.bin_count)
        .field("min_bin_count", c.table.min_bin_count)
        .field("min_views", c.fusion.min_views)
        .field("agree_tol", c.fusion.agree_tol)
        .field("u_min", c.u_min);
    sec.apply();
  });
  root.custom("propagation", [&](const json& v, const std::string& ptr) {
    PropagationConfig& p = cfg.propagation;
    Section sec(v, ptr, strict, warnings);
    sec.field("cross_epipolar_sigma", p.cross_epipolar_sigma);
    sec.custom("sigma_eps", [&](const json& sv, const std::string& sp) {
      if (!sv.is_number() || !(sv.get<double>() > 0.0)) bad_config(sp, "expected a positive number");
      p.sigma_eps = Mat3::Identity() * sv.get<double>();
    });
    sec.custom("disp_cov_mode", [&](const json& sv, const std::string& sp) {
      p.disp_cov_mode = parse_disp_cov_mode(as_string(sv, sp));
    });
    sec.custom("radius_mode", [&](const json& sv, const std::string& sp) {
      const std::string name = as_string(sv, sp);
      if (name == "max_eigen") p.radius_mode = RadiusMode::MaxEigen;
      else if (name == "rms_trace") p.radius_mode = RadiusMode::RmsTrace;
      else bad_config(sp, "expected max_eigen or rms_trace");
    });
    sec.custom("gauge", [&](const json& sv, const std::string& sp) {
      const std::string name = as_string(sv, sp);
      if (name == "auto") cfg.gauge = GaugeChoice::Auto;
      else if (name == "fixed") cfg.gauge = GaugeChoice::Fixed;
      else if (name == "prior") cfg.gauge = GaugeChoice::Prior;
      else bad_config(sp, "expected auto, fixed or prior");
    });
    sec.custom("cloud_format", [&](const json& sv, const std::string& sp) {
      cfg.cloud_format = parse_cloud_format(as_string(sv, sp));
    });
    sec.apply();
  });
  root.custom("evaluation", [&](const json& v, const std::string& ptr) {
    Section sec(v, ptr, strict, warnings);
    sec.field("k_neighbors", cfg.k_neighbors).field("hist_bins", cfg.hist_bins).field("lr_tol", cfg.lr_tol);
    sec.apply();
  });
  root.custom("verify", [&](const json& v, const std::string& ptr) {
    Section sec(v, ptr, strict, warnings);
    sec.field("trials", cfg.verify_trials);
    sec.apply();
  });
  root.apply();
}

std::string config_to_json(const Config& cfg) {
  const SceneSpec& s = cfg.scene;
  const json doc = {
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"scene",
       {{"grid_rows", s.grid_rows},
        {"grid_cols", s.grid_cols},
        {"altitude", s.altitude},
        {"overlap_forward", s.overlap_forward},
        {"overlap_side", s.overlap_side},
        {"terrain",
         {{"kind", terrain_name(s.terrain.kind)},
          {"amplitude", s.terrain.amplitude},
          {"wavelength", s.terrain.wavelength},
          {"step_height", s.terrain.step_height}}},
        {"image_size", s.image_size},
        {"focal", s.focal},
        {"attitude_jitter", s.attitude_jitter},
        {"texture_seed", s.texture_seed},
        {"obs_noise_px", s.obs_noise_px},
        {"tie_points", s.tie_points},
        {"gps_sigma", s.gps_sigma},
        {"cost_a", s.cost_a},
        {"cost_b", s.cost_b},
        {"cost_max", s.cost_max},
        {"cost_scale_spread", s.cost_scale_spread},
        {"reference_spacing", s.reference_spacing},
        {"source", s.source == MeasurementSource::Census ? "census" : "noise_model"},
        {"census_max_disparity", s.census_max_disparity}}},
      {"calibration",
       {{"n_min", cfg.calibration.n_min},
        {"bin_count", cfg.calibration.table.bin_count},
        {"min_bin_count", cfg.calibration.table.min_bin_count},
        {"min_views", cfg.calibration.fusion.min_views},
        {"agree_tol", cfg.calibration.fusion.agree_tol},
        {"u_min", cfg.calibration.u_min}}},
      {"propagation",
       {{"sigma_eps", cfg.propagation.sigma_eps(0, 0)},
        {"cross_epipolar_sigma", cfg.propagation.cross_epipolar_sigma},
        {"disp_cov_mode", cfg.propagation.disp_cov_mode == DispCovMode::Rank1 ? "rank1" : "diagonal"},
        {"radius_mode", cfg.propagation.radius_mode == RadiusMode::RmsTrace ? "rms_trace" : "max_eigen"},
        {"gauge", gauge_name(cfg.gauge)},
        {"cloud_format", format_name(cfg.cloud_format)}}},
      {"evaluation", {{"k_neighbors", cfg.k_neighbors}, {"hist_bins", cfg.hist_bins}, {"lr_tol", cfg.lr_tol}}},
      {"verify", {{"trials", cfg.verify_trials}}},
  };
  return doc.dump(2) + "\n";
}

std::string pair_file(int pair_id, const std::string& what) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%04d_", pair_id);
  return buf + what + ".pfm";
}

fs::path cloud_path(const fs::path& dir, CloudFormat format) {
  return dir / (std::string("cloud.") + format_name(format));
}

void simulate(const fs::path& dir, const Config& cfg) {
  validate(cfg);
  const Scene scene = generate_scene(cfg.scene, cfg.seed);
  const std::vector<PairMeasurements> meas = synthesize_all_pairs(scene, cfg.seed, cfg.threads);
  fs::create_directories(dir / files::kTruthDir);
  write_text_file(dir / files::kConfig, config_to_json(cfg));
  write_reconstruction(dir / files::kReconstruction, scene.recon);
  std::vector<PairRecord> records;
  for (std::size_t k = 0; k < meas.size(); ++k) {
    const PairMeasurements& m = meas[k];
    PairRecord r;
    r.pair_id = m.pair_id;
    r.geometry = m.pair;
    r.disparity_file = pair_file(m.pair_id, "disparity");
    r.cost_file = pair_file(m.pair_id, "cost");
    write_pfm(dir / r.disparity_file, m.disparity);
    write_pfm(dir / r.cost_file, m.cost);
    const PairTruth& t = scene.pairs[k];
    write_pfm(dir / files::kTruthDir / pair_file(t.pair_id, "depth"), t.depth);
    write_pfm(dir / files::kTruthDir / pair_file(t.pair_id, "disparity_rl"), t.disparity_rl);
    records.push_back(std::move(r));
  }
  write_pairs(dir / files::kPairs, records);
  std::vector<CovarianceRecord> ref;
  ref.reserve(scene.reference_cloud.size());
  for (const Vec3& p : scene.reference_cloud) {
    CovarianceRecord rec;
    rec.x = p.x();
    rec.y = p.y();
    rec.z = p.z();
    ref.push_back(rec);
  }
  write_records(ref, dir / files::kReferenceCloud, CloudFormat::CSV);
}

void gt_disparity(const fs::path& dir, const Config& cfg) {
  validate(cfg);
  const std::vector<PairRecord> records = load_pair_records(dir, cfg);
  const fs::path truth = dir / files::kTruthDir;
  for (const PairRecord& r : records) {
    const FloatGrid depth = read_pair_grid(truth / pair_file(r.pair_id, "depth"),
                                           ErrorCode::IOError, "truth depth", r.pair_id);
    const FloatGrid rl = read_pair_grid(truth / pair_file(r.pair_id, "disparity_rl"),
                                        ErrorCode::IOError, "truth right-left disparity", r.pair_id);
    const FloatGrid lr = gt_disparity_from_depth(depth, r.geometry);
    write_pfm(truth / pair_file(r.pair_id, "gt_disparity"), lr_consistency_filter(lr, rl, cfg.lr_tol));
  }
}

void calibrate(const fs::path& dir, const Config& cfg) {
  validate(cfg);
  const Reconstruction recon = load_reconstruction(dir, cfg);
  const std::vector<PairMeasurements> meas = load_measurements(dir, load_pair_records(dir, cfg));
  CalibrationOptions opts = cfg.calibration;
  opts.threads = cfg.threads;
  const CalibrationResult cal = photocov::calibrate(recon, meas, opts);
  write_c_sigma_tables(dir / files::kTables, cal.tables);
  std::vector<NViewSample> all;
  for (const auto& s : cal.samples) all.insert(all.end(), s.begin(), s.end());
  write_text_file(dir / files::kSamples, samples_to_csv(all));
  for (const UncertaintyMap& m : cal.maps) write_pfm(dir / pair_file(m.pair_id, "uncertainty"), m.u);
  write_dense_points(dir / files::kDensePoints, cal.dense_points);
}

PropagateSummary propagate(const fs::path& dir, const Config& cfg) {
  validate(cfg);
  const Reconstruction recon = load_reconstruction(dir, cfg);
  const std::vector<PairRecord> records = load_pair_records(dir, cfg);
  PairGeometries geoms;
  std::vector<FloatGrid> maps;
  maps.reserve(records.size());
  for (const PairRecord& r : records) {
    geoms[r.pair_id] = r.geometry;
    maps.push_back(read_pair_grid(dir / pair_file(r.pair_id, "uncertainty"),
                                  ErrorCode::MissingUncertainty, "uncertainty map", r.pair_id));
  }
  UncertaintyLookup lookup;
  for (std::size_t k = 0; k < records.size(); ++k) lookup[records[k].pair_id] = &maps[k];
  const std::vector<DensePoint> points = read_dense_points(dir / files::kDensePoints);
  const ParameterCovariance cov = sfm_covariance(recon, cfg.gauge);
  const CloudPropagation cloud =
      propagate_cloud(points, cov, recon.cameras, geoms, lookup, cfg.propagation, cfg.threads);
  write_covariant_cloud(cloud.points, cloud_path(dir, cfg.cloud_format), cfg.cloud_format);
  return {cloud.points.size(), cloud.skipped.size(), cov.gauge_mode};
}

EvaluateSummary evaluate(const fs::path& dir, const Config& cfg) {
  validate(cfg);
  EvaluateSummary out;
  const std::vector<PairRecord> records = load_pair_records(dir, cfg);
  PairedErrors disp;
  for (const PairRecord& r : records) {
    const FloatGrid est = read_pfm(dir / r.disparity_file);
    const FloatGrid gt = read_pair_grid(dir / files::kTruthDir / pair_file(r.pair_id, "gt_disparity"),
                                        ErrorCode::IOError, "ground-truth disparity", r.pair_id);
    const FloatGrid u = read_pair_grid(dir / pair_file(r.pair_id, "uncertainty"),
                                       ErrorCode::MissingUncertainty, "uncertainty map", r.pair_id);
    const PairedErrors pe = disparity_errors(est, gt, u);
    disp.actual.insert(disp.actual.end(), pe.actual.begin(), pe.actual.end());
    disp.predicted.insert(disp.predicted.end(), pe.predicted.begin(), pe.predicted.end());
  }
  out.disparity = compute_metrics(disp, cfg.hist_bins);
  out.disparity_samples = disp.size();

  std::vector<Vec3> ref;
  for (const CovarianceRecord& r : read_covariant_cloud(dir / files::kReferenceCloud, CloudFormat::CSV))
    ref.emplace_back(r.x, r.y, r.z);
  const PointIndex index(std::move(ref));
  const std::vector<CovarianceRecord> recs = read_covariant_cloud(cloud_path(dir, cfg.cloud_format),
                                                                  cfg.cloud_format);
  std::vector<CovariantPoint> pts(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    pts[i].point_id = static_cast<int>(i);
    pts[i].position = Vec3(recs[i].x, recs[i].y, recs[i].z);
    pts[i].sigma_g = record_covariance(recs[i]);
  }
  const CloudErrors ce = point_cloud_errors(pts, index, cfg.k_neighbors, cfg.propagation.radius_mode,
                                            {}, cfg.threads);
  out.cloud = compute_metrics(ce.errors, cfg.hist_bins);
  out.cloud_samples = ce.errors.size();
  out.degenerate_planes = ce.degenerate_planes;

  std::string csv = metric_report_to_csv(out.disparity, "disparity_px");
  const std::string cloud_csv = metric_report_to_csv(out.cloud, "cloud_m");
  csv += cloud_csv.substr(cloud_csv.find('\n') + 1);
  write_text_file(dir / files::kMetrics, csv);
  write_text_file(dir / files::kAucDisparity, auc_curve_to_csv(auc_curve(disp)));
  write_text_file(dir / files::kAucCloud, auc_curve_to_csv(auc_curve(ce.errors)));
  return out;
}

bool VerifyReport::passed() const {
  for (const VerifyCheck& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

namespace {

VerifyCheck check(const std::string& name, const MonteCarloReport& r, double threshold) {
  VerifyCheck c;
  c.name = name;
  c.frobenius_rel_err = r.frobenius_rel_err;
  c.threshold = threshold;
  c.failed_trials = r.failed;
  c.valid = r.valid && !r.degenerate;
  c.passed = c.valid && r.frobenius_rel_err < threshold;
  return c;
}

}  // namespace

VerifyReport verify(const Config& cfg) {
  validate(cfg);
  VerifyReport report;

  // Bundle adjustment oracle on a strip with a wide field of view, where the
  // gauge-fixed problem is well conditioned.
  SceneSpec strip = cfg.scene;
  strip.grid_rows = 1;
  strip.grid_cols = 3;
  strip.tie_points = 50;
  strip.focal = 150.0;
  strip.gps_sigma = 0.0;
  strip.obs_noise_px = 0.5;
  SfmMonteCarloOptions sfm_opts;
  sfm_opts.trials = cfg.verify_trials;
  sfm_opts.seed = cfg.seed;
  sfm_opts.max_iterations = 30;
  sfm_opts.threads = cfg.threads;
  report.checks.push_back(check("sfm", monte_carlo_sfm(generate_scene(strip, cfg.seed).recon, sfm_opts), 0.15));

  const Scene scene = generate_scene(cfg.scene, cfg.seed);
  const std::vector<PairMeasurements> meas = synthesize_all_pairs(scene, cfg.seed, cfg.threads);
  CalibrationOptions copts = cfg.calibration;
  copts.threads = cfg.threads;
  const CalibrationResult cal = photocov::calibrate(scene.recon, meas, copts);
  PairGeometries geoms;
  UncertaintyLookup lookup;
  for (std::size_t k = 0; k < meas.size(); ++k) {
    geoms[meas[k].pair_id] = meas[k].pair;
    lookup[meas[k].pair_id] = &cal.maps[k].u;
  }
  const ParameterCovariance cov = sfm_covariance(scene.recon, cfg.gauge);
  MvsMonteCarloOptions mc;
  mc.trials = cfg.verify_trials;
  mc.seed = cfg.seed;
  mc.threads = cfg.threads;
  constexpr int kProbePoints = 4;
  const std::size_t n = cal.dense_points.size();
  int probed = 0;
  for (std::size_t i = n / (2 * kProbePoints); i < n && probed < kProbePoints; ++i) {
    const PointContext ctx = make_point_context(cal.dense_points[i], geoms, scene.recon.cameras, lookup);
    if (ctx.n() < 3) continue;
    const std::string tag = "point_" + std::to_string(cal.dense_points[i].point_id);
    report.checks.push_back(
        check("mvs_" + tag, monte_carlo_mvs(ctx, scene.recon.cameras, geoms, cfg.propagation, mc), 0.15));
    const std::vector<int> ids = observing_cameras(ctx);
    report.checks.push_back(check(
        "joint_" + tag,
        monte_carlo_joint(ctx, marginal_camera_covariance(cov, ids), ids, scene.recon.cameras,
                          cov.layout, geoms, cfg.propagation, mc),
        0.20));
    ++probed;
    i += n / kProbePoints;
  }
  if (probed == 0) throw Error(ErrorCode::InsufficientSamples, "no dense point with three views to verify");

  const double baseline = cfg.scene.altitude * 0.1;
  report.checks.push_back(
      check("two_view", monte_carlo_two_view(cfg.scene.altitude, baseline, cfg.scene.focal, 0.5, mc), 0.10));
  return report;
}

void write_verify_report(const fs::path& path, const VerifyReport& report) {
  json checks = json::array();
  for (const VerifyCheck& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"frobenius_rel_err", c.frobenius_rel_err},
                      {"threshold", c.threshold},
                      {"failed_trials", c.failed_trials},
                      {"valid", c.valid},
                      {"passed", c.passed}});
  write_text_file(path, json{{"passed", report.passed()}, {"checks", checks}}.dump(2) + "\n");
}

}  // namespace photocov::app
