#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "photocov/cloud_io.hpp"
#include "photocov/evaluation.hpp"
#include "photocov/mvs_pipeline.hpp"
#include "photocov/propagation.hpp"
#include "photocov/sfm_covariance.hpp"
#include "photocov/synthetic.hpp"

namespace photocov::app {

enum class GaugeChoice {
  Auto,    // PriorAnchored when the reconstruction carries priors, else FixedGauge
  Fixed,
  Prior,
};

struct Config {
  std::uint64_t seed = 42;
  int threads = 1;
  bool strict_io = false;
  SceneSpec scene;
  CalibrationOptions calibration;
  PropagationConfig propagation;
  GaugeChoice gauge = GaugeChoice::Auto;
  CloudFormat cloud_format = CloudFormat::PLY;
  int k_neighbors = 6;
  int hist_bins = 64;
  double lr_tol = 1.0;
  int verify_trials = 2000;
};

/// Throws InvalidConfig naming the offending field.
void validate(const Config& cfg);

/// Applies the keys of a JSON config document on top of `cfg`. Unknown keys
/// are errors when `strict`, otherwise they are appended to `warnings`.
void apply_config_json(Config& cfg, const std::string& text, bool strict,
                       std::vector<std::string>* warnings = nullptr);
std::string config_to_json(const Config& cfg);

/// Parameter covariance in the gauge selected by `choice`.
ParameterCovariance sfm_covariance(const Reconstruction& recon, GaugeChoice choice);

DispCovMode parse_disp_cov_mode(const std::string& s);
CloudFormat parse_cloud_format(const std::string& s);

/// Bundle layout, relative to the bundle directory.
namespace files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kReconstruction = "reconstruction.json";
inline constexpr const char* kPairs = "pairs.json";
inline constexpr const char* kTruthDir = "truth";
inline constexpr const char* kReferenceCloud = "truth/reference_cloud.csv";
inline constexpr const char* kTables = "c_sigma_tables.csv";
inline constexpr const char* kSamples = "samples.csv";
inline constexpr const char* kDensePoints = "dense_points.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kAucDisparity = "auc_disparity.csv";
inline constexpr const char* kAucCloud = "auc_cloud.csv";
inline constexpr const char* kVerify = "verify.json";
}  // namespace files

std::string pair_file(int pair_id, const std::string& what);
std::filesystem::path cloud_path(const std::filesystem::path& dir, CloudFormat format);

/// Synthetic scene to input bundle: reconstruction, pair geometry, disparity
/// and cost maps, plus ground truth under truth/.
void simulate(const std::filesystem::path& dir, const Config& cfg);

/// Ground-truth disparity from the truth depth of every pair, left-right
/// filtered against the truth source-to-reference disparity.
void gt_disparity(const std::filesystem::path& dir, const Config& cfg);

/// c-sigma tables, uncertainty maps and the dense point list.
void calibrate(const std::filesystem::path& dir, const Config& cfg);

struct PropagateSummary {
  std::size_t points = 0;
  std::size_t skipped = 0;
  GaugeMode gauge = GaugeMode::FixedGauge;
};

/// Covariant point cloud from the calibration outputs.
PropagateSummary propagate(const std::filesystem::path& dir, const Config& cfg);

struct EvaluateSummary {
  MetricReport disparity;
  std::size_t disparity_samples = 0;
  MetricReport cloud;
  std::size_t cloud_samples = 0;
  std::size_t degenerate_planes = 0;
};

/// Pixel-level metrics against the filtered ground-truth disparity and
/// point-level metrics against the reference cloud.
EvaluateSummary evaluate(const std::filesystem::path& dir, const Config& cfg);

struct VerifyCheck {
  std::string name;
  double frobenius_rel_err = 0.0;
  double threshold = 0.0;
  int failed_trials = 0;
  bool valid = true;
  bool passed = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const;
};

/// Monte Carlo oracles: the bundle adjustment on a 3-camera, 50-point strip,
/// triangulation and joint propagation on points of the configured scene,
/// and the two-view closed form.
VerifyReport verify(const Config& cfg);
void write_verify_report(const std::filesystem::path& path, const VerifyReport& report);

}  // namespace photocov::app
