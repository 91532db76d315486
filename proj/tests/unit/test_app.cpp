#include <filesystem>

#include <gtest/gtest.h>

#include "app.hpp"
#include "photocov/reconstruction_io.hpp"
#include "test_util.hpp"

namespace photocov {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("photocov_app_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

app::Config small_config() {
  app::Config cfg;
  cfg.scene.grid_rows = 2;
  cfg.scene.grid_cols = 3;
  cfg.scene.tie_points = 150;
  cfg.calibration.n_min = 4;
  cfg.calibration.table.min_bin_count = 10;
  return cfg;
}

TEST(AppConfig, JsonOverridesAndRoundTrip) {
  app::Config cfg;
  app::apply_config_json(cfg, R"({"seed": 7, "calibration": {"n_min": 8},
      "propagation": {"disp_cov_mode": "rank1", "gauge": "fixed", "sigma_eps": 1e4},
      "scene": {"terrain": {"kind": "step_edge"}}})", true);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.calibration.n_min, 8);
  EXPECT_EQ(cfg.propagation.disp_cov_mode, DispCovMode::Rank1);
  EXPECT_EQ(cfg.gauge, app::GaugeChoice::Fixed);
  EXPECT_EQ(cfg.propagation.sigma_eps, Mat3::Identity() * 1e4);
  EXPECT_EQ(cfg.scene.terrain.kind, TerrainKind::StepEdge);
  // Untouched keys keep their defaults.
  EXPECT_EQ(cfg.calibration.table.bin_count, 16);

  app::Config back;
  app::apply_config_json(back, app::config_to_json(cfg), true);
  EXPECT_EQ(app::config_to_json(back), app::config_to_json(cfg));
}

TEST(AppConfig, UnknownKeysAndBadValues) {
  app::Config cfg;
  std::vector<std::string> warnings;
  app::apply_config_json(cfg, R"({"calibration": {"n_mim": 4}})", false, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("n_mim"), std::string::npos);
  EXPECT_THROW_CODE(app::apply_config_json(cfg, R"({"calibration": {"n_mim": 4}})", true), ErrorCode::InvalidConfig);
  EXPECT_THROW_CODE(app::apply_config_json(cfg, R"({"seed": "x"})", false), ErrorCode::InvalidConfig);
  EXPECT_THROW_CODE(app::apply_config_json(cfg, "{", false), ErrorCode::InvalidConfig);
  EXPECT_THROW_CODE(app::apply_config_json(cfg, R"({"propagation": {"gauge": "free"}})", false),
                    ErrorCode::InvalidConfig);
  EXPECT_THROW_CODE(app::parse_cloud_format("xyz"), ErrorCode::InvalidConfig);
  EXPECT_EQ(app::parse_cloud_format("las"), CloudFormat::LAS);
}

TEST(AppConfig, Validation) {
  app::Config cfg;
  EXPECT_NO_THROW(app::validate(cfg));
  cfg.calibration.n_min = 2;
  EXPECT_THROW_CODE(app::validate(cfg), ErrorCode::InvalidConfig);
  cfg = app::Config{};
  cfg.threads = 0;
  EXPECT_THROW_CODE(app::validate(cfg), ErrorCode::InvalidConfig);
  cfg = app::Config{};
  cfg.verify_trials = 10;
  EXPECT_THROW_CODE(app::validate(cfg), ErrorCode::InvalidConfig);
}

TEST(AppPipeline, EndToEndIsDeterministicAcrossThreads) {
  std::string clouds[2];
  for (int run = 0; run < 2; ++run) {
    app::Config cfg = small_config();
    cfg.threads = run == 0 ? 1 : 4;
    const fs::path dir = fresh_dir("e2e_" + std::to_string(run));
    app::simulate(dir, cfg);
    EXPECT_TRUE(fs::exists(dir / app::files::kReconstruction));
    EXPECT_TRUE(fs::exists(dir / app::files::kPairs));
    app::gt_disparity(dir, cfg);
    app::calibrate(dir, cfg);
    EXPECT_TRUE(fs::exists(dir / app::files::kTables));
    const app::PropagateSummary p = app::propagate(dir, cfg);
    EXPECT_GT(p.points, 0u);
    EXPECT_EQ(p.gauge, GaugeMode::PriorAnchored);
    const app::EvaluateSummary e = app::evaluate(dir, cfg);
    EXPECT_GT(e.disparity_samples, 1000u);
    EXPECT_EQ(e.cloud_samples, p.points);
    EXPECT_GT(e.disparity.bounding_rate, 0.3);
    EXPECT_LT(e.disparity.bounding_rate, 0.95);
    clouds[run] = read_text_file(app::cloud_path(dir, cfg.cloud_format));
  }
  EXPECT_EQ(clouds[0], clouds[1]);
}

TEST(AppPipeline, MissingUncertaintyMapIsReported) {
  const app::Config cfg = small_config();
  const fs::path dir = fresh_dir("missing");
  app::simulate(dir, cfg);
  app::calibrate(dir, cfg);
  const auto pairs = read_pairs(dir / app::files::kPairs);
  fs::remove(dir / app::pair_file(pairs.front().pair_id, "uncertainty"));
  EXPECT_THROW_CODE(app::propagate(dir, cfg), ErrorCode::MissingUncertainty);
}

}  // namespace
}  // namespace photocov
