#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "app.hpp"
#include "photocov/error.hpp"
#include "photocov/reconstruction_io.hpp"

namespace fs = std::filesystem;
using namespace photocov;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct Flags {
  std::string bundle;
  std::string config;
  std::optional<int> n_min;
  std::optional<int> bin_count;
  std::optional<std::string> disp_cov_mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> format;
  std::optional<int> trials;
  bool strict_io = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("bundle", f.bundle, "Bundle directory")->required();
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--n-min", f.n_min, "Minimum view count of pseudo-check points (default 6)");
  sub->add_option("--bin-count", f.bin_count, "Cost bins per c-sigma table (default 16)");
  sub->add_option("--disp-cov-mode", f.disp_cov_mode, "diagonal or rank1 (default diagonal)");
  sub->add_option("--seed", f.seed, "Random seed (default 42)");
  sub->add_option("--threads", f.threads, "Worker threads (default 1)");
  sub->add_option("--format", f.format, "Cloud format: las, ply or csv (default ply)");
  sub->add_option("--trials", f.trials, "Monte Carlo trials for verify (default 2000)");
  sub->add_flag("--strict-io", f.strict_io, "Reject unknown fields in input files");
}

/// Defaults, then the bundle's config.json, then --config, then flags.
app::Config resolve_config(const Flags& f, bool use_bundle_config) {
  app::Config cfg;
  std::vector<std::string> warnings;
  const fs::path bundle_cfg = fs::path(f.bundle) / app::files::kConfig;
  if (use_bundle_config && fs::exists(bundle_cfg))
    app::apply_config_json(cfg, read_text_file(bundle_cfg), f.strict_io, &warnings);
  if (!f.config.empty()) app::apply_config_json(cfg, read_text_file(f.config), f.strict_io, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  cfg.strict_io = f.strict_io;
  if (f.n_min) cfg.calibration.n_min = *f.n_min;
  if (f.bin_count) cfg.calibration.table.bin_count = *f.bin_count;
  if (f.disp_cov_mode) cfg.propagation.disp_cov_mode = app::parse_disp_cov_mode(*f.disp_cov_mode);
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.format) cfg.cloud_format = app::parse_cloud_format(*f.format);
  if (f.trials) cfg.verify_trials = *f.trials;
  app::validate(cfg);
  return cfg;
}

void print_metrics(const char* label, const MetricReport& r, std::size_t n) {
  std::printf("%-10s n=%zu bounding_rate=%.4f pearson=%s mean_err=%.6g rmse=%.6g kl=%.4g auc_mean=%.6g auc_rmse=%.6g\n",
              label, n, r.bounding_rate, r.pearson_defined ? std::to_string(r.pearson).c_str() : "undefined",
              r.mean_err, r.rmse, r.kl_divergence, r.auc_mean, r.auc_rmse);
}

int run(const std::string& command, const Flags& f) {
  const fs::path dir(f.bundle);
  if (command == "simulate") {
    const app::Config cfg = resolve_config(f, false);
    app::simulate(dir, cfg);
    std::printf("simulated scene written to %s\n", dir.c_str());
    return 0;
  }
  const app::Config cfg = resolve_config(f, true);
  if (command == "gt-disparity") {
    app::gt_disparity(dir, cfg);
    std::printf("ground-truth disparity written to %s\n", (dir / app::files::kTruthDir).c_str());
  } else if (command == "calibrate") {
    app::calibrate(dir, cfg);
    std::printf("c-sigma tables, uncertainty maps and dense points written to %s\n", dir.c_str());
  } else if (command == "propagate") {
    const app::PropagateSummary s = app::propagate(dir, cfg);
    std::printf("%zu covariant points written to %s (%zu skipped, %s gauge)\n", s.points,
                app::cloud_path(dir, cfg.cloud_format).c_str(), s.skipped,
                s.gauge == GaugeMode::PriorAnchored ? "prior-anchored" : "fixed");
  } else if (command == "evaluate") {
    const app::EvaluateSummary s = app::evaluate(dir, cfg);
    print_metrics("disparity", s.disparity, s.disparity_samples);
    print_metrics("cloud", s.cloud, s.cloud_samples);
    if (s.degenerate_planes > 0) std::printf("degenerate reference planes: %zu\n", s.degenerate_planes);
  } else if (command == "verify") {
    fs::create_directories(dir);
    const app::VerifyReport r = app::verify(cfg);
    app::write_verify_report(dir / app::files::kVerify, r);
    for (const app::VerifyCheck& c : r.checks)
      std::printf("%-20s frobenius_rel_err=%.4f threshold=%.2f failed_trials=%d %s\n", c.name.c_str(),
                  c.frobenius_rel_err, c.threshold, c.failed_trials, c.passed ? "ok" : "exceeded");
    if (!r.passed()) {
      std::fprintf(stderr, "error: Monte Carlo check exceeded its threshold\n");
      return kExitNumerical;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Covariance propagation for photogrammetric point clouds"};
  cli.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Generate a synthetic scene as an input bundle"},
      {"gt-disparity", "Ground-truth disparity with left-right filtering"},
      {"calibrate", "Self-calibrate c-sigma tables and uncertainty maps"},
      {"propagate", "Propagate camera and matching covariance to a point cloud"},
      {"evaluate", "Compare predicted and actual errors"},
      {"verify", "Check the analytic covariances against Monte Carlo"},
  };
  for (const auto& [name, help] : commands) add_common(cli.add_subcommand(name, help), flags);
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  const std::string command = cli.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}
