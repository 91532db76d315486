#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "photocov/geometry.hpp"
#include "photocov/propagation.hpp"
#include "photocov/sfm_covariance.hpp"

namespace photocov {

struct MonteCarloReport {
  int trials = 0;
  /// Trials whose re-estimation did not converge.
  int failed = 0;
  Eigen::MatrixXd analytic;
  Eigen::MatrixXd empirical;
  double frobenius_rel_err = 0.0;
  /// False when more than 1% of the trials failed.
  bool valid = true;
  /// Zero empirical scatter: the comparison is dominated by floors.
  bool degenerate = false;
};

/// Unbiased sample covariance of the rows of `samples` about their mean.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples);

/// ||empirical - analytic||_F / ||analytic||_F.
double frobenius_relative_error(const Eigen::MatrixXd& empirical, const Eigen::MatrixXd& analytic);

struct SfmMonteCarloOptions {
  int trials = 2000;
  std::uint64_t seed = 1;
  /// Pixel noise; 0 uses each observation's sigma_px.
  double sigma_px = 0.0;
  int max_iterations = 10;
  int threads = 1;
};

/// Redraws all tie-point observations around the exact projections of the
/// stored state, re-solves the gauge-fixed bundle adjustment (Gauss-Newton
/// started at the truth) and compares the scatter of the free camera
/// parameters with the analytic camera block.
MonteCarloReport monte_carlo_sfm(const Reconstruction& recon, const SfmMonteCarloOptions& options = {});

struct MvsMonteCarloOptions {
  int trials = 2000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Draws pixel noise from Sigma_disp, re-triangulates the point by weighted
/// Gauss-Newton, and compares the scatter with sigma_mvs.
MonteCarloReport monte_carlo_mvs(const PointContext& ctx, std::span<const Camera> cameras,
                                 const PairGeometries& geoms, const PropagationConfig& cfg,
                                 const MvsMonteCarloOptions& options = {});

/// Joint camera and pixel noise. Each trial samples camera parameters from
/// Sigma_S and pixel noise from Sigma_disp; the camera-induced and the
/// pixel-induced displacements are each re-estimated with the weights of
/// their own information term and added, matching the independence of the
/// two sources. Compares against Sigma_g.
MonteCarloReport monte_carlo_joint(const PointContext& ctx, const Eigen::MatrixXd& sigma_s,
                                   const std::vector<int>& camera_ids,
                                   std::span<const Camera> cameras, const ParameterLayout& layout,
                                   const PairGeometries& geoms, const PropagationConfig& cfg,
                                   const MvsMonteCarloOptions& options = {});

/// Two nadir cameras at +-b/2 observing a point at depth D on the axis, with
/// isotropic pixel noise sigma. Analytic value: 2 (sigma D^2 / (b f))^2.
MonteCarloReport monte_carlo_two_view(double depth, double baseline, double focal, double sigma,
                                      const MvsMonteCarloOptions& options = {});

}  // namespace photocov
