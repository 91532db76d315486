#pragma once

#include <span>
#include <vector>

#include "photocov/mvs_uncertainty.hpp"

namespace photocov {

struct CalibrationOptions {
  /// Minimum view count of the pseudo-check points.
  int n_min = 6;
  FusionOptions fusion;
  TableOptions table;
  double u_min = kDefaultUncertaintyFloor;
  int threads = 1;
};

/// Pair depth resampled onto the original reference image grid (camera-frame
/// depth of the original reference camera). Disparity is interpolated
/// bilinearly and a pixel is invalid unless all four neighbours are valid.
FloatGrid pair_depth_in_reference(const PairMeasurements& pair, const Camera& reference);

struct CalibrationResult {
  std::vector<FusedDepthView> fused;
  /// Global pair ids feeding each fused view, in fusion input order.
  std::vector<std::vector<int>> fused_pair_ids;
  /// Every triangulated point (view_count >= fusion.min_views).
  std::vector<DensePoint> dense_points;
  /// Pseudo-check samples, aligned with the input pairs.
  std::vector<std::vector<NViewSample>> samples;
  std::vector<CSigmaTable> tables;
  std::vector<ResidualMap> triangulated;
  std::vector<UncertaintyMap> maps;
  std::size_t skipped_outside = 0;
  std::size_t skipped_invalid = 0;
};

/// Self-calibrates a c-sigma table and an uncertainty map for every pair:
/// fuse pairwise depths per reference view, take n-view points as
/// pseudo-check points, sample (cost, residual) per pair, bin, interpolate,
/// and refine pixels that produced a triangulated point.
CalibrationResult calibrate(const Reconstruction& recon, std::span<const PairMeasurements> pairs,
                            const CalibrationOptions& options = {});

}  // namespace photocov
