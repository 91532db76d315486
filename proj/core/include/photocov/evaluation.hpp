#pragma once

#include <span>
#include <vector>

#include "photocov/geometry.hpp"
#include "photocov/grid.hpp"
#include "photocov/propagation.hpp"
#include "photocov/spatial_index.hpp"

namespace photocov {

/// Disparity b f / D on the rectified reference grid. Non-finite or
/// non-positive depth gives NaN. Throws DimensionMismatch.
FloatGrid gt_disparity_from_depth(const FloatGrid& depth, const StereoPairGeometry& geom);

/// Keeps a pixel iff |d_lr(x, y) + d_rl(x - d_lr(x, y), y)| <= tol, with the
/// right-to-left map stored on the source grid as x_ref - x_src (negative).
/// The lookup column is rounded; missing counterparts remove the pixel.
FloatGrid lr_consistency_filter(const FloatGrid& disp_lr, const FloatGrid& disp_rl,
                                double tol = 1.0);

struct PlaneDistance {
  double distance = 0.0;
  /// Neighbours were collinear; distance is to the nearest neighbour.
  bool degenerate = false;
};

/// Distance to the total-least-squares plane through the k nearest
/// reference points. Throws EmptyInput when the cloud has fewer than k points.
PlaneDistance actual_error_point_to_plane(const Vec3& point, const PointIndex& reference,
                                          int k = 6);

/// Applied to evaluated points before comparison: X' = rotation X + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

enum class ErrorUnit { Pixel, Meter };

struct PairedErrors {
  std::vector<double> actual;
  std::vector<double> predicted;
  ErrorUnit unit = ErrorUnit::Pixel;

  std::size_t size() const noexcept { return actual.size(); }
};

/// Throws EmptyInput or DimensionMismatch; InvalidDisparity on NaN or
/// negative entries.
void validate(const PairedErrors& pe);

/// Fraction of elements with actual <= predicted. Throws EmptyInput.
double bounding_rate(const PairedErrors& pe);

/// KL(P_actual || P_pred) over `bins` shared-edge histograms spanning the
/// pooled range, with eps added to every bin probability.
double kl_divergence(std::span<const double> actual, std::span<const double> predicted,
                     int bins = 64, double eps = 1e-9);

struct AucPoint {
  double scale = 0.0;
  double bounding_rate = 0.0;
  double mean_err = 0.0;
  double rmse = 0.0;
};

struct AucCurve {
  /// Sorted by bounding rate, then scale.
  std::vector<AucPoint> points;
  double auc_mean = 0.0;
  double auc_rmse = 0.0;
};

/// n log-spaced values in [lo, hi].
std::vector<double> log_scales(int n = 256, double lo = 1e-2, double hi = 1e2);

/// Accuracy of scaled predictions against the bounding rate they achieve,
/// integrated with the trapezoid rule over the achieved rate range.
AucCurve auc_curve(const PairedErrors& pe, std::span<const double> scales);
AucCurve auc_curve(const PairedErrors& pe);

struct MetricReport {
  /// NaN when either vector has zero variance.
  double pearson = 0.0;
  bool pearson_defined = true;
  /// Mean of |predicted - actual|.
  double mean_err = 0.0;
  double rmse = 0.0;
  double kl_divergence = 0.0;
  double bounding_rate = 0.0;
  double auc_mean = 0.0;
  double auc_rmse = 0.0;
};

MetricReport compute_metrics(const PairedErrors& pe, int hist_bins = 64);

/// Pearson correlation. Throws ZeroVariance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Per pixel: actual = |d_est - d_gt|, predicted = u, over pixels valid in all
/// three maps. Throws DimensionMismatch.
PairedErrors disparity_errors(const FloatGrid& estimate, const FloatGrid& ground_truth,
                              const FloatGrid& uncertainty);

struct CloudErrors {
  PairedErrors errors;
  std::size_t degenerate_planes = 0;
};

/// actual = point-to-plane distance, predicted = covariance_radius(sigma_g).
CloudErrors point_cloud_errors(std::span<const CovariantPoint> points, const PointIndex& reference,
                               int k = 6, RadiusMode mode = RadiusMode::MaxEigen,
                               const RigidTransform& transform = {}, int threads = 1);

}  // namespace photocov
