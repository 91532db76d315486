#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "photocov/geometry.hpp"
#include "photocov/grid.hpp"

namespace photocov {

/// Matcher output for one rectified pair, on the rectified reference grid.
/// Disparity follows d = x_ref - x_src; NaN marks invalid pixels.
struct PairMeasurements {
  int pair_id = 0;
  StereoPairGeometry pair;
  FloatGrid disparity;
  FloatGrid cost;
};

/// Throws DimensionMismatch or InvalidDisparity.
void validate(const PairMeasurements& m);

/// Median-fused depth for one reference view. Bit k of `agree_mask` is set
/// when input map k agreed with the median at that pixel.
struct FusedDepthView {
  int reference_camera_id = 0;
  FloatGrid depth;
  IntGrid view_count;
  Grid<std::uint32_t> agree_mask;
};

struct FusionOptions {
  int min_views = 3;
  /// Relative depth tolerance around the median.
  double agree_tol = 0.01;
};

/// Per pixel: median of the valid depths, then the median of the values
/// within agree_tol of it. Pixels with fewer than min_views agreeing depths
/// are invalid. Throws DimensionMismatch; at most 32 inputs.
FusedDepthView fuse_depth_maps(std::span<const FloatGrid> pairwise_depths,
                               int reference_camera_id = 0, const FusionOptions& options = {});

/// A dense point from a fused depth view.
struct DensePoint {
  int point_id = 0;
  int reference_camera_id = 0;
  Vec2 pixel = Vec2::Zero();
  Vec3 position = Vec3::Zero();
  int view_count = 0;
  std::uint32_t agree_mask = 0;
  /// Global ids of the pairs that agreed; filled by the calibration pipeline.
  std::vector<int> pair_ids;
};

/// Points of every valid fused pixel with view_count >= n_min, ordered by
/// (reference view, row-major pixel). Point ids are assigned over all valid
/// fused pixels, so they do not depend on n_min. Throws InvalidConfig when
/// n_min < 3.
std::vector<DensePoint> select_nview_points(std::span<const FusedDepthView> fused,
                                            const Reconstruction& recon, int n_min = 6);

struct NViewSample {
  int point_id = 0;
  int pair_id = 0;
  /// x_reproj - x_match along the rectified epipolar line (px).
  double residual = 0.0;
  double cost = 0.0;
  int view_count = 0;
  /// Row-major index of the rectified reference pixel that was read.
  std::size_t pixel_index = 0;
};

enum class SampleStatus { Ok, OutsideImage, InvalidDisparity };

/// Non-throwing variant used in bulk sampling.
SampleStatus try_sample_residual_cost(const Vec3& point, const PairMeasurements& pair,
                                      const Camera& reference, const Camera& source,
                                      NViewSample& out);

/// Reprojects `point` into both rectified views and compares the source
/// column with the match implied by the disparity at the reference pixel.
/// Throws OutsideImage or InvalidDisparity.
NViewSample sample_residual_cost(const Vec3& point, const PairMeasurements& pair,
                                 const Camera& reference, const Camera& source,
                                 int point_id = -1, int view_count = 0);

struct CSigmaBin {
  double cost_center = 0.0;
  double sigma = 0.0;
  int count = 0;
};

struct CSigmaTable {
  int pair_id = 0;
  std::vector<CSigmaBin> bins;
  double cost_min = 0.0;
  double cost_max = 0.0;
};

struct TableOptions {
  int bin_count = 16;
  int min_bin_count = 30;
};

/// Equal-width cost bins over the pair's own cost range. Under-populated
/// bins are merged into their nearest neighbour; sigma is the unbiased
/// two-pass standard deviation of the residuals in each bin. Throws
/// InsufficientSamples below 2 * min_bin_count samples.
CSigmaTable build_c_sigma_table(std::span<const NViewSample> samples,
                                const TableOptions& options = {}, int pair_id = 0);

inline constexpr double kDefaultUncertaintyFloor = 0.1;

/// Piecewise-linear sigma(c) through the bin centers, clamped at both ends
/// and floored at u_min.
double interpolate_uncertainty(double cost, const CSigmaTable& table,
                               double u_min = kDefaultUncertaintyFloor);

/// u' = (max(u, |r|) + u) / 2.
double refine_uncertainty(double u, double residual);

struct UncertaintyMap {
  int pair_id = 0;
  FloatGrid u;
};

/// Residual of the triangulated point behind a rectified reference pixel,
/// keyed by row-major pixel index.
using ResidualMap = std::unordered_map<std::size_t, double>;

/// One map per pair. `triangulated` is either empty or aligned with `pairs`.
/// Throws MissingTable when a pair has no table.
std::vector<UncertaintyMap> build_uncertainty_maps(std::span<const PairMeasurements> pairs,
                                                   std::span<const CSigmaTable> tables,
                                                   std::span<const ResidualMap> triangulated,
                                                   double u_min = kDefaultUncertaintyFloor,
                                                   int threads = 1);

}  // namespace photocov
