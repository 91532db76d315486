#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "photocov/geometry.hpp"
#include "photocov/grid.hpp"
#include "photocov/mvs_uncertainty.hpp"
#include "photocov/sfm_covariance.hpp"

namespace photocov {

enum class DispCovMode {
  Diagonal,  // diag(u^2 v_x^2, u^2 v_y^2) + cross^2 I
  Rank1,     // u^2 v v^T + cross^2 (I - v v^T)
};

enum class RadiusMode {
  MaxEigen,  // sqrt(lambda_max)
  RmsTrace,  // sqrt(trace / 3)
};

struct PropagationConfig {
  /// Stabilizer added as Sigma_eps^-1 to both information matrices (m^2).
  Mat3 sigma_eps = Mat3::Identity() * 1e6;
  /// Pixel noise across the epipolar line (px).
  double cross_epipolar_sigma = 0.5;
  DispCovMode disp_cov_mode = DispCovMode::Diagonal;
  RadiusMode radius_mode = RadiusMode::MaxEigen;
};

/// Throws InvalidConfig.
void validate(const PropagationConfig& cfg);

/// One matched pixel of a dense point.
struct ObservingView {
  int camera_id = 0;
  /// Pixel in the original image of camera_id.
  Vec2 pixel = Vec2::Zero();
  /// The same pixel in the rectified image of its pair.
  Vec2 rect_pixel = Vec2::Zero();
  int pair_id = 0;
  PairSide side = PairSide::Source;
  /// Disparity uncertainty (px).
  double u = 0.0;
};

struct PointContext {
  Vec3 point = Vec3::Zero();
  std::vector<ObservingView> views;

  int n() const noexcept { return static_cast<int>(views.size()); }
};

/// Throws InvalidConfig unless n >= 3 and every u > 0.
void validate(const PointContext& ctx);

using PairGeometries = std::map<int, StereoPairGeometry>;

struct PointJacobians {
  Eigen::MatrixXd b_x;  // 2n x 3
  Eigen::MatrixXd a;    // 2n x p
  /// Cameras spanned by the columns of `a`, in Sigma_S order.
  std::vector<int> camera_ids;
};

/// Sorted distinct cameras observing the point.
std::vector<int> observing_cameras(const PointContext& ctx);

/// Derivatives of every original-image observation with respect to the point
/// and the camera parameters of `camera_ids` (ordered as
/// camera_parameter_indices). Throws NonPositiveDepth.
PointJacobians build_point_jacobians(const PointContext& ctx, std::span<const Camera> cameras,
                                     const ParameterLayout& layout,
                                     const std::vector<int>& camera_ids);

/// Block-diagonal 2n x 2n pixel covariance from the disparity uncertainties,
/// each oriented along its de-rectified epipolar direction.
Eigen::MatrixXd build_sigma_disp(const PointContext& ctx, const PairGeometries& geoms,
                                 std::span<const Camera> cameras, const PropagationConfig& cfg);

/// [Sigma_eps^-1 + B^T (A Sigma_S A^T + lambda I)^-1 B]^-1 with
/// lambda = 1e-10 trace / 2n. Throws SingularInnerMatrix.
Mat3 sigma_sfm(const Eigen::MatrixXd& b_x, const Eigen::MatrixXd& a,
               const Eigen::MatrixXd& sigma_s, const PropagationConfig& cfg);

/// [Sigma_eps^-1 + B^T Sigma_disp^-1 B]^-1. Throws SingularDispCovariance.
Mat3 sigma_mvs(const Eigen::MatrixXd& b_x, const Eigen::MatrixXd& sigma_disp,
               const PropagationConfig& cfg);

struct CovariantPoint {
  int point_id = -1;
  Vec3 position = Vec3::Zero();
  Mat3 sigma_g = Mat3::Zero();
  Mat3 sigma_sfm = Mat3::Zero();
  Mat3 sigma_mvs = Mat3::Zero();
};

/// Sigma_g = Sigma_SfM + Sigma_MVS for one point. `sigma_s` is the joint
/// covariance of `camera_ids`.
CovariantPoint propagate_point(const PointContext& ctx, const Eigen::MatrixXd& sigma_s,
                               const std::vector<int>& camera_ids, std::span<const Camera> cameras,
                               const ParameterLayout& layout, const PairGeometries& geoms,
                               const PropagationConfig& cfg);

/// Convenience overload: Sigma_S is the joint marginal of the observing cameras.
CovariantPoint propagate_point(const PointContext& ctx, const ParameterCovariance& cov,
                               std::span<const Camera> cameras, const PairGeometries& geoms,
                               const PropagationConfig& cfg);

/// Throws NotPSD when the smallest eigenvalue is below -1e-8 trace.
double covariance_radius(const Mat3& sigma, RadiusMode mode = RadiusMode::MaxEigen);

/// Uncertainty maps by pair id.
using UncertaintyLookup = std::map<int, const FloatGrid*>;

/// Context for a dense point: one view per agreeing pair (the matched pixel
/// in the source image) with u read at the point's rectified reference
/// pixel. Throws MissingUncertainty naming the pair.
PointContext make_point_context(const DensePoint& point, const PairGeometries& geoms,
                                std::span<const Camera> cameras,
                                const UncertaintyLookup& uncertainty);

struct CloudPropagation {
  std::vector<CovariantPoint> points;
  /// Indices into the input of points that were skipped (fewer than three
  /// usable views).
  std::vector<std::size_t> skipped;
};

/// Propagates every dense point; points whose context cannot be formed are
/// reported in `skipped`.
CloudPropagation propagate_cloud(std::span<const DensePoint> points, const ParameterCovariance& cov,
                                 std::span<const Camera> cameras, const PairGeometries& geoms,
                                 const UncertaintyLookup& uncertainty,
                                 const PropagationConfig& cfg, int threads = 1);

}  // namespace photocov
