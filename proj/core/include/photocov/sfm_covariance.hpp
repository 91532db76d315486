#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "photocov/geometry.hpp"

namespace photocov {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Which intrinsics enter the parameter vector.
enum class IntrinsicsMode {
  Fixed,      // pose only, p = 6 per camera
  Shared,     // one (f, cx, cy) triple for the whole block
  PerCamera,  // (f, cx, cy) per camera
};

/// Column layout of the parameter vector:
///   [pose_0 .. pose_{c-1} | intrinsics | point_0 .. point_{q-1}]
/// with pose = (omega_x, omega_y, omega_z, c_x, c_y, c_z). The rotation
/// increment is applied on the left, R <- exp(omega) R, and the center is the
/// camera position in the world frame.
struct ParameterLayout {
  static constexpr int kPoseSize = 6;
  static constexpr int kIntrinsicsSize = 3;
  static constexpr int kPointSize = 3;

  int num_cameras = 0;
  int num_points = 0;
  IntrinsicsMode intrinsics = IntrinsicsMode::Fixed;

  int intrinsic_count() const noexcept;
  int camera_param_count() const noexcept { return kPoseSize * num_cameras + intrinsic_count(); }
  int total() const noexcept { return camera_param_count() + kPointSize * num_points; }
  int pose_offset(int camera) const noexcept { return kPoseSize * camera; }
  int position_offset(int camera) const noexcept { return kPoseSize * camera + 3; }
  /// First intrinsic column used by `camera`, or -1 when intrinsics are fixed.
  int intrinsics_offset(int camera) const noexcept;
  int point_offset(int point) const noexcept { return camera_param_count() + kPointSize * point; }
};

/// Camera-parameter columns for a camera subset, in the order used for the
/// joint marginal: each camera's pose then its own intrinsics (PerCamera),
/// followed by the shared intrinsics once (Shared).
std::vector<int> camera_parameter_indices(const ParameterLayout& layout,
                                          const std::vector<int>& camera_ids);

/// Derivatives of the projection (not the residual) at one camera/point.
struct ProjectionDerivatives {
  Vec2 pixel;
  Eigen::Matrix<double, 2, 6> pose;
  Eigen::Matrix<double, 2, 3> intrinsics;
  Eigen::Matrix<double, 2, 3> point;
};

ProjectionDerivatives projection_derivatives(const Camera& camera, const Vec3& point);

/// Applies a parameter increment in the layout's convention.
Camera perturb_camera(const Camera& camera, const Vec6& pose_delta,
                      const Vec3& intrinsics_delta = Vec3::Zero());

struct ObservationBlock {
  int row = 0;
  Eigen::MatrixXd covariance;
};

enum class PriorKind { GPS, GCP };

struct PriorBlock {
  PriorKind kind = PriorKind::GPS;
  int target_id = 0;
  Vec3 value = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  /// Information is weight * covariance^-1.
  double weight = 1.0;
};

/// Reprojection (and optionally prior) residuals linearized at the current
/// estimate. Residuals are observed minus predicted.
struct LinearizedSystem {
  ParameterLayout layout;
  Eigen::SparseMatrix<double, Eigen::RowMajor> jacobian;
  Eigen::VectorXd residuals;
  /// Block-diagonal observation covariance, blocks sorted by row.
  std::vector<ObservationBlock> obs_covariance;
  int reprojection_rows = 0;
  /// Linearization point for the prior residuals.
  std::vector<Vec3> camera_centers;
  std::vector<Vec3> points;

  int rows() const { return static_cast<int>(jacobian.rows()); }
};

struct LinearizeOptions {
  IntrinsicsMode intrinsics = IntrinsicsMode::Fixed;
  int threads = 1;
};

/// Analytic Jacobian of all reprojection residuals. Throws NonPositiveDepth
/// listing every offending observation.
LinearizedSystem linearize(const Reconstruction& recon, const LinearizeOptions& options = {});

/// Appends three rows per prior with identity blocks on the target columns.
/// Throws UnknownTarget.
LinearizedSystem assemble_with_priors(const LinearizedSystem& sys,
                                      const std::vector<PriorBlock>& priors);

/// GPS/GCP priors stored in the reconstruction, weighted by alpha and beta.
std::vector<PriorBlock> priors_from(const Reconstruction& recon, double alpha = 1.0,
                                    double beta = 1.0);

enum class GaugeMode { FixedGauge, PriorAnchored };

/// Parameter covariance kept in Schur-factored form. Camera parameters carry
/// a dense block; point blocks are recovered from the per-point terms on
/// demand.
struct ParameterCovariance {
  ParameterLayout layout;
  GaugeMode gauge_mode = GaugeMode::FixedGauge;
  /// Camera-parameter columns held fixed by the gauge (zero covariance).
  std::vector<int> fixed_columns;
  /// Inverse reduced camera system, expanded to all camera parameters.
  Eigen::MatrixXd camera_covariance;
  std::vector<Mat3> point_information_inverse;
  /// Camera/point coupling blocks of the information matrix (pc x 3 each).
  std::vector<Eigen::MatrixXd> point_coupling;
  /// Condition number of the Jacobi-scaled reduced camera system.
  double condition_number = 0.0;

  /// Marginal covariance of one point.
  Mat3 point_covariance(int point) const;
  /// Cross covariance between camera parameters and one point (pc x 3).
  Eigen::MatrixXd camera_point_covariance(int point) const;
  /// Dense covariance over the full parameter vector. Only for small systems.
  Eigen::MatrixXd full_covariance() const;
};

/// Inverse of the (prior-augmented) information matrix J^T Sigma^-1 J.
/// FixedGauge removes the first camera's pose and the dominant baseline
/// component of the second camera's position. Throws RankDeficient when the
/// reduced system's condition number exceeds 1e14.
ParameterCovariance parameter_covariance(const LinearizedSystem& sys, GaugeMode gauge);

/// Joint covariance of the listed cameras' parameters, ordered as
/// camera_parameter_indices().
Eigen::MatrixXd marginal_camera_covariance(const ParameterCovariance& cov,
                                           const std::vector<int>& camera_ids);

/// Dense J^T Sigma^-1 J.
Eigen::MatrixXd dense_information(const LinearizedSystem& sys);

}  // namespace photocov
