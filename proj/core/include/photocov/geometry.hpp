#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace photocov {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera. `rotation` maps world to camera coordinates and `center`
/// is the projection center in the world frame, so a world point X lands at
/// rotation * (X - center) in the camera frame. Pixel coordinates follow the
/// usual image convention: +x to the right, +y down, camera looks along +z.
struct Camera {
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  double focal = 1.0;
  Vec2 principal_point = Vec2::Zero();
  std::array<int, 2> image_size{1, 1};  // width, height

  int width() const noexcept { return image_size[0]; }
  int height() const noexcept { return image_size[1]; }

  Vec3 to_camera(const Vec3& world) const { return rotation * (world - center); }

  /// Pixel lies inside [0, width) x [0, height).
  bool in_image(const Vec2& pixel) const noexcept;

  /// Unit world-frame direction of the ray through `pixel`.
  Vec3 ray_direction(const Vec2& pixel) const;

  /// Optical axis in the world frame.
  Vec3 optical_axis() const { return rotation.row(2).transpose(); }
};

/// Throws InvalidSpec if the camera violates its invariants.
void validate(const Camera& camera);

struct Observation {
  int camera_id = 0;
  int point_id = 0;
  Vec2 pixel = Vec2::Zero();
  double sigma_px = 0.5;
};

/// Absolute position prior. For GPS the target is a camera center, for a GCP
/// it is a 3D point.
struct PositionPrior {
  int target_id = 0;
  Vec3 position = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

/// Converged bundle adjustment state.
struct Reconstruction {
  std::vector<Camera> cameras;
  std::vector<Vec3> points;
  std::vector<Observation> observations;
  std::vector<PositionPrior> gps_priors;
  std::vector<PositionPrior> gcp_priors;
  /// One focal/principal point triple for every camera when intrinsics are
  /// estimated. Per-camera values are still stored on each Camera.
  bool shared_intrinsics = false;
};

/// Throws SchemaViolation naming the offending element.
void validate(const Reconstruction& recon);

/// Rectified stereo pair. Both rectified cameras share rotation, focal length,
/// and principal point; the rectified x axis points from the reference center
/// to the source center, so the source is always on the right and disparity
/// d = x_ref - x_src is positive for points in front of the rig.
struct StereoPairGeometry {
  int reference_camera_id = 0;
  int source_camera_id = 1;
  Mat3 rect_rotation_ref = Mat3::Identity();
  Mat3 rect_rotation_src = Mat3::Identity();
  double rect_focal = 1.0;
  Vec2 rect_principal = Vec2::Zero();
  double baseline = 1.0;
  std::array<int, 2> rect_image_size{1, 1};
};

enum class PairSide { Reference, Source };

/// Pinhole projection. Throws NonPositiveDepth when the point is on or
/// behind the camera plane.
Vec2 project(const Camera& camera, const Vec3& point);

/// Point at camera-frame depth `depth` along the ray through `pixel`.
Vec3 backproject(const Camera& camera, const Vec2& pixel, double depth);

struct PixelObservation {
  Camera camera;
  Vec2 pixel;
};

struct Triangulation {
  Vec3 point = Vec3::Zero();
  /// RMS reprojection residual over all views (px).
  double rms_residual_px = 0.0;
};

/// Least-squares midpoint of all viewing rays.
Triangulation triangulate(std::span<const PixelObservation> views);

StereoPairGeometry rectify_pair(const Camera& ref, const Camera& src,
                                int reference_camera_id = 0, int source_camera_id = 1);

/// The virtual rectified camera for one side of the pair.
Camera rectified_camera(const StereoPairGeometry& geom, const Camera& original, PairSide side);

/// Homography taking homogeneous rectified pixels to original pixels.
Mat3 rectified_to_original_homography(const StereoPairGeometry& geom, const Camera& original,
                                      PairSide side);

Vec2 rectified_to_original(const StereoPairGeometry& geom, const Camera& original,
                           PairSide side, const Vec2& pixel_rect);
Vec2 original_to_rectified(const StereoPairGeometry& geom, const Camera& original,
                           PairSide side, const Vec2& pixel);

enum class ConvertDirection { DepthToDisparity, DisparityToDepth };

/// d = b f / D and D = b f / d. Throws NonPositiveInput.
double disparity_depth_convert(double value, double baseline, double focal,
                               ConvertDirection direction);

inline double depth_to_disparity(double depth, double baseline, double focal) {
  return disparity_depth_convert(depth, baseline, focal, ConvertDirection::DepthToDisparity);
}
inline double disparity_to_depth(double disparity, double baseline, double focal) {
  return disparity_depth_convert(disparity, baseline, focal, ConvertDirection::DisparityToDepth);
}

/// Unit image-space direction of the rectified epipolar line (+x) at
/// `pixel_rect`, mapped through the local Jacobian of the rectified to
/// original pixel map. Throws OutOfBounds outside the rectified image.
Vec2 derectify_direction(const StereoPairGeometry& geom, const Camera& original, PairSide side,
                         const Vec2& pixel_rect);

// Rotation helpers.
Mat3 skew(const Vec3& v);
/// Rodrigues' formula.
Mat3 rotation_exp(const Vec3& omega);

}  // namespace photocov
