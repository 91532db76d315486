#include "photocov/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "photocov/error.hpp"

namespace photocov {

bool Camera::in_image(const Vec2& pixel) const noexcept {
  return pixel.x() >= -0.5 && pixel.y() >= -0.5 && pixel.x() < width() - 0.5 &&
         pixel.y() < height() - 0.5;
}

Vec3 Camera::ray_direction(const Vec2& pixel) const {
  const Vec3 local((pixel.x() - principal_point.x()) / focal,
                   (pixel.y() - principal_point.y()) / focal, 1.0);
  return (rotation.transpose() * local).normalized();
}

void validate(const Camera& camera) {
  const double ortho = (camera.rotation * camera.rotation.transpose() - Mat3::Identity()).norm();
  if (!(ortho < 1e-9) || camera.rotation.determinant() <= 0.0)
    throw Error(ErrorCode::InvalidSpec, "camera rotation is not a proper rotation");
  if (!(camera.focal > 0.0)) throw Error(ErrorCode::InvalidSpec, "camera focal must be positive");
  if (camera.width() <= 0 || camera.height() <= 0)
    throw Error(ErrorCode::InvalidSpec, "camera image size must be positive");
  const Vec2& pp = camera.principal_point;
  if (!(pp.x() >= 0.0 && pp.y() >= 0.0 && pp.x() <= camera.width() && pp.y() <= camera.height()))
    throw Error(ErrorCode::InvalidSpec, "principal point outside image");
  if (!camera.center.allFinite()) throw Error(ErrorCode::InvalidSpec, "camera center not finite");
}

void validate(const Reconstruction& recon) {
  const auto fail = [](const std::string& where, const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, where + ": " + what);
  };
  for (std::size_t i = 0; i < recon.cameras.size(); ++i) {
    try {
      validate(recon.cameras[i]);
    } catch (const Error& e) {
      fail("/cameras/" + std::to_string(i), e.what());
    }
  }
  std::vector<int> obs_per_point(recon.points.size(), 0);
  for (std::size_t k = 0; k < recon.observations.size(); ++k) {
    const Observation& o = recon.observations[k];
    const std::string where = "/observations/" + std::to_string(k);
    if (o.camera_id < 0 || o.camera_id >= static_cast<int>(recon.cameras.size()))
      fail(where + "/camera_id", "references missing camera " + std::to_string(o.camera_id));
    if (o.point_id < 0 || o.point_id >= static_cast<int>(recon.points.size()))
      fail(where + "/point_id", "references missing point " + std::to_string(o.point_id));
    if (!(o.sigma_px > 0.0)) fail(where + "/sigma_px", "must be positive");
    if (!recon.cameras[o.camera_id].in_image(o.pixel)) fail(where + "/pixel", "outside image");
    ++obs_per_point[o.point_id];
  }
  for (std::size_t j = 0; j < obs_per_point.size(); ++j) {
    if (obs_per_point[j] < 2)
      fail("/points/" + std::to_string(j), "fewer than two observations");
  }
  const auto check_priors = [&](const std::vector<PositionPrior>& priors, std::size_t limit,
                                const std::string& name) {
    for (std::size_t k = 0; k < priors.size(); ++k) {
      const std::string where = "/" + name + "/" + std::to_string(k);
      if (priors[k].target_id < 0 || priors[k].target_id >= static_cast<int>(limit))
        fail(where, "unknown target " + std::to_string(priors[k].target_id));
      const Mat3& c = priors[k].covariance;
      Eigen::LLT<Mat3> llt(c);
      if ((c - c.transpose()).norm() > 1e-12 * c.norm() || llt.info() != Eigen::Success)
        fail(where + "/covariance", "not symmetric positive definite");
    }
  };
  check_priors(recon.gps_priors, recon.cameras.size(), "gps_priors");
  check_priors(recon.gcp_priors, recon.points.size(), "gcp_priors");
}

Vec2 project(const Camera& camera, const Vec3& point) {
  const Vec3 pc = camera.to_camera(point);
  if (!(pc.z() > 0.0))
    throw Error(ErrorCode::NonPositiveDepth, "point at or behind the camera plane");
  return {camera.focal * pc.x() / pc.z() + camera.principal_point.x(),
          camera.focal * pc.y() / pc.z() + camera.principal_point.y()};
}

Vec3 backproject(const Camera& camera, const Vec2& pixel, double depth) {
  const Vec3 local((pixel.x() - camera.principal_point.x()) / camera.focal,
                   (pixel.y() - camera.principal_point.y()) / camera.focal, 1.0);
  return camera.center + camera.rotation.transpose() * (depth * local);
}

Triangulation triangulate(std::span<const PixelObservation> views) {
  if (views.size() < 2)
    throw Error(ErrorCode::DegenerateGeometry, "triangulation needs at least two rays");
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const auto& v : views) {
    const Vec3 d = v.camera.ray_direction(v.pixel);
    const Mat3 proj = Mat3::Identity() - d * d.transpose();
    normal += proj;
    rhs += proj * v.camera.center;
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(normal);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw Error(ErrorCode::DegenerateGeometry, "rays are parallel");
  Triangulation out;
  out.point = normal.ldlt().solve(rhs);
  double sq = 0.0;
  for (const auto& v : views) {
    if (!(v.camera.to_camera(out.point).z() > 0.0))
      throw Error(ErrorCode::DegenerateGeometry, "triangulated point behind a camera");
    sq += (project(v.camera, out.point) - v.pixel).squaredNorm();
  }
  out.rms_residual_px = std::sqrt(sq / static_cast<double>(views.size()));
  return out;
}

StereoPairGeometry rectify_pair(const Camera& ref, const Camera& src, int reference_camera_id,
                                int source_camera_id) {
  const Vec3 base = src.center - ref.center;
  const double b = base.norm();
  if (!(b >= 1e-9)) throw Error(ErrorCode::ZeroBaseline, "camera centers coincide");
  const Vec3 x_axis = base / b;
  const Vec3 mean_axis = ref.optical_axis() + src.optical_axis();
  Vec3 y_axis = mean_axis.cross(x_axis);
  if (!(y_axis.norm() > 1e-9))
    throw Error(ErrorCode::DegenerateGeometry, "viewing direction parallel to the baseline");
  y_axis.normalize();
  const Vec3 z_axis = x_axis.cross(y_axis);

  StereoPairGeometry g;
  g.reference_camera_id = reference_camera_id;
  g.source_camera_id = source_camera_id;
  g.rect_rotation_ref.row(0) = x_axis.transpose();
  g.rect_rotation_ref.row(1) = y_axis.transpose();
  g.rect_rotation_ref.row(2) = z_axis.transpose();
  g.rect_rotation_src = g.rect_rotation_ref;
  g.rect_focal = 0.5 * (ref.focal + src.focal);
  g.rect_principal = ref.principal_point;
  g.baseline = b;
  g.rect_image_size = ref.image_size;
  return g;
}

Camera rectified_camera(const StereoPairGeometry& geom, const Camera& original, PairSide side) {
  Camera c;
  c.rotation = side == PairSide::Reference ? geom.rect_rotation_ref : geom.rect_rotation_src;
  c.center = original.center;
  c.focal = geom.rect_focal;
  c.principal_point = geom.rect_principal;
  c.image_size = geom.rect_image_size;
  return c;
}

namespace {

Mat3 intrinsics(double f, const Vec2& pp) {
  Mat3 k;
  k << f, 0.0, pp.x(), 0.0, f, pp.y(), 0.0, 0.0, 1.0;
  return k;
}

Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const Vec3 q = h * p.homogeneous();
  return q.hnormalized();
}

}  // namespace

Mat3 rectified_to_original_homography(const StereoPairGeometry& geom, const Camera& original,
                                      PairSide side) {
  const Mat3& rect_rot = side == PairSide::Reference ? geom.rect_rotation_ref : geom.rect_rotation_src;
  const Mat3 k_orig = intrinsics(original.focal, original.principal_point);
  const Mat3 k_rect_inv = intrinsics(geom.rect_focal, geom.rect_principal).inverse();
  return k_orig * original.rotation * rect_rot.transpose() * k_rect_inv;
}

Vec2 rectified_to_original(const StereoPairGeometry& geom, const Camera& original, PairSide side,
                           const Vec2& pixel_rect) {
  return apply_homography(rectified_to_original_homography(geom, original, side), pixel_rect);
}

Vec2 original_to_rectified(const StereoPairGeometry& geom, const Camera& original, PairSide side,
                           const Vec2& pixel) {
  return apply_homography(rectified_to_original_homography(geom, original, side).inverse(), pixel);
}

double disparity_depth_convert(double value, double baseline, double focal,
                               ConvertDirection /*direction*/) {
  if (!(value > 0.0) || !(baseline > 0.0) || !(focal > 0.0))
    throw Error(ErrorCode::NonPositiveInput, "disparity/depth conversion needs positive inputs");
  // The map v -> b f / v is an involution, so both directions share one formula.
  return baseline * focal / value;
}

Vec2 derectify_direction(const StereoPairGeometry& geom, const Camera& original, PairSide side,
                         const Vec2& pixel_rect) {
  const double w = geom.rect_image_size[0];
  const double h = geom.rect_image_size[1];
  if (!(pixel_rect.x() >= -0.5 && pixel_rect.y() >= -0.5 && pixel_rect.x() < w - 0.5 &&
        pixel_rect.y() < h - 0.5))
    throw Error(ErrorCode::OutOfBounds, "rectified pixel outside the rectified image");
  const Mat3 hmg = rectified_to_original_homography(geom, original, side);
  const Vec3 p = hmg * pixel_rect.homogeneous();
  // Column 0 of d(p0/p2, p1/p2)/d(x, y), scaled by p2^2 (positive).
  const Vec2 dir(hmg(0, 0) * p.z() - p.x() * hmg(2, 0), hmg(1, 0) * p.z() - p.y() * hmg(2, 0));
  const double n = dir.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "singular de-rectification map");
  return dir / n;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < 1e-12) return Mat3::Identity() + k;
  return Mat3::Identity() + std::sin(theta) / theta * k +
         (1.0 - std::cos(theta)) / (theta * theta) * k * k;
}

}  // namespace photocov
