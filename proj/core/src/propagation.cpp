#include "photocov/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

namespace {

// The ridge bounds the condition number by about 2n * 1e10.
constexpr double kMaxInnerCondition = 1e14;

Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

Mat3 invert_spd3(const Mat3& info, ErrorCode code, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(symmetrize(info));
  const Vec3 ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || !ev.allFinite())
    throw Error(code, std::string(what) + " information matrix is singular");
  const Mat3 v = es.eigenvectors();
  return symmetrize(v * ev.cwiseInverse().asDiagonal() * v.transpose());
}

Mat3 sigma_eps_inverse(const PropagationConfig& cfg) {
  return symmetrize(cfg.sigma_eps.inverse());
}

const Camera& camera_at(std::span<const Camera> cameras, int id) {
  if (id < 0 || id >= static_cast<int>(cameras.size()))
    throw Error(ErrorCode::UnknownTarget, "camera " + std::to_string(id) + " does not exist");
  return cameras[id];
}

const StereoPairGeometry& geometry_at(const PairGeometries& geoms, int pair_id) {
  auto it = geoms.find(pair_id);
  if (it == geoms.end())
    throw Error(ErrorCode::UnknownTarget, "pair " + std::to_string(pair_id) + " has no geometry");
  return it->second;
}

}  // namespace

void validate(const PropagationConfig& cfg) {
  if (!cfg.sigma_eps.allFinite())
    throw Error(ErrorCode::InvalidConfig, "sigma_eps must be finite");
  Eigen::SelfAdjointEigenSolver<Mat3> es(symmetrize(cfg.sigma_eps));
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw Error(ErrorCode::InvalidConfig, "sigma_eps must be positive definite");
  if (!(cfg.cross_epipolar_sigma > 0.0) || !std::isfinite(cfg.cross_epipolar_sigma))
    throw Error(ErrorCode::InvalidConfig, "cross_epipolar_sigma must be positive");
}

void validate(const PointContext& ctx) {
  if (ctx.n() < 3)
    throw Error(ErrorCode::InvalidConfig,
                "a point needs at least 3 observing views, got " + std::to_string(ctx.n()));
  for (const ObservingView& v : ctx.views)
    if (!(v.u > 0.0) || !std::isfinite(v.u))
      throw Error(ErrorCode::MissingUncertainty,
                  "no positive uncertainty for pair " + std::to_string(v.pair_id));
}

std::vector<int> observing_cameras(const PointContext& ctx) {
  std::vector<int> ids;
  for (const ObservingView& v : ctx.views) ids.push_back(v.camera_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

PointJacobians build_point_jacobians(const PointContext& ctx, std::span<const Camera> cameras,
                                     const ParameterLayout& layout,
                                     const std::vector<int>& camera_ids) {
  const int n = ctx.n();
  const std::vector<int> columns = camera_parameter_indices(layout, camera_ids);
  PointJacobians jac;
  jac.camera_ids = camera_ids;
  jac.b_x = Eigen::MatrixXd::Zero(2 * n, 3);
  jac.a = Eigen::MatrixXd::Zero(2 * n, static_cast<Eigen::Index>(columns.size()));

  // Global column -> local column of A.
  auto local = [&](int global) -> int {
    auto it = std::find(columns.begin(), columns.end(), global);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
  };

  for (int i = 0; i < n; ++i) {
    const ObservingView& v = ctx.views[i];
    const ProjectionDerivatives d = projection_derivatives(camera_at(cameras, v.camera_id), ctx.point);
    jac.b_x.block<2, 3>(2 * i, 0) = d.point;
    if (std::find(camera_ids.begin(), camera_ids.end(), v.camera_id) == camera_ids.end()) continue;
    const int pose = local(layout.pose_offset(v.camera_id));
    jac.a.block<2, 6>(2 * i, pose) = d.pose;
    const int intr = layout.intrinsics_offset(v.camera_id);
    if (intr >= 0) {
      const int li = local(intr);
      if (li >= 0) jac.a.block<2, 3>(2 * i, li) = d.intrinsics;
    }
  }
  return jac;
}

Eigen::MatrixXd build_sigma_disp(const PointContext& ctx, const PairGeometries& geoms,
                                 std::span<const Camera> cameras, const PropagationConfig& cfg) {
  const int n = ctx.n();
  const double c2 = cfg.cross_epipolar_sigma * cfg.cross_epipolar_sigma;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const ObservingView& v = ctx.views[i];
    if (!(v.u > 0.0) || !std::isfinite(v.u))
      throw Error(ErrorCode::MissingUncertainty,
                  "no positive uncertainty for pair " + std::to_string(v.pair_id));
    const Vec2 dir = derectify_direction(geometry_at(geoms, v.pair_id),
                                         camera_at(cameras, v.camera_id), v.side, v.rect_pixel);
    const double u2 = v.u * v.u;
    Mat2 block;
    if (cfg.disp_cov_mode == DispCovMode::Diagonal) {
      block = Vec2(u2 * dir.x() * dir.x(), u2 * dir.y() * dir.y()).asDiagonal();
      block += c2 * Mat2::Identity();
    } else {
      const Mat2 vvt = dir * dir.transpose();
      block = u2 * vvt + c2 * (Mat2::Identity() - vvt);
    }
    s.block<2, 2>(2 * i, 2 * i) = block;
  }
  return s;
}

Mat3 sigma_sfm(const Eigen::MatrixXd& b_x, const Eigen::MatrixXd& a,
               const Eigen::MatrixXd& sigma_s, const PropagationConfig& cfg) {
  const Eigen::Index m = b_x.rows();
  if (a.rows() != m || a.cols() != sigma_s.rows() || sigma_s.rows() != sigma_s.cols() ||
      b_x.cols() != 3)
    throw Error(ErrorCode::DimensionMismatch, "inconsistent Jacobian and covariance shapes");
  Eigen::MatrixXd inner = a * sigma_s * a.transpose();
  inner = 0.5 * (inner + inner.transpose()).eval();
  // Ridge keeps the rank-deficient camera term invertible; the floor covers
  // a zero camera covariance.
  const double lambda = std::max(1e-10 * inner.trace() / static_cast<double>(m), 1e-20);
  inner.diagonal().array() += lambda;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::SingularInnerMatrix, "eigen decomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > kMaxInnerCondition)
    throw Error(ErrorCode::SingularInnerMatrix,
                "A Sigma_S A^T + lambda I is not invertible (condition " +
                    std::to_string(ev.maxCoeff() / ev.minCoeff()) + ")");
  const Eigen::MatrixXd vb = es.eigenvectors().transpose() * b_x;
  const Mat3 info = sigma_eps_inverse(cfg) + vb.transpose() * ev.cwiseInverse().asDiagonal() * vb;
  return invert_spd3(info, ErrorCode::SingularInnerMatrix, "SfM");
}

Mat3 sigma_mvs(const Eigen::MatrixXd& b_x, const Eigen::MatrixXd& sigma_disp,
               const PropagationConfig& cfg) {
  if (sigma_disp.rows() != b_x.rows() || sigma_disp.cols() != b_x.rows() || b_x.cols() != 3)
    throw Error(ErrorCode::DimensionMismatch, "Sigma_disp does not match B_X");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (sigma_disp + sigma_disp.transpose()));
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularDispCovariance, "Sigma_disp is not positive definite");
  const Eigen::MatrixXd lb = llt.matrixL().solve(b_x);
  const Mat3 info = sigma_eps_inverse(cfg) + lb.transpose() * lb;
  return invert_spd3(info, ErrorCode::SingularDispCovariance, "MVS");
}

CovariantPoint propagate_point(const PointContext& ctx, const Eigen::MatrixXd& sigma_s,
                               const std::vector<int>& camera_ids, std::span<const Camera> cameras,
                               const ParameterLayout& layout, const PairGeometries& geoms,
                               const PropagationConfig& cfg) {
  validate(ctx);
  const PointJacobians jac = build_point_jacobians(ctx, cameras, layout, camera_ids);
  CovariantPoint out;
  out.position = ctx.point;
  out.sigma_sfm = sigma_sfm(jac.b_x, jac.a, sigma_s, cfg);
  out.sigma_mvs = sigma_mvs(jac.b_x, build_sigma_disp(ctx, geoms, cameras, cfg), cfg);
  out.sigma_g = out.sigma_sfm + out.sigma_mvs;
  return out;
}

CovariantPoint propagate_point(const PointContext& ctx, const ParameterCovariance& cov,
                               std::span<const Camera> cameras, const PairGeometries& geoms,
                               const PropagationConfig& cfg) {
  const std::vector<int> ids = observing_cameras(ctx);
  return propagate_point(ctx, marginal_camera_covariance(cov, ids), ids, cameras, cov.layout,
                         geoms, cfg);
}

double covariance_radius(const Mat3& sigma, RadiusMode mode) {
  if (!sigma.allFinite()) throw Error(ErrorCode::NotPSD, "covariance has non-finite entries");
  const Mat3 s = symmetrize(sigma);
  Eigen::SelfAdjointEigenSolver<Mat3> es(s, Eigen::EigenvaluesOnly);
  const Vec3 ev = es.eigenvalues();
  const double tr = s.trace();
  if (ev.minCoeff() < -1e-8 * std::max(std::abs(tr), 1e-300))
    throw Error(ErrorCode::NotPSD,
                "smallest eigenvalue " + std::to_string(ev.minCoeff()) + " is negative");
  if (mode == RadiusMode::MaxEigen) return std::sqrt(std::max(ev.maxCoeff(), 0.0));
  return std::sqrt(std::max(tr, 0.0) / 3.0);
}

PointContext make_point_context(const DensePoint& point, const PairGeometries& geoms,
                                std::span<const Camera> cameras,
                                const UncertaintyLookup& uncertainty) {
  PointContext ctx;
  ctx.point = point.position;
  for (int pair_id : point.pair_ids) {
    const StereoPairGeometry& g = geometry_at(geoms, pair_id);
    auto map_it = uncertainty.find(pair_id);
    if (map_it == uncertainty.end() || map_it->second == nullptr)
      throw Error(ErrorCode::MissingUncertainty,
                  "no uncertainty map for pair " + std::to_string(pair_id));
    const FloatGrid& u_map = *map_it->second;
    const Camera& ref = camera_at(cameras, g.reference_camera_id);
    const Camera& src = camera_at(cameras, g.source_camera_id);
    const Camera ref_rect = rectified_camera(g, ref, PairSide::Reference);
    const Camera src_rect = rectified_camera(g, src, PairSide::Source);
    if (!(ref_rect.to_camera(point.position).z() > 0.0) ||
        !(src_rect.to_camera(point.position).z() > 0.0) ||
        !(src.to_camera(point.position).z() > 0.0))
      continue;
    const Vec2 x_ref = project(ref_rect, point.position);
    const Vec2 x_src = project(src_rect, point.position);
    if (!ref_rect.in_image(x_ref) || !src_rect.in_image(x_src)) continue;
    const int col = static_cast<int>(std::lround(x_ref.x()));
    const int row = static_cast<int>(std::lround(x_ref.y()));
    if (!u_map.contains(col, row)) continue;
    const float u = u_map(col, row);
    if (!is_valid(u) || !(u > 0.0f)) continue;
    ObservingView v;
    v.camera_id = g.source_camera_id;
    v.pixel = project(src, point.position);
    v.rect_pixel = x_src;
    v.pair_id = pair_id;
    v.side = PairSide::Source;
    v.u = u;
    ctx.views.push_back(v);
  }
  return ctx;
}

CloudPropagation propagate_cloud(std::span<const DensePoint> points, const ParameterCovariance& cov,
                                 std::span<const Camera> cameras, const PairGeometries& geoms,
                                 const UncertaintyLookup& uncertainty,
                                 const PropagationConfig& cfg, int threads) {
  validate(cfg);
  std::vector<CovariantPoint> out(points.size());
  std::vector<char> ok(points.size(), 0);
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const PointContext ctx = make_point_context(points[i], geoms, cameras, uncertainty);
    if (ctx.n() < 3) return;
    out[i] = propagate_point(ctx, cov, cameras, geoms, cfg);
    out[i].point_id = points[i].point_id;
    ok[i] = 1;
  });
  CloudPropagation res;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (ok[i])
      res.points.push_back(out[i]);
    else
      res.skipped.push_back(i);
  }
  return res;
}

}  // namespace photocov
