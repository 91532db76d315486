#include "photocov/sfm_covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

int ParameterLayout::intrinsic_count() const noexcept {
  switch (intrinsics) {
    case IntrinsicsMode::Fixed: return 0;
    case IntrinsicsMode::Shared: return kIntrinsicsSize;
    case IntrinsicsMode::PerCamera: return kIntrinsicsSize * num_cameras;
  }
  return 0;
}

int ParameterLayout::intrinsics_offset(int camera) const noexcept {
  switch (intrinsics) {
    case IntrinsicsMode::Fixed: return -1;
    case IntrinsicsMode::Shared: return kPoseSize * num_cameras;
    case IntrinsicsMode::PerCamera: return kPoseSize * num_cameras + kIntrinsicsSize * camera;
  }
  return -1;
}

std::vector<int> camera_parameter_indices(const ParameterLayout& layout,
                                          const std::vector<int>& camera_ids) {
  std::vector<int> idx;
  for (int cam : camera_ids) {
    if (cam < 0 || cam >= layout.num_cameras)
      throw Error(ErrorCode::UnknownTarget, "camera " + std::to_string(cam) + " does not exist");
    for (int k = 0; k < ParameterLayout::kPoseSize; ++k) idx.push_back(layout.pose_offset(cam) + k);
    if (layout.intrinsics == IntrinsicsMode::PerCamera)
      for (int k = 0; k < ParameterLayout::kIntrinsicsSize; ++k)
        idx.push_back(layout.intrinsics_offset(cam) + k);
  }
  if (layout.intrinsics == IntrinsicsMode::Shared)
    for (int k = 0; k < ParameterLayout::kIntrinsicsSize; ++k)
      idx.push_back(layout.intrinsics_offset(0) + k);
  return idx;
}

ProjectionDerivatives projection_derivatives(const Camera& camera, const Vec3& point) {
  const Vec3 pc = camera.to_camera(point);
  if (!(pc.z() > 0.0))
    throw Error(ErrorCode::NonPositiveDepth, "point at or behind the camera plane");
  const double iz = 1.0 / pc.z();
  const double xn = pc.x() * iz;
  const double yn = pc.y() * iz;
  Eigen::Matrix<double, 2, 3> d_pc;
  d_pc << camera.focal * iz, 0.0, -camera.focal * xn * iz,
          0.0, camera.focal * iz, -camera.focal * yn * iz;

  ProjectionDerivatives d;
  d.pixel = Vec2(camera.focal * xn + camera.principal_point.x(),
                 camera.focal * yn + camera.principal_point.y());
  // pc = exp(omega) R (X - C): dpc/domega = -[pc]x, dpc/dC = -R, dpc/dX = R.
  d.pose.leftCols<3>() = -d_pc * skew(pc);
  d.pose.rightCols<3>() = -d_pc * camera.rotation;
  d.point = d_pc * camera.rotation;
  d.intrinsics << xn, 1.0, 0.0, yn, 0.0, 1.0;
  return d;
}

Camera perturb_camera(const Camera& camera, const Vec6& pose_delta, const Vec3& intrinsics_delta) {
  Camera c = camera;
  c.rotation = rotation_exp(pose_delta.head<3>()) * camera.rotation;
  c.center += pose_delta.tail<3>();
  c.focal += intrinsics_delta.x();
  c.principal_point += intrinsics_delta.tail<2>();
  return c;
}

LinearizedSystem linearize(const Reconstruction& recon, const LinearizeOptions& options) {
  LinearizedSystem sys;
  sys.layout.num_cameras = static_cast<int>(recon.cameras.size());
  sys.layout.num_points = static_cast<int>(recon.points.size());
  sys.layout.intrinsics = options.intrinsics;
  const ParameterLayout& layout = sys.layout;
  const std::size_t m = recon.observations.size();

  std::vector<ProjectionDerivatives> derivs(m);
  std::vector<char> bad(m, 0);
  parallel_for(m, options.threads, [&](std::size_t k) {
    const Observation& o = recon.observations[k];
    const Camera& cam = recon.cameras.at(o.camera_id);
    const Vec3& x = recon.points.at(o.point_id);
    if (!(cam.to_camera(x).z() > 0.0)) {
      bad[k] = 1;
      return;
    }
    derivs[k] = projection_derivatives(cam, x);
  });
  std::string offenders;
  for (std::size_t k = 0; k < m; ++k)
    if (bad[k]) offenders += (offenders.empty() ? "" : ", ") + std::to_string(k);
  if (!offenders.empty())
    throw Error(ErrorCode::NonPositiveDepth, "observations with non-positive depth: " + offenders);

  const int rows = static_cast<int>(2 * m);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(m * 2 * 12);
  sys.residuals.resize(rows);
  sys.obs_covariance.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Observation& o = recon.observations[k];
    const ProjectionDerivatives& d = derivs[k];
    const int r0 = static_cast<int>(2 * k);
    sys.residuals.segment<2>(r0) = o.pixel - d.pixel;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 6; ++c)
        triplets.emplace_back(r0 + r, layout.pose_offset(o.camera_id) + c, -d.pose(r, c));
      if (layout.intrinsics != IntrinsicsMode::Fixed)
        for (int c = 0; c < 3; ++c)
          triplets.emplace_back(r0 + r, layout.intrinsics_offset(o.camera_id) + c,
                                -d.intrinsics(r, c));
      for (int c = 0; c < 3; ++c)
        triplets.emplace_back(r0 + r, layout.point_offset(o.point_id) + c, -d.point(r, c));
    }
    sys.obs_covariance.push_back({r0, Eigen::Matrix2d::Identity() * (o.sigma_px * o.sigma_px)});
  }
  sys.jacobian.resize(rows, layout.total());
  sys.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  sys.reprojection_rows = rows;
  sys.camera_centers.reserve(recon.cameras.size());
  for (const Camera& c : recon.cameras) sys.camera_centers.push_back(c.center);
  sys.points = recon.points;
  return sys;
}

LinearizedSystem assemble_with_priors(const LinearizedSystem& sys,
                                      const std::vector<PriorBlock>& priors) {
  if (priors.empty()) return sys;
  const ParameterLayout& layout = sys.layout;
  for (const PriorBlock& p : priors) {
    const int limit = p.kind == PriorKind::GPS ? layout.num_cameras : layout.num_points;
    if (p.target_id < 0 || p.target_id >= limit)
      throw Error(ErrorCode::UnknownTarget,
                  std::string(p.kind == PriorKind::GPS ? "GPS" : "GCP") + " prior target " +
                      std::to_string(p.target_id) + " does not exist");
    if (!(p.weight > 0.0)) throw Error(ErrorCode::InvalidConfig, "prior weight must be positive");
  }

  LinearizedSystem out = sys;
  const int base_rows = sys.rows();
  const int rows = base_rows + 3 * static_cast<int>(priors.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(sys.jacobian.nonZeros() + 3 * priors.size());
  for (int r = 0; r < sys.jacobian.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(sys.jacobian, r); it; ++it)
      triplets.emplace_back(it.row(), it.col(), it.value());

  out.residuals.conservativeResize(rows);
  for (std::size_t k = 0; k < priors.size(); ++k) {
    const PriorBlock& p = priors[k];
    const int r0 = base_rows + 3 * static_cast<int>(k);
    const int col = p.kind == PriorKind::GPS ? layout.position_offset(p.target_id)
                                             : layout.point_offset(p.target_id);
    const Vec3& current =
        p.kind == PriorKind::GPS ? sys.camera_centers[p.target_id] : sys.points[p.target_id];
    for (int a = 0; a < 3; ++a) triplets.emplace_back(r0 + a, col + a, 1.0);
    out.residuals.segment<3>(r0) = current - p.value;
    out.obs_covariance.push_back({r0, Eigen::MatrixXd(p.covariance / p.weight)});
  }
  out.jacobian.resize(rows, layout.total());
  out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

std::vector<PriorBlock> priors_from(const Reconstruction& recon, double alpha, double beta) {
  std::vector<PriorBlock> out;
  for (const auto& g : recon.gps_priors)
    out.push_back({PriorKind::GPS, g.target_id, g.position, g.covariance, alpha});
  for (const auto& g : recon.gcp_priors)
    out.push_back({PriorKind::GCP, g.target_id, g.position, g.covariance, beta});
  return out;
}

namespace {

Eigen::SparseMatrix<double> information_weights(const LinearizedSystem& sys) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (const ObservationBlock& b : sys.obs_covariance) {
    const Eigen::MatrixXd info = b.covariance.llt().solve(
        Eigen::MatrixXd::Identity(b.covariance.rows(), b.covariance.cols()));
    for (int i = 0; i < info.rows(); ++i)
      for (int j = 0; j < info.cols(); ++j)
        if (info(i, j) != 0.0) triplets.emplace_back(b.row + i, b.row + j, info(i, j));
  }
  Eigen::SparseMatrix<double> w(sys.rows(), sys.rows());
  w.setFromTriplets(triplets.begin(), triplets.end());
  return w;
}

Eigen::SparseMatrix<double> sparse_information(const LinearizedSystem& sys) {
  const Eigen::SparseMatrix<double> j = sys.jacobian;
  const Eigen::SparseMatrix<double> w = information_weights(sys);
  Eigen::SparseMatrix<double> h = Eigen::SparseMatrix<double>(j.transpose()) * (w * j);
  h.makeCompressed();
  return h;
}

std::vector<int> gauge_columns(const LinearizedSystem& sys, GaugeMode gauge) {
  std::vector<int> fixed;
  if (gauge == GaugeMode::PriorAnchored) return fixed;
  if (sys.layout.num_cameras < 2)
    throw Error(ErrorCode::RankDeficient, "FixedGauge requires at least two cameras");
  for (int k = 0; k < ParameterLayout::kPoseSize; ++k) fixed.push_back(sys.layout.pose_offset(0) + k);
  const Vec3 base = sys.camera_centers[1] - sys.camera_centers[0];
  int axis = 0;
  base.cwiseAbs().maxCoeff(&axis);
  if (!(std::abs(base(axis)) > 0.0))
    throw Error(ErrorCode::RankDeficient, "first two cameras coincide; scale gauge undefined");
  fixed.push_back(sys.layout.position_offset(1) + axis);
  return fixed;
}

}  // namespace

Eigen::MatrixXd dense_information(const LinearizedSystem& sys) {
  return Eigen::MatrixXd(sparse_information(sys));
}

ParameterCovariance parameter_covariance(const LinearizedSystem& sys, GaugeMode gauge) {
  const ParameterLayout& layout = sys.layout;
  const int pc = layout.camera_param_count();
  const int q = layout.num_points;

  ParameterCovariance cov;
  cov.layout = layout;
  cov.gauge_mode = gauge;
  cov.fixed_columns = gauge_columns(sys, gauge);

  const Eigen::SparseMatrix<double> h = sparse_information(sys);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(pc, pc);
  std::vector<Eigen::MatrixXd> w(q, Eigen::MatrixXd::Zero(pc, 3));
  std::vector<Mat3> v(q, Mat3::Zero());
  for (int col = 0; col < h.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, col); it; ++it) {
      const int row = static_cast<int>(it.row());
      if (col < pc) {
        if (row < pc) u(row, col) = it.value();
        continue;
      }
      const int j = (col - pc) / 3;
      const int a = (col - pc) % 3;
      if (row < pc) {
        w[j](row, a) = it.value();
      } else if ((row - pc) / 3 == j) {
        v[j]((row - pc) % 3, a) = it.value();
      } else {
        throw Error(ErrorCode::RankDeficient, "point-point coupling is not supported");
      }
    }
  }

  std::vector<char> is_fixed(pc, 0);
  for (int c : cov.fixed_columns) is_fixed[c] = 1;
  std::vector<int> free_cols;
  for (int c = 0; c < pc; ++c)
    if (!is_fixed[c]) free_cols.push_back(c);
  const int nf = static_cast<int>(free_cols.size());

  Eigen::MatrixXd s(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) s(a, b) = u(free_cols[a], free_cols[b]);

  cov.point_information_inverse.resize(q);
  for (int j = 0; j < q; ++j) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(v[j]);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(2);
    if (!(lo > 0.0) || hi / lo > 1e14)
      throw Error(ErrorCode::RankDeficient,
                  "point " + std::to_string(j) + " is not constrained by its observations");
    const Mat3 vinv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                      eig.eigenvectors().transpose();
    cov.point_information_inverse[j] = 0.5 * (vinv + vinv.transpose());

    std::vector<int> rows;
    for (int a = 0; a < nf; ++a)
      if (!w[j].row(free_cols[a]).isZero(0.0)) rows.push_back(a);
    Eigen::MatrixXd wj(rows.size(), 3);
    for (std::size_t a = 0; a < rows.size(); ++a) wj.row(a) = w[j].row(free_cols[rows[a]]);
    const Eigen::MatrixXd update = wj * cov.point_information_inverse[j] * wj.transpose();
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < rows.size(); ++b) s(rows[a], rows[b]) -= update(a, b);
  }

  // Jacobi scaling makes the conditioning test independent of parameter units.
  const Eigen::VectorXd diag = s.diagonal();
  if (nf > 0 && !(diag.minCoeff() > 0.0))
    throw Error(ErrorCode::RankDeficient, "a camera parameter has no information");
  const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = scale.asDiagonal() * s * scale.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose());
  Eigen::MatrixXd s_inv = Eigen::MatrixXd::Zero(nf, nf);
  if (nf > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
    const double lo = eig.eigenvalues()(0);
    const double hi = eig.eigenvalues()(nf - 1);
    cov.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cov.condition_number <= 1e14))
      throw Error(ErrorCode::RankDeficient,
                  "reduced information matrix condition number " +
                      std::to_string(cov.condition_number) + " exceeds 1e14");
    s_inv = scale.asDiagonal() *
            (eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
             eig.eigenvectors().transpose()) *
            scale.asDiagonal();
    s_inv = 0.5 * (s_inv + s_inv.transpose());
  }

  cov.camera_covariance = Eigen::MatrixXd::Zero(pc, pc);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) cov.camera_covariance(free_cols[a], free_cols[b]) = s_inv(a, b);
  for (int j = 0; j < q; ++j)
    for (int c : cov.fixed_columns) w[j].row(c).setZero();
  cov.point_coupling = std::move(w);
  return cov;
}

Eigen::MatrixXd ParameterCovariance::camera_point_covariance(int point) const {
  return -camera_covariance * point_coupling.at(point) * point_information_inverse.at(point);
}

Mat3 ParameterCovariance::point_covariance(int point) const {
  const Mat3& vinv = point_information_inverse.at(point);
  const Eigen::MatrixXd& wj = point_coupling.at(point);
  Mat3 out = vinv + vinv * wj.transpose() * camera_covariance * wj * vinv;
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd ParameterCovariance::full_covariance() const {
  const int pc = layout.camera_param_count();
  const int q = layout.num_points;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(layout.total(), layout.total());
  full.topLeftCorner(pc, pc) = camera_covariance;
  std::vector<Eigen::MatrixXd> cross(q);
  for (int j = 0; j < q; ++j) {
    cross[j] = camera_point_covariance(j);
    full.block(0, pc + 3 * j, pc, 3) = cross[j];
    full.block(pc + 3 * j, 0, 3, pc) = cross[j].transpose();
  }
  for (int i = 0; i < q; ++i) {
    const Mat3& vi = point_information_inverse[i];
    for (int j = i; j < q; ++j) {
      const Mat3& vj = point_information_inverse[j];
      Mat3 block = vi * point_coupling[i].transpose() * camera_covariance * point_coupling[j] * vj;
      if (i == j) block += vi;
      full.block<3, 3>(pc + 3 * i, pc + 3 * j) = block;
      full.block<3, 3>(pc + 3 * j, pc + 3 * i) = block.transpose();
    }
  }
  return 0.5 * (full + full.transpose());
}

Eigen::MatrixXd marginal_camera_covariance(const ParameterCovariance& cov,
                                           const std::vector<int>& camera_ids) {
  const std::vector<int> idx = camera_parameter_indices(cov.layout, camera_ids);
  const int p = static_cast<int>(idx.size());
  Eigen::MatrixXd out(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) out(a, b) = cov.camera_covariance(idx[a], idx[b]);
  return out;
}

}  // namespace photocov
