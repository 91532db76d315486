#include "photocov/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"
#include "photocov/synthetic.hpp"

namespace photocov {

namespace {

constexpr int kMinTrials = 100;

void check_trials(int trials) {
  if (trials < kMinTrials)
    throw Error(ErrorCode::InvalidConfig,
                "Monte Carlo needs at least " + std::to_string(kMinTrials) + " trials");
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// Fills the report from per-trial samples; rows of failed trials are skipped.
MonteCarloReport finish(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& samples,
                        const std::vector<char>& ok) {
  MonteCarloReport rep;
  rep.trials = static_cast<int>(ok.size());
  rep.analytic = analytic;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < ok.size(); ++i)
    if (ok[i]) rows.push_back(static_cast<Eigen::Index>(i));
  rep.failed = rep.trials - static_cast<int>(rows.size());
  rep.valid = rep.failed <= rep.trials / 100;
  if (rows.size() < 2) {
    rep.valid = false;
    rep.empirical = Eigen::MatrixXd::Zero(analytic.rows(), analytic.cols());
  } else {
    Eigen::MatrixXd kept(static_cast<Eigen::Index>(rows.size()), samples.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) kept.row(i) = samples.row(rows[i]);
    rep.empirical = sample_covariance(kept);
  }
  rep.degenerate = rep.empirical.norm() == 0.0;
  rep.frobenius_rel_err = frobenius_relative_error(rep.empirical, analytic);
  return rep;
}

/// Weighted Gauss-Newton triangulation with a dense 2n x 2n weight. Returns
/// false when it does not converge or a point falls behind a camera.
bool weighted_triangulate(const std::vector<Camera>& cams, const Eigen::VectorXd& z,
                          const Eigen::MatrixXd& weight, Vec3& x, int max_iterations = 20) {
  const int n = static_cast<int>(cams.size());
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd b(2 * n, 3);
    Eigen::VectorXd r(2 * n);
    for (int i = 0; i < n; ++i) {
      if (!(cams[i].to_camera(x).z() > 0.0)) return false;
      const ProjectionDerivatives d = projection_derivatives(cams[i], x);
      b.block<2, 3>(2 * i, 0) = d.point;
      r.segment<2>(2 * i) = z.segment<2>(2 * i) - d.pixel;
    }
    const Eigen::MatrixXd bw = b.transpose() * weight;
    const Vec3 step = (bw * b).ldlt().solve(bw * r);
    if (!step.allFinite()) return false;
    x += step;
    if (step.norm() <= 1e-12 * std::max(1.0, x.norm())) return true;
  }
  return false;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

Eigen::VectorXd standard_normal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw Error(ErrorCode::EmptyInput, "sample covariance needs two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd c = samples.rowwise() - mean;
  Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(samples.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

double frobenius_relative_error(const Eigen::MatrixXd& empirical, const Eigen::MatrixXd& analytic) {
  const double denom = analytic.norm();
  if (!(denom > 0.0)) return empirical.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (empirical - analytic).norm() / denom;
}

MonteCarloReport monte_carlo_sfm(const Reconstruction& recon, const SfmMonteCarloOptions& options) {
  check_trials(options.trials);
  validate(recon);
  const LinearizedSystem sys = linearize(recon);
  const ParameterCovariance cov = parameter_covariance(sys, GaugeMode::FixedGauge);
  const ParameterLayout& layout = cov.layout;
  const int pc = layout.camera_param_count();

  // Free camera columns and their slot in the reduced system.
  std::vector<int> slot(pc, -1);
  std::vector<int> free_cols;
  for (int c = 0; c < pc; ++c) {
    if (std::find(cov.fixed_columns.begin(), cov.fixed_columns.end(), c) != cov.fixed_columns.end())
      continue;
    slot[c] = static_cast<int>(free_cols.size());
    free_cols.push_back(c);
  }
  const int nf = static_cast<int>(free_cols.size());
  Eigen::MatrixXd analytic(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) analytic(a, b) = cov.camera_covariance(free_cols[a], free_cols[b]);

  std::vector<Vec2> exact(recon.observations.size());
  for (std::size_t o = 0; o < exact.size(); ++o) {
    const Observation& ob = recon.observations[o];
    exact[o] = project(recon.cameras[ob.camera_id], recon.points[ob.point_id]);
  }
  const int np = static_cast<int>(recon.points.size());

  Eigen::MatrixXd samples(options.trials, nf);
  std::vector<char> ok(options.trials, 0);
  parallel_for(static_cast<std::size_t>(options.trials), options.threads, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(options.seed, t));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec2> z(exact.size());
    std::vector<double> w(exact.size());
    for (std::size_t o = 0; o < exact.size(); ++o) {
      const double s = options.sigma_px > 0.0 ? options.sigma_px : recon.observations[o].sigma_px;
      z[o] = exact[o] + Vec2(s * normal(rng), s * normal(rng));
      w[o] = 1.0 / (s * s);
    }
    std::vector<Camera> cams = recon.cameras;
    std::vector<Vec3> pts = recon.points;
    bool converged = false;
    try {
      for (int it = 0; it < options.max_iterations && !converged; ++it) {
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(nf, nf);
        Eigen::VectorXd gc = Eigen::VectorXd::Zero(nf);
        std::vector<Mat3> v(np, Mat3::Zero());
        std::vector<Vec3> gp(np, Vec3::Zero());
        std::vector<Eigen::MatrixXd> wj(np, Eigen::MatrixXd::Zero(nf, 3));
        for (std::size_t o = 0; o < z.size(); ++o) {
          const Observation& ob = recon.observations[o];
          const ProjectionDerivatives d = projection_derivatives(cams[ob.camera_id], pts[ob.point_id]);
          const Vec2 r = z[o] - d.pixel;
          // Local (free) columns of this camera's pose.
          int idx[6];
          for (int k = 0; k < 6; ++k) idx[k] = slot[layout.pose_offset(ob.camera_id) + k];
          for (int a = 0; a < 6; ++a) {
            if (idx[a] < 0) continue;
            gc(idx[a]) += w[o] * d.pose.col(a).dot(r);
            for (int b = 0; b < 6; ++b)
              if (idx[b] >= 0) u(idx[a], idx[b]) += w[o] * d.pose.col(a).dot(d.pose.col(b));
            wj[ob.point_id].row(idx[a]) += w[o] * d.pose.col(a).transpose() * d.point;
          }
          v[ob.point_id] += w[o] * d.point.transpose() * d.point;
          gp[ob.point_id] += w[o] * d.point.transpose() * r;
        }
        Eigen::MatrixXd s = u;
        Eigen::VectorXd rhs = gc;
        std::vector<Mat3> vinv(np);
        for (int j = 0; j < np; ++j) {
          vinv[j] = v[j].inverse();
          s -= wj[j] * vinv[j] * wj[j].transpose();
          rhs -= wj[j] * vinv[j] * gp[j];
        }
        const Eigen::VectorXd dc = s.ldlt().solve(rhs);
        if (!dc.allFinite()) break;
        double step = dc.squaredNorm();
        for (int c = 0; c < static_cast<int>(cams.size()); ++c) {
          Vec6 delta = Vec6::Zero();
          for (int k = 0; k < 6; ++k) {
            const int sl = slot[layout.pose_offset(c) + k];
            if (sl >= 0) delta(k) = dc(sl);
          }
          cams[c] = perturb_camera(cams[c], delta);
        }
        for (int j = 0; j < np; ++j) {
          const Vec3 dp = vinv[j] * (gp[j] - wj[j].transpose() * dc);
          pts[j] += dp;
          step += dp.squaredNorm();
        }
        converged = std::sqrt(step) < 1e-10;
      }
    } catch (const Error&) {
      converged = false;
    }
    if (!converged) return;
    Eigen::VectorXd dev(nf);
    for (int c = 0; c < static_cast<int>(cams.size()); ++c) {
      Vec6 full;
      full.head<3>() = rotation_log(cams[c].rotation * recon.cameras[c].rotation.transpose());
      full.tail<3>() = cams[c].center - recon.cameras[c].center;
      for (int k = 0; k < 6; ++k) {
        const int sl = slot[layout.pose_offset(c) + k];
        if (sl >= 0) dev(sl) = full(k);
      }
    }
    samples.row(t) = dev.transpose();
    ok[t] = 1;
  });
  return finish(analytic, samples, ok);
}

MonteCarloReport monte_carlo_mvs(const PointContext& ctx, std::span<const Camera> cameras,
                                 const PairGeometries& geoms, const PropagationConfig& cfg,
                                 const MvsMonteCarloOptions& options) {
  check_trials(options.trials);
  validate(ctx);
  const std::vector<int> ids = observing_cameras(ctx);
  ParameterLayout layout;
  layout.num_cameras = static_cast<int>(cameras.size());
  const PointJacobians jac = build_point_jacobians(ctx, cameras, layout, ids);
  const Eigen::MatrixXd sd = build_sigma_disp(ctx, geoms, cameras, cfg);
  const Mat3 analytic = sigma_mvs(jac.b_x, sd, cfg);

  const int n = ctx.n();
  std::vector<Camera> cams;
  Eigen::VectorXd exact(2 * n);
  for (int i = 0; i < n; ++i) {
    cams.push_back(cameras[ctx.views[i].camera_id]);
    exact.segment<2>(2 * i) = project(cams.back(), ctx.point);
  }
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(sd).matrixL();
  const Eigen::MatrixXd weight = sd.inverse();

  Eigen::MatrixXd samples(options.trials, 3);
  std::vector<char> ok(options.trials, 0);
  parallel_for(static_cast<std::size_t>(options.trials), options.threads, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(options.seed, t));
    const Eigen::VectorXd z = exact + l * standard_normal(rng, 2 * n);
    Vec3 x = ctx.point;
    if (!weighted_triangulate(cams, z, weight, x)) return;
    samples.row(t) = (x - ctx.point).transpose();
    ok[t] = 1;
  });
  return finish(analytic, samples, ok);
}

MonteCarloReport monte_carlo_joint(const PointContext& ctx, const Eigen::MatrixXd& sigma_s,
                                   const std::vector<int>& camera_ids,
                                   std::span<const Camera> cameras, const ParameterLayout& layout,
                                   const PairGeometries& geoms, const PropagationConfig& cfg,
                                   const MvsMonteCarloOptions& options) {
  check_trials(options.trials);
  const CovariantPoint analytic =
      propagate_point(ctx, sigma_s, camera_ids, cameras, layout, geoms, cfg);
  const PointJacobians jac = build_point_jacobians(ctx, cameras, layout, camera_ids);
  const Eigen::MatrixXd sd = build_sigma_disp(ctx, geoms, cameras, cfg);

  const int n = ctx.n();
  std::vector<Camera> cams;
  Eigen::VectorXd exact(2 * n);
  for (int i = 0; i < n; ++i) {
    cams.push_back(cameras[ctx.views[i].camera_id]);
    exact.segment<2>(2 * i) = project(cams.back(), ctx.point);
  }
  Eigen::MatrixXd inner = jac.a * sigma_s * jac.a.transpose();
  inner = 0.5 * (inner + inner.transpose()).eval();
  const double lambda = std::max(1e-10 * inner.trace() / static_cast<double>(2 * n), 1e-20);
  inner.diagonal().array() += lambda;
  const Eigen::MatrixXd w_sfm = inner.inverse();
  const Eigen::MatrixXd w_mvs = sd.inverse();
  const Eigen::MatrixXd l_disp = Eigen::LLT<Eigen::MatrixXd>(sd).matrixL();
  const Eigen::MatrixXd l_cam = psd_sqrt(sigma_s);

  // Per camera: offsets of its pose and intrinsics inside the Sigma_S ordering.
  const int nc = static_cast<int>(camera_ids.size());
  const bool per_camera = layout.intrinsics == IntrinsicsMode::PerCamera;
  const bool shared = layout.intrinsics == IntrinsicsMode::Shared;
  const int per_cam_size = ParameterLayout::kPoseSize + (per_camera ? 3 : 0);

  Eigen::MatrixXd samples(options.trials, 3);
  std::vector<char> ok(options.trials, 0);
  parallel_for(static_cast<std::size_t>(options.trials), options.threads, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(options.seed, t));
    const Eigen::VectorXd theta = l_cam * standard_normal(rng, l_cam.cols());
    const Eigen::VectorXd noise = l_disp * standard_normal(rng, 2 * n);
    std::vector<Camera> perturbed = cams;
    for (int i = 0; i < n; ++i) {
      const auto it = std::find(camera_ids.begin(), camera_ids.end(), ctx.views[i].camera_id);
      if (it == camera_ids.end()) continue;
      const int k = static_cast<int>(it - camera_ids.begin());
      const Vec6 pose = theta.segment<6>(k * per_cam_size);
      Vec3 intr = Vec3::Zero();
      if (per_camera) intr = theta.segment<3>(k * per_cam_size + 6);
      if (shared) intr = theta.segment<3>(nc * per_cam_size);
      perturbed[i] = perturb_camera(cams[i], pose, intr);
    }
    Vec3 x_sfm = ctx.point, x_mvs = ctx.point;
    if (!weighted_triangulate(perturbed, exact, w_sfm, x_sfm)) return;
    if (!weighted_triangulate(cams, exact + noise, w_mvs, x_mvs)) return;
    samples.row(t) = ((x_sfm - ctx.point) + (x_mvs - ctx.point)).transpose();
    ok[t] = 1;
  });
  return finish(analytic.sigma_g, samples, ok);
}

MonteCarloReport monte_carlo_two_view(double depth, double baseline, double focal, double sigma,
                                      const MvsMonteCarloOptions& options) {
  check_trials(options.trials);
  if (!(depth > 0.0) || !(baseline > 0.0) || !(focal > 0.0) || !(sigma >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "two-view check needs positive depth, baseline, focal");
  Mat3 nadir;
  nadir << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  std::vector<Camera> cams(2);
  for (int i = 0; i < 2; ++i) {
    cams[i].rotation = nadir;
    cams[i].center = Vec3((i == 0 ? -0.5 : 0.5) * baseline, 0.0, depth);
    cams[i].focal = focal;
    cams[i].principal_point = Vec2(500.0, 500.0);
    cams[i].image_size = {1000, 1000};
  }
  const Vec3 truth = Vec3::Zero();
  Eigen::VectorXd exact(4);
  for (int i = 0; i < 2; ++i) exact.segment<2>(2 * i) = project(cams[i], truth);
  const Eigen::MatrixXd weight = Eigen::MatrixXd::Identity(4, 4);

  const double a = sigma * depth * depth / (baseline * focal);
  Eigen::MatrixXd analytic(1, 1);
  analytic(0, 0) = 2.0 * a * a;

  Eigen::MatrixXd samples(options.trials, 1);
  std::vector<char> ok(options.trials, 0);
  parallel_for(static_cast<std::size_t>(options.trials), options.threads, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(options.seed, t));
    const Eigen::VectorXd z = exact + sigma * standard_normal(rng, 4);
    Vec3 x = truth;
    if (!weighted_triangulate(cams, z, weight, x)) return;
    samples(t, 0) = x.z();
    ok[t] = 1;
  });
  return finish(analytic, samples, ok);
}

}  // namespace photocov
