#include "photocov/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

FloatGrid gt_disparity_from_depth(const FloatGrid& depth, const StereoPairGeometry& geom) {
  if (depth.width() != geom.rect_image_size[0] || depth.height() != geom.rect_image_size[1])
    throw Error(ErrorCode::DimensionMismatch, "depth grid does not match the rectified image size");
  FloatGrid out(depth.width(), depth.height(), kInvalid);
  const double bf = geom.baseline * geom.rect_focal;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const float d = depth.values()[i];
    if (is_valid(d) && d > 0.0f) out.values()[i] = static_cast<float>(bf / d);
  }
  return out;
}

FloatGrid lr_consistency_filter(const FloatGrid& disp_lr, const FloatGrid& disp_rl, double tol) {
  FloatGrid out(disp_lr.width(), disp_lr.height(), kInvalid);
  for (int row = 0; row < disp_lr.height(); ++row) {
    for (int col = 0; col < disp_lr.width(); ++col) {
      const float d = disp_lr(col, row);
      if (!is_valid(d)) continue;
      const int xs = static_cast<int>(std::lround(col - static_cast<double>(d)));
      if (!disp_rl.contains(xs, row)) continue;
      const float back = disp_rl(xs, row);
      if (!is_valid(back)) continue;
      if (std::abs(static_cast<double>(d) + back) <= tol) out(col, row) = d;
    }
  }
  return out;
}

PlaneDistance actual_error_point_to_plane(const Vec3& point, const PointIndex& reference, int k) {
  if (k < 3) throw Error(ErrorCode::InvalidConfig, "plane fit needs k >= 3");
  if (reference.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::EmptyInput, "reference cloud has fewer than " + std::to_string(k) +
                                           " points");
  const std::vector<std::size_t> nn = reference.nearest(point, static_cast<std::size_t>(k));
  const auto& pts = reference.points();
  Vec3 mean = Vec3::Zero();
  for (std::size_t i : nn) mean += pts[i];
  mean /= static_cast<double>(nn.size());
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i : nn) {
    const Vec3 d = pts[i] - mean;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending
  PlaneDistance out;
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    out.degenerate = true;
    out.distance = (pts[nn.front()] - point).norm();
    return out;
  }
  const Vec3 normal = es.eigenvectors().col(0);
  out.distance = std::abs(normal.dot(point - mean));
  return out;
}

void validate(const PairedErrors& pe) {
  if (pe.actual.empty()) throw Error(ErrorCode::EmptyInput, "no paired errors");
  if (pe.actual.size() != pe.predicted.size())
    throw Error(ErrorCode::DimensionMismatch, "actual and predicted differ in length");
  for (std::size_t i = 0; i < pe.size(); ++i)
    if (!(pe.actual[i] >= 0.0) || !(pe.predicted[i] >= 0.0) || !std::isfinite(pe.actual[i]) ||
        !std::isfinite(pe.predicted[i]))
      throw Error(ErrorCode::InvalidDisparity,
                  "element " + std::to_string(i) + " is negative or not finite");
}

double bounding_rate(const PairedErrors& pe) {
  validate(pe);
  std::size_t bounded = 0;
  for (std::size_t i = 0; i < pe.size(); ++i) bounded += pe.actual[i] <= pe.predicted[i];
  return static_cast<double>(bounded) / static_cast<double>(pe.size());
}

double kl_divergence(std::span<const double> actual, std::span<const double> predicted, int bins,
                     double eps) {
  if (actual.empty() || predicted.empty()) throw Error(ErrorCode::EmptyInput, "empty histogram input");
  if (bins < 1) throw Error(ErrorCode::InvalidConfig, "bins must be positive");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : actual) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : predicted) lo = std::min(lo, v), hi = std::max(hi, v);
  const double width = hi - lo;
  auto histogram = [&](std::span<const double> xs) {
    std::vector<double> h(bins, 0.0);
    for (double v : xs) {
      int b = width > 0.0 ? static_cast<int>(std::floor((v - lo) / width * bins)) : 0;
      h[std::clamp(b, 0, bins - 1)] += 1.0;
    }
    double total = 0.0;
    for (double& c : h) total += (c = c / static_cast<double>(xs.size()) + eps);
    for (double& c : h) c /= total;
    return h;
  };
  const std::vector<double> p = histogram(actual);
  const std::vector<double> q = histogram(predicted);
  double kl = 0.0;
  for (int b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
  return std::max(kl, 0.0);
}

std::vector<double> log_scales(int n, double lo, double hi) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo))
    throw Error(ErrorCode::InvalidConfig, "log scale grid needs n >= 2 and 0 < lo < hi");
  std::vector<double> s(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) s[i] = std::pow(10.0, a + (b - a) * i / (n - 1));
  return s;
}

AucCurve auc_curve(const PairedErrors& pe, std::span<const double> scales) {
  validate(pe);
  if (scales.empty()) throw Error(ErrorCode::EmptyInput, "no scales");
  const double n = static_cast<double>(pe.size());
  AucCurve curve;
  for (double s : scales) {
    if (!(s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "scales must be non-negative");
    AucPoint pt;
    pt.scale = s;
    std::size_t bounded = 0;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < pe.size(); ++i) {
      const double pred = s * pe.predicted[i];
      bounded += pe.actual[i] <= pred;
      const double e = pred - pe.actual[i];
      abs_sum += std::abs(e);
      sq_sum += e * e;
    }
    pt.bounding_rate = static_cast<double>(bounded) / n;
    pt.mean_err = abs_sum / n;
    pt.rmse = std::sqrt(sq_sum / n);
    curve.points.push_back(pt);
  }
  std::stable_sort(curve.points.begin(), curve.points.end(), [](const AucPoint& a, const AucPoint& b) {
    return a.bounding_rate < b.bounding_rate ||
           (a.bounding_rate == b.bounding_rate && a.scale < b.scale);
  });
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const AucPoint& a = curve.points[i - 1];
    const AucPoint& b = curve.points[i];
    const double dr = b.bounding_rate - a.bounding_rate;
    curve.auc_mean += 0.5 * dr * (a.mean_err + b.mean_err);
    curve.auc_rmse += 0.5 * dr * (a.rmse + b.rmse);
  }
  return curve;
}

AucCurve auc_curve(const PairedErrors& pe) {
  const std::vector<double> s = log_scales();
  return auc_curve(pe, s);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch, "pearson needs equal, non-empty vectors");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0))
    throw Error(ErrorCode::ZeroVariance, "pearson undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricReport compute_metrics(const PairedErrors& pe, int hist_bins) {
  validate(pe);
  MetricReport r;
  try {
    r.pearson = pearson(pe.actual, pe.predicted);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
    r.pearson = std::numeric_limits<double>::quiet_NaN();
    r.pearson_defined = false;
  }
  const double unit_scale = 1.0;
  const AucCurve at_one = auc_curve(pe, std::span<const double>(&unit_scale, 1));
  r.mean_err = at_one.points.front().mean_err;
  r.rmse = at_one.points.front().rmse;
  r.bounding_rate = at_one.points.front().bounding_rate;
  r.kl_divergence = kl_divergence(pe.actual, pe.predicted, hist_bins);
  const AucCurve curve = auc_curve(pe);
  r.auc_mean = curve.auc_mean;
  r.auc_rmse = curve.auc_rmse;
  return r;
}

PairedErrors disparity_errors(const FloatGrid& estimate, const FloatGrid& ground_truth,
                              const FloatGrid& uncertainty) {
  if (!estimate.same_shape(ground_truth) || !estimate.same_shape(uncertainty))
    throw Error(ErrorCode::DimensionMismatch, "disparity, ground truth and uncertainty differ in shape");
  PairedErrors pe;
  pe.unit = ErrorUnit::Pixel;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const float d = estimate.values()[i], g = ground_truth.values()[i], u = uncertainty.values()[i];
    if (!is_valid(d) || !is_valid(g) || !is_valid(u)) continue;
    pe.actual.push_back(std::abs(static_cast<double>(d) - g));
    pe.predicted.push_back(u);
  }
  return pe;
}

CloudErrors point_cloud_errors(std::span<const CovariantPoint> points, const PointIndex& reference,
                               int k, RadiusMode mode, const RigidTransform& transform,
                               int threads) {
  CloudErrors out;
  out.errors.unit = ErrorUnit::Meter;
  out.errors.actual.resize(points.size());
  out.errors.predicted.resize(points.size());
  std::vector<char> degenerate(points.size(), 0);
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const PlaneDistance d =
        actual_error_point_to_plane(transform.apply(points[i].position), reference, k);
    out.errors.actual[i] = d.distance;
    degenerate[i] = d.degenerate;
    // Rotation is orthonormal, so the radius is unchanged by the transform.
    out.errors.predicted[i] = covariance_radius(points[i].sigma_g, mode);
  });
  for (char d : degenerate) out.degenerate_planes += d;
  return out;
}

}  // namespace photocov
