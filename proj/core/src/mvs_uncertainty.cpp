#include "photocov/mvs_uncertainty.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

void validate(const PairMeasurements& m) {
  if (!m.disparity.same_shape(m.cost))
    throw Error(ErrorCode::DimensionMismatch,
                "pair " + std::to_string(m.pair_id) + ": disparity and cost grids differ in size");
  if (m.disparity.width() != m.pair.rect_image_size[0] ||
      m.disparity.height() != m.pair.rect_image_size[1])
    throw Error(ErrorCode::DimensionMismatch,
                "pair " + std::to_string(m.pair_id) + ": grid does not match rectified image size");
  for (std::size_t i = 0; i < m.disparity.size(); ++i) {
    if (is_valid(m.disparity.values()[i]) && !std::isfinite(m.cost.values()[i]))
      throw Error(ErrorCode::InvalidDisparity,
                  "pair " + std::to_string(m.pair_id) + ": non-finite cost at a valid pixel");
  }
}

namespace {

double median_of_sorted(std::span<const float> v) {
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

}  // namespace

FusedDepthView fuse_depth_maps(std::span<const FloatGrid> pairwise_depths, int reference_camera_id,
                               const FusionOptions& options) {
  if (pairwise_depths.empty()) throw Error(ErrorCode::EmptyInput, "no depth maps to fuse");
  if (pairwise_depths.size() > 32)
    throw Error(ErrorCode::InvalidConfig, "at most 32 depth maps per reference view");
  const FloatGrid& first = pairwise_depths.front();
  for (const FloatGrid& g : pairwise_depths)
    if (!g.same_shape(first))
      throw Error(ErrorCode::DimensionMismatch, "depth maps differ in size");

  FusedDepthView out;
  out.reference_camera_id = reference_camera_id;
  out.depth = FloatGrid(first.width(), first.height(), kInvalid);
  out.view_count = IntGrid(first.width(), first.height(), 0);
  out.agree_mask = Grid<std::uint32_t>(first.width(), first.height(), 0u);

  std::array<float, 32> values{};
  std::array<float, 32> agreeing{};
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::size_t n = 0;
    for (const FloatGrid& g : pairwise_depths) {
      const float d = g.values()[i];
      if (is_valid(d) && d > 0.0f) values[n++] = d;
    }
    if (static_cast<int>(n) < options.min_views) continue;
    std::sort(values.begin(), values.begin() + n);
    const double m = median_of_sorted({values.data(), n});
    const double tol = options.agree_tol * m;
    std::size_t k = 0;
    std::uint32_t mask = 0;
    for (std::size_t s = 0; s < pairwise_depths.size(); ++s) {
      const float d = pairwise_depths[s].values()[i];
      if (is_valid(d) && d > 0.0f && std::abs(d - m) <= tol) {
        agreeing[k++] = d;
        mask |= 1u << s;
      }
    }
    if (static_cast<int>(k) < options.min_views) continue;
    std::sort(agreeing.begin(), agreeing.begin() + k);
    out.depth.values()[i] = static_cast<float>(median_of_sorted({agreeing.data(), k}));
    out.view_count.values()[i] = static_cast<int>(k);
    out.agree_mask.values()[i] = mask;
  }
  return out;
}

std::vector<DensePoint> select_nview_points(std::span<const FusedDepthView> fused,
                                            const Reconstruction& recon, int n_min) {
  if (n_min < 3) throw Error(ErrorCode::InvalidConfig, "n_min must be at least 3");
  std::vector<DensePoint> out;
  int next_id = 0;
  for (const FusedDepthView& view : fused) {
    const Camera& cam = recon.cameras.at(view.reference_camera_id);
    for (int row = 0; row < view.depth.height(); ++row) {
      for (int col = 0; col < view.depth.width(); ++col) {
        const float d = view.depth(col, row);
        if (!is_valid(d)) continue;
        const int id = next_id++;
        const int n = view.view_count(col, row);
        if (n < n_min) continue;
        DensePoint p;
        p.point_id = id;
        p.reference_camera_id = view.reference_camera_id;
        p.pixel = Vec2(col, row);
        p.position = backproject(cam, p.pixel, d);
        p.view_count = n;
        p.agree_mask = view.agree_mask(col, row);
        out.push_back(p);
      }
    }
  }
  return out;
}

SampleStatus try_sample_residual_cost(const Vec3& point, const PairMeasurements& pair,
                                      const Camera& reference, const Camera& source,
                                      NViewSample& out) {
  const Camera ref_rect = rectified_camera(pair.pair, reference, PairSide::Reference);
  const Camera src_rect = rectified_camera(pair.pair, source, PairSide::Source);
  const Vec3 pr = ref_rect.to_camera(point);
  const Vec3 ps = src_rect.to_camera(point);
  if (!(pr.z() > 0.0) || !(ps.z() > 0.0)) return SampleStatus::OutsideImage;
  const Vec2 x_ref = project(ref_rect, point);
  const Vec2 x_src = project(src_rect, point);
  if (!ref_rect.in_image(x_ref) || !src_rect.in_image(x_src)) return SampleStatus::OutsideImage;
  const int col = static_cast<int>(std::lround(x_ref.x()));
  const int row = static_cast<int>(std::lround(x_ref.y()));
  if (!pair.disparity.contains(col, row)) return SampleStatus::OutsideImage;
  const float d = pair.disparity(col, row);
  if (!is_valid(d)) return SampleStatus::InvalidDisparity;
  const double x_match = x_ref.x() - static_cast<double>(d);
  out.pair_id = pair.pair_id;
  out.residual = x_src.x() - x_match;
  out.cost = pair.cost(col, row);
  out.pixel_index = static_cast<std::size_t>(row) * pair.disparity.width() + col;
  return SampleStatus::Ok;
}

NViewSample sample_residual_cost(const Vec3& point, const PairMeasurements& pair,
                                 const Camera& reference, const Camera& source, int point_id,
                                 int view_count) {
  NViewSample s;
  s.point_id = point_id;
  s.view_count = view_count;
  switch (try_sample_residual_cost(point, pair, reference, source, s)) {
    case SampleStatus::Ok: return s;
    case SampleStatus::OutsideImage:
      throw Error(ErrorCode::OutsideImage,
                  "point does not project inside both rectified images of pair " +
                      std::to_string(pair.pair_id));
    case SampleStatus::InvalidDisparity:
      throw Error(ErrorCode::InvalidDisparity,
                  "no valid disparity under the projection in pair " + std::to_string(pair.pair_id));
  }
  return s;
}

namespace {

struct WorkingBin {
  double center = 0.0;
  std::vector<std::size_t> members;
};

}  // namespace

CSigmaTable build_c_sigma_table(std::span<const NViewSample> samples, const TableOptions& options,
                                int pair_id) {
  if (options.bin_count < 1 || options.min_bin_count < 1)
    throw Error(ErrorCode::InvalidConfig, "bin_count and min_bin_count must be positive");
  const std::size_t need = 2 * static_cast<std::size_t>(options.min_bin_count);
  if (samples.size() < need)
    throw Error(ErrorCode::InsufficientSamples,
                "pair " + std::to_string(pair_id) + " has " + std::to_string(samples.size()) +
                    " samples, needs " + std::to_string(need));

  CSigmaTable table;
  table.pair_id = pair_id;
  table.cost_min = samples.front().cost;
  table.cost_max = samples.front().cost;
  for (const NViewSample& s : samples) {
    if (!std::isfinite(s.cost) || !std::isfinite(s.residual))
      throw Error(ErrorCode::InvalidDisparity, "non-finite sample in pair " + std::to_string(pair_id));
    table.cost_min = std::min(table.cost_min, s.cost);
    table.cost_max = std::max(table.cost_max, s.cost);
  }

  const int nb = table.cost_max > table.cost_min ? options.bin_count : 1;
  const double width = nb > 1 ? (table.cost_max - table.cost_min) / nb : 0.0;
  std::vector<WorkingBin> bins(nb);
  for (int k = 0; k < nb; ++k)
    bins[k].center = nb > 1 ? table.cost_min + (k + 0.5) * width : table.cost_min;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int k = 0;
    if (nb > 1) {
      k = static_cast<int>((samples[i].cost - table.cost_min) / (table.cost_max - table.cost_min) * nb);
      k = std::clamp(k, 0, nb - 1);
    }
    bins[k].members.push_back(i);
  }
  std::erase_if(bins, [](const WorkingBin& b) { return b.members.empty(); });

  const auto under = [&](const WorkingBin& b) {
    return static_cast<int>(b.members.size()) < options.min_bin_count;
  };
  while (bins.size() > 1) {
    auto it = std::find_if(bins.begin(), bins.end(), under);
    if (it == bins.end()) break;
    const std::size_t k = static_cast<std::size_t>(it - bins.begin());
    std::size_t target;
    if (k == 0) {
      target = 1;
    } else if (k + 1 == bins.size()) {
      target = k - 1;
    } else {
      const double left = bins[k].center - bins[k - 1].center;
      const double right = bins[k + 1].center - bins[k].center;
      target = right < left ? k + 1 : k - 1;
    }
    WorkingBin& dst = bins[target];
    const double na = static_cast<double>(dst.members.size());
    const double nbk = static_cast<double>(bins[k].members.size());
    dst.center = (na * dst.center + nbk * bins[k].center) / (na + nbk);
    dst.members.insert(dst.members.end(), bins[k].members.begin(), bins[k].members.end());
    std::sort(dst.members.begin(), dst.members.end());
    bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(k));
  }

  for (const WorkingBin& b : bins) {
    const std::size_t n = b.members.size();
    // Shifted two-pass variance: exact zero for identical residuals.
    const double shift = samples[b.members.front()].residual;
    double mean = 0.0;
    for (std::size_t i : b.members) mean += samples[i].residual - shift;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i : b.members) {
      const double dv = (samples[i].residual - shift) - mean;
      ss += dv * dv;
    }
    CSigmaBin out;
    out.cost_center = b.center;
    out.sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    out.count = static_cast<int>(n);
    table.bins.push_back(out);
  }
  return table;
}

double interpolate_uncertainty(double cost, const CSigmaTable& table, double u_min) {
  const auto& bins = table.bins;
  if (bins.empty()) throw Error(ErrorCode::MissingTable, "empty c-sigma table");
  double u;
  if (cost <= bins.front().cost_center) {
    u = bins.front().sigma;
  } else if (cost >= bins.back().cost_center) {
    u = bins.back().sigma;
  } else {
    const auto hi = std::upper_bound(bins.begin(), bins.end(), cost,
                                     [](double c, const CSigmaBin& b) { return c < b.cost_center; });
    const auto lo = hi - 1;
    const double t = (cost - lo->cost_center) / (hi->cost_center - lo->cost_center);
    u = lo->sigma + t * (hi->sigma - lo->sigma);
  }
  return std::max(u, u_min);
}

double refine_uncertainty(double u, double residual) {
  return 0.5 * (std::max(u, std::abs(residual)) + u);
}

std::vector<UncertaintyMap> build_uncertainty_maps(std::span<const PairMeasurements> pairs,
                                                   std::span<const CSigmaTable> tables,
                                                   std::span<const ResidualMap> triangulated,
                                                   double u_min, int threads) {
  if (!triangulated.empty() && triangulated.size() != pairs.size())
    throw Error(ErrorCode::DimensionMismatch, "triangulated residuals not aligned with pairs");
  std::vector<const CSigmaTable*> lookup(pairs.size(), nullptr);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (const CSigmaTable& t : tables)
      if (t.pair_id == pairs[k].pair_id) lookup[k] = &t;
    if (!lookup[k] || lookup[k]->bins.empty())
      throw Error(ErrorCode::MissingTable,
                  "no c-sigma table for pair " + std::to_string(pairs[k].pair_id));
  }
  std::vector<UncertaintyMap> maps(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const PairMeasurements& pm = pairs[k];
    UncertaintyMap& map = maps[k];
    map.pair_id = pm.pair_id;
    map.u = FloatGrid(pm.disparity.width(), pm.disparity.height(), kInvalid);
    for (std::size_t i = 0; i < pm.disparity.size(); ++i) {
      if (!is_valid(pm.disparity.values()[i])) continue;
      double u = interpolate_uncertainty(pm.cost.values()[i], *lookup[k], u_min);
      if (!triangulated.empty()) {
        const auto hit = triangulated[k].find(i);
        if (hit != triangulated[k].end()) u = refine_uncertainty(u, hit->second);
      }
      map.u.values()[i] = static_cast<float>(u);
    }
  });
  return maps;
}

}  // namespace photocov
