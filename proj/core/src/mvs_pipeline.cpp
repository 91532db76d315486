#include "photocov/mvs_pipeline.hpp"

#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

FloatGrid pair_depth_in_reference(const PairMeasurements& pair, const Camera& reference) {
  const StereoPairGeometry& g = pair.pair;
  const Mat3 to_rect = rectified_to_original_homography(g, reference, PairSide::Reference).inverse();
  const Camera rect = rectified_camera(g, reference, PairSide::Reference);
  // Maps a rectified ray (scaled by its rectified depth) to the original frame.
  const Mat3 rect_to_orig = reference.rotation * g.rect_rotation_ref.transpose();
  const FloatGrid& disp = pair.disparity;

  FloatGrid out(reference.width(), reference.height(), kInvalid);
  for (int row = 0; row < out.height(); ++row) {
    for (int col = 0; col < out.width(); ++col) {
      const Vec2 xr = (to_rect * Vec3(col, row, 1.0)).hnormalized();
      const int x0 = static_cast<int>(std::floor(xr.x()));
      const int y0 = static_cast<int>(std::floor(xr.y()));
      if (!disp.contains(x0, y0) || !disp.contains(x0 + 1, y0 + 1)) continue;
      const float d00 = disp(x0, y0), d10 = disp(x0 + 1, y0);
      const float d01 = disp(x0, y0 + 1), d11 = disp(x0 + 1, y0 + 1);
      if (!is_valid(d00) || !is_valid(d10) || !is_valid(d01) || !is_valid(d11)) continue;
      const double tx = xr.x() - x0;
      const double ty = xr.y() - y0;
      const double d = (1 - ty) * ((1 - tx) * d00 + tx * d10) + ty * ((1 - tx) * d01 + tx * d11);
      if (!(d > 0.0)) continue;
      const double z_rect = g.baseline * g.rect_focal / d;
      const Vec3 ray((xr.x() - rect.principal_point.x()) / rect.focal,
                     (xr.y() - rect.principal_point.y()) / rect.focal, 1.0);
      const double z = (rect_to_orig * (z_rect * ray)).z();
      if (z > 0.0) out(col, row) = static_cast<float>(z);
    }
  }
  return out;
}

CalibrationResult calibrate(const Reconstruction& recon, std::span<const PairMeasurements> pairs,
                            const CalibrationOptions& options) {
  if (options.n_min < 3) throw Error(ErrorCode::InvalidConfig, "n_min must be at least 3");
  if (options.fusion.min_views < 3)
    throw Error(ErrorCode::InvalidConfig, "fusion needs at least three views");
  for (const PairMeasurements& p : pairs) {
    validate(p);
    const int nc = static_cast<int>(recon.cameras.size());
    if (p.pair.reference_camera_id < 0 || p.pair.reference_camera_id >= nc ||
        p.pair.source_camera_id < 0 || p.pair.source_camera_id >= nc)
      throw Error(ErrorCode::UnknownTarget,
                  "pair " + std::to_string(p.pair_id) + " references a missing camera");
  }

  CalibrationResult res;
  std::map<int, std::vector<std::size_t>> by_reference;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    by_reference[pairs[k].pair.reference_camera_id].push_back(k);

  for (const auto& [ref_id, members] : by_reference) {
    if (static_cast<int>(members.size()) < options.fusion.min_views) continue;
    const Camera& ref = recon.cameras[ref_id];
    std::vector<FloatGrid> depths(members.size());
    parallel_for(members.size(), options.threads,
                 [&](std::size_t i) { depths[i] = pair_depth_in_reference(pairs[members[i]], ref); });
    res.fused.push_back(fuse_depth_maps(depths, ref_id, options.fusion));
    std::vector<int> ids;
    for (std::size_t k : members) ids.push_back(pairs[k].pair_id);
    res.fused_pair_ids.push_back(std::move(ids));
  }

  res.dense_points = select_nview_points(res.fused, recon, options.fusion.min_views);
  {
    std::map<int, std::size_t> view_slot;
    for (std::size_t v = 0; v < res.fused.size(); ++v) view_slot[res.fused[v].reference_camera_id] = v;
    for (DensePoint& p : res.dense_points) {
      const auto& ids = res.fused_pair_ids[view_slot.at(p.reference_camera_id)];
      for (std::size_t b = 0; b < ids.size(); ++b)
        if (p.agree_mask & (1u << b)) p.pair_ids.push_back(ids[b]);
    }
  }

  std::vector<const DensePoint*> checks;
  for (const DensePoint& p : res.dense_points)
    if (p.view_count >= options.n_min) checks.push_back(&p);

  res.samples.resize(pairs.size());
  res.triangulated.resize(pairs.size());
  std::vector<std::size_t> outside(pairs.size(), 0), invalid(pairs.size(), 0);
  parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
    const PairMeasurements& pm = pairs[k];
    const Camera& ref = recon.cameras[pm.pair.reference_camera_id];
    const Camera& src = recon.cameras[pm.pair.source_camera_id];
    for (const DensePoint* p : checks) {
      NViewSample s;
      s.point_id = p->point_id;
      s.view_count = p->view_count;
      switch (try_sample_residual_cost(p->position, pm, ref, src, s)) {
        case SampleStatus::Ok: res.samples[k].push_back(s); break;
        case SampleStatus::OutsideImage: ++outside[k]; break;
        case SampleStatus::InvalidDisparity: ++invalid[k]; break;
      }
    }
    // Pixels of this pair that contributed to a triangulated point.
    ResidualMap& tri = res.triangulated[k];
    for (const DensePoint& p : res.dense_points) {
      if (p.reference_camera_id != pm.pair.reference_camera_id) continue;
      bool contributed = false;
      for (int id : p.pair_ids) contributed = contributed || id == pm.pair_id;
      if (!contributed) continue;
      NViewSample s;
      if (try_sample_residual_cost(p.position, pm, ref, src, s) != SampleStatus::Ok) continue;
      auto [it, inserted] = tri.emplace(s.pixel_index, s.residual);
      if (!inserted && std::abs(s.residual) > std::abs(it->second)) it->second = s.residual;
    }
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    res.skipped_outside += outside[k];
    res.skipped_invalid += invalid[k];
  }

  res.tables.resize(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
    res.tables[k] = build_c_sigma_table(res.samples[k], options.table, pairs[k].pair_id);
  });
  res.maps = build_uncertainty_maps(pairs, res.tables, res.triangulated, options.u_min,
                                    options.threads);
  return res;
}

}  // namespace photocov
