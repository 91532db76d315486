#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "photocov/mvs_uncertainty.hpp"
#include "photocov/synthetic.hpp"
#include "test_util.hpp"

namespace photocov {
namespace {

FloatGrid filled(float v, int w = 4, int h = 3) { return FloatGrid(w, h, v); }

TEST(FuseDepthMaps, IdenticalGridsAreConsensus) {
  std::vector<FloatGrid> maps(5, filled(12.5f));
  const FusedDepthView f = fuse_depth_maps(maps);
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    EXPECT_EQ(f.depth.values()[i], 12.5f);
    EXPECT_EQ(f.view_count.values()[i], 5);
    EXPECT_EQ(f.agree_mask.values()[i], 0x1Fu);
  }
}

TEST(FuseDepthMaps, OutlierIsRejected) {
  std::vector<FloatGrid> maps(4, filled(10.0f));
  maps.insert(maps.begin() + 2, filled(50.0f));
  const FusedDepthView f = fuse_depth_maps(maps);
  EXPECT_EQ(f.depth(1, 1), 10.0f);
  EXPECT_EQ(f.view_count(1, 1), 4);
  EXPECT_EQ(f.agree_mask(1, 1), 0b11011u);
}

TEST(FuseDepthMaps, TwoValidViewsAreInvalid) {
  std::vector<FloatGrid> maps(4, filled(10.0f));
  maps[0](2, 1) = kInvalid;
  maps[1](2, 1) = kInvalid;
  const FusedDepthView f = fuse_depth_maps(maps);
  EXPECT_FALSE(is_valid(f.depth(2, 1)));
  EXPECT_EQ(f.view_count(2, 1), 0);
  EXPECT_TRUE(is_valid(f.depth(0, 0)));
}

TEST(FuseDepthMaps, ToleranceAroundMedian) {
  std::vector<FloatGrid> maps = {filled(100.0f), filled(100.5f), filled(99.6f), filled(101.5f)};
  const FusedDepthView f = fuse_depth_maps(maps, 0, {3, 0.01});
  // Median 100.25, tolerance 1.0025: 101.5 disagrees.
  EXPECT_EQ(f.view_count(0, 0), 3);
  EXPECT_EQ(f.depth(0, 0), 100.0f);
}

TEST(FuseDepthMaps, DimensionMismatch) {
  std::vector<FloatGrid> maps = {filled(1.0f), filled(1.0f), filled(1.0f, 5, 3)};
  EXPECT_THROW_CODE(fuse_depth_maps(maps), ErrorCode::DimensionMismatch);
}

Reconstruction one_camera() {
  Reconstruction r;
  r.cameras.push_back(testing::nadir_camera(Vec3(0, 0, 50), 100.0, 20));
  return r;
}

FusedDepthView counts_view(const std::vector<int>& counts) {
  FusedDepthView v;
  v.depth = FloatGrid(static_cast<int>(counts.size()), 1, 50.0f);
  v.view_count = IntGrid(static_cast<int>(counts.size()), 1, 0);
  v.agree_mask = Grid<std::uint32_t>(static_cast<int>(counts.size()), 1, 0u);
  for (std::size_t i = 0; i < counts.size(); ++i) v.view_count.values()[i] = counts[i];
  return v;
}

TEST(SelectNviewPoints, ThresholdOnViewCount) {
  const std::vector<FusedDepthView> fused = {counts_view({4, 5, 6, 7, 8})};
  const auto pts = select_nview_points(fused, one_camera(), 6);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].view_count, 6);
  EXPECT_EQ(pts[1].view_count, 7);
  EXPECT_EQ(pts[2].view_count, 8);
  EXPECT_EQ(pts[0].point_id, 2);
  const Reconstruction rc = one_camera();
  const Camera& cam = rc.cameras[0];
  EXPECT_LT((project(cam, pts[0].position) - Vec2(2, 0)).norm(), 1e-9);
  EXPECT_NEAR(pts[0].position.z(), 0.0, 1e-5);
}

TEST(SelectNviewPoints, LowerThresholdIsSuperset) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> n(3, 10);
  std::vector<int> counts(20);
  for (int& c : counts) c = n(rng);
  const std::vector<FusedDepthView> fused = {counts_view(counts)};
  const auto a = select_nview_points(fused, one_camera(), 4);
  const auto b = select_nview_points(fused, one_camera(), 6);
  for (const DensePoint& p : b)
    EXPECT_TRUE(std::any_of(a.begin(), a.end(), [&](const DensePoint& q) { return q.point_id == p.point_id; }));
  EXPECT_GE(a.size(), b.size());
  EXPECT_THROW_CODE(select_nview_points(fused, one_camera(), 2), ErrorCode::InvalidConfig);
}

/// Fronto-parallel pair with identity rotations, focal 100, principal (50, 50).
struct SimplePair {
  Camera ref, src;
  PairMeasurements m;

  SimplePair() {
    ref.focal = 100.0;
    ref.principal_point = Vec2(50, 50);
    ref.image_size = {200, 100};
    src = ref;
    src.center = Vec3(1, 0, 0);
    m.pair = rectify_pair(ref, src);
    m.disparity = FloatGrid(200, 100, kInvalid);
    m.cost = FloatGrid(200, 100, 0.0f);
  }
};

TEST(SampleResidualCost, ExactMatchHasZeroResidual) {
  SimplePair p;
  const Vec3 x(2.0, 0.0, 10.0);  // x_ref = 70, x_src = 60
  p.m.disparity(70, 50) = 10.0f;
  p.m.cost(70, 50) = 7.0f;
  const NViewSample s = sample_residual_cost(x, p.m, p.ref, p.src, 3, 6);
  EXPECT_NEAR(s.residual, 0.0, 1e-12);
  EXPECT_EQ(s.cost, 7.0);
  EXPECT_EQ(s.point_id, 3);
  EXPECT_EQ(s.view_count, 6);
  EXPECT_EQ(s.pixel_index, 50u * 200u + 70u);
}

TEST(SampleResidualCost, SignIsReprojectionMinusMatch) {
  SimplePair p;
  const Vec3 x(6.15, 0.0, 10.0);  // x_ref = 111.5, x_reproj = 101.5
  p.m.disparity(112, 50) = 11.5f;  // x_match = 111.5 - 11.5 = 100
  const NViewSample s = sample_residual_cost(x, p.m, p.ref, p.src);
  EXPECT_NEAR(s.residual, 1.5, 1e-12);
}

TEST(SampleResidualCost, Errors) {
  SimplePair p;
  EXPECT_THROW_CODE(sample_residual_cost(Vec3(2, 0, 10), p.m, p.ref, p.src), ErrorCode::InvalidDisparity);
  EXPECT_THROW_CODE(sample_residual_cost(Vec3(50, 0, 10), p.m, p.ref, p.src), ErrorCode::OutsideImage);
  EXPECT_THROW_CODE(sample_residual_cost(Vec3(0, 0, -10), p.m, p.ref, p.src), ErrorCode::OutsideImage);
}

TEST(SampleResidualCost, MatchesScriptedReprojectionOracle) {
  SceneSpec spec;
  spec.grid_rows = 1;
  spec.grid_cols = 2;
  spec.tie_points = 50;
  const Scene scene = generate_scene(spec, 3);
  const PairTruth& truth = scene.pairs.front();
  const PairMeasurements m = synthesize_pair_measurements(scene, truth, spec, 5);
  const Camera& ref = scene.recon.cameras[truth.geometry.reference_camera_id];
  const Camera& src = scene.recon.cameras[truth.geometry.source_camera_id];
  const StereoPairGeometry& g = truth.geometry;
  Mat3 k;
  k << g.rect_focal, 0, g.rect_principal.x(), 0, g.rect_focal, g.rect_principal.y(), 0, 0, 1;
  int checked = 0;
  for (const Vec3& x : scene.recon.points) {
    const Vec3 hr = k * g.rect_rotation_ref * (x - ref.center);
    const Vec3 hs = k * g.rect_rotation_src * (x - src.center);
    const double xr = hr.x() / hr.z(), yr = hr.y() / hr.z(), xs = hs.x() / hs.z();
    const int col = static_cast<int>(std::lround(xr)), row = static_cast<int>(std::lround(yr));
    if (!m.disparity.contains(col, row) || !is_valid(m.disparity(col, row))) continue;
    NViewSample s;
    if (try_sample_residual_cost(x, m, ref, src, s) != SampleStatus::Ok) continue;
    EXPECT_NEAR(s.residual, xs - (xr - m.disparity(col, row)), 1e-6);
    EXPECT_EQ(s.cost, m.cost(col, row));
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

std::vector<NViewSample> make_samples(const std::vector<double>& costs, const std::vector<double>& residuals) {
  std::vector<NViewSample> out(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    out[i].cost = costs[i];
    out[i].residual = residuals[i];
  }
  return out;
}

TEST(CSigmaTable, SingleBinArithmetic) {
  const auto s = make_samples({5.0, 5.0}, {1.0, -1.0});
  const CSigmaTable t = build_c_sigma_table(s, {4, 1});
  ASSERT_EQ(t.bins.size(), 1u);
  EXPECT_DOUBLE_EQ(t.bins[0].sigma, std::sqrt(2.0));
  EXPECT_EQ(t.bins[0].count, 2);
}

TEST(CSigmaTable, IdenticalResidualsGiveZeroSigma) {
  std::vector<double> c, r;
  for (int i = 0; i < 400; ++i) {
    c.push_back(i * 0.25);
    r.push_back(0.7);
  }
  const CSigmaTable t = build_c_sigma_table(make_samples(c, r), {16, 20});
  EXPECT_EQ(t.bins.size(), 16u);
  for (const CSigmaBin& b : t.bins) EXPECT_EQ(b.sigma, 0.0);
}

TEST(CSigmaTable, MatchesTwoPassVarianceOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uc(0.0, 40.0);
  std::normal_distribution<double> nr(0.3, 1.7);
  std::vector<double> c(5000), r(5000);
  for (int i = 0; i < 5000; ++i) {
    c[i] = uc(rng);
    r[i] = nr(rng) * (1 + c[i] / 10);
  }
  const CSigmaTable t = build_c_sigma_table(make_samples(c, r), {16, 30});
  ASSERT_EQ(t.bins.size(), 16u);
  const double lo = *std::min_element(c.begin(), c.end());
  const double hi = *std::max_element(c.begin(), c.end());
  for (int k = 0; k < 16; ++k) {
    std::vector<long double> members;
    for (int i = 0; i < 5000; ++i) {
      const int b = std::clamp(static_cast<int>((c[i] - lo) / (hi - lo) * 16), 0, 15);
      if (b == k) members.push_back(r[i]);
    }
    long double mean = 0;
    for (long double v : members) mean += v;
    mean /= members.size();
    long double ss = 0;
    for (long double v : members) ss += (v - mean) * (v - mean);
    const double sigma = static_cast<double>(std::sqrt(ss / (members.size() - 1)));
    EXPECT_EQ(t.bins[k].count, static_cast<int>(members.size()));
    EXPECT_NEAR(t.bins[k].sigma, sigma, 1e-10 * sigma);
    EXPECT_NEAR(t.bins[k].cost_center, lo + (k + 0.5) * (hi - lo) / 16, 1e-12);
  }
}

TEST(CSigmaTable, MergingLeavesNoUnderpopulatedBin) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::exponential_distribution<double> ec(0.2);
    std::normal_distribution<double> nr(0.0, 1.0);
    const int n = 60 + trial * 13;
    std::vector<double> c(n), r(n);
    for (int i = 0; i < n; ++i) {
      c[i] = ec(rng);
      r[i] = nr(rng);
    }
    const CSigmaTable t = build_c_sigma_table(make_samples(c, r), {16, 30});
    int total = 0;
    for (std::size_t k = 0; k < t.bins.size(); ++k) {
      EXPECT_GE(t.bins[k].count, 30);
      EXPECT_GE(t.bins[k].sigma, 0.0);
      if (k > 0) {
        EXPECT_GT(t.bins[k].cost_center, t.bins[k - 1].cost_center);
      }
      total += t.bins[k].count;
    }
    EXPECT_EQ(total, n);
  }
}

TEST(CSigmaTable, RecoversHeteroscedasticSigma) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> uc(0.0, 60.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = 40000;
  std::vector<double> c(n), r(n);
  for (int i = 0; i < n; ++i) {
    c[i] = uc(rng);
    r[i] = (0.2 + 0.01 * c[i]) * z(rng);
  }
  const CSigmaTable t = build_c_sigma_table(make_samples(c, r), {16, 30});
  for (const CSigmaBin& b : t.bins) {
    ASSERT_GE(b.count, 1000);
    // Bin sigma mixes a linear range of sigmas; compare with the bin's RMS sigma.
    const double half = (t.cost_max - t.cost_min) / 32.0;
    const double a = 0.2 + 0.01 * (b.cost_center - half), e = 0.2 + 0.01 * (b.cost_center + half);
    const double rms = std::sqrt((a * a + a * e + e * e) / 3.0);
    EXPECT_LE(std::abs(b.sigma - rms) / rms, 0.10);
    EXPECT_LE(std::abs(b.sigma - (0.2 + 0.01 * b.cost_center)) / (0.2 + 0.01 * b.cost_center), 0.10);
  }
}

TEST(CSigmaTable, InsufficientSamples) {
  const auto s = make_samples(std::vector<double>(59, 1.0), std::vector<double>(59, 0.0));
  EXPECT_THROW_CODE(build_c_sigma_table(s, {16, 30}), ErrorCode::InsufficientSamples);
}

CSigmaTable three_bins() {
  CSigmaTable t;
  t.bins = {{10.0, 1.0, 50}, {20.0, 3.0, 50}, {30.0, 2.0, 50}};
  t.cost_min = 5.0;
  t.cost_max = 35.0;
  return t;
}

TEST(InterpolateUncertainty, KnotsMidpointsAndClamping) {
  const CSigmaTable t = three_bins();
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(20.0, t), 3.0);
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(15.0, t), 2.0);
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(0.0, t), 1.0);
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(99.0, t), 2.0);
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(15.0, t, 2.5), 2.5);
}

TEST(InterpolateUncertainty, FloorAppliesToZeroSigma) {
  CSigmaTable t = three_bins();
  for (auto& b : t.bins) b.sigma = 0.0;
  EXPECT_DOUBLE_EQ(interpolate_uncertainty(12.0, t), kDefaultUncertaintyFloor);
}

TEST(InterpolateUncertainty, ScaledCostsGiveSameUncertainty) {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> gc(2.0, 3.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> c(3000), c2(3000), r(3000);
  for (int i = 0; i < 3000; ++i) {
    c[i] = gc(rng);
    c2[i] = 37.5 * c[i];
    r[i] = (0.3 + 0.05 * c[i]) * z(rng);
  }
  const CSigmaTable a = build_c_sigma_table(make_samples(c, r));
  const CSigmaTable b = build_c_sigma_table(make_samples(c2, r));
  std::vector<double> sorted = c;
  std::sort(sorted.begin(), sorted.end());
  for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    const double cq = sorted[static_cast<std::size_t>(q * (sorted.size() - 1))];
    EXPECT_NEAR(interpolate_uncertainty(cq, a), interpolate_uncertainty(37.5 * cq, b), 1e-9);
  }
}

TEST(RefineUncertainty, Examples) {
  EXPECT_DOUBLE_EQ(refine_uncertainty(2.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(refine_uncertainty(1.0, 3.0), 2.0);
  EXPECT_DOUBLE_EQ(refine_uncertainty(1.0, -3.0), 2.0);
  EXPECT_DOUBLE_EQ(refine_uncertainty(1.7, 0.0), 1.7);
}

TEST(RefineUncertainty, MonotoneAndNeverDecreasing) {
  for (double u : {0.1, 0.5, 1.0, 4.0}) {
    double prev = 0.0;
    for (double r = 0.0; r < 10.0; r += 0.05) {
      const double v = refine_uncertainty(u, r);
      EXPECT_GE(v, u);
      EXPECT_GE(v, prev);
      EXPECT_EQ(v, refine_uncertainty(u, -r));
      prev = v;
    }
  }
}

TEST(BuildUncertaintyMaps, ValidityCountAndRefinement) {
  SimplePair a, b;
  b.m.pair_id = 1;
  for (std::size_t i = 0; i < a.m.disparity.size(); ++i) {
    a.m.disparity.values()[i] = 5.0f;
    a.m.cost.values()[i] = static_cast<float>(i % 40);
    b.m.disparity.values()[i] = 5.0f;
  }
  b.m.disparity(3, 4) = kInvalid;
  CSigmaTable ta = three_bins(), tb = three_bins();
  tb.pair_id = 1;
  std::vector<PairMeasurements> pairs = {a.m, b.m};
  std::vector<ResidualMap> tri(2);
  tri[0][7] = 10.0;
  const auto maps = build_uncertainty_maps(pairs, std::vector<CSigmaTable>{tb, ta}, tri, 0.1, 2);
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_EQ(maps[1].pair_id, 1);
  for (std::size_t i = 0; i < maps[0].u.size(); ++i) {
    EXPECT_TRUE(std::isfinite(maps[0].u.values()[i]));
    EXPECT_GT(maps[0].u.values()[i], 0.0f);
  }
  EXPECT_FALSE(is_valid(maps[1].u(3, 4)));
  EXPECT_FLOAT_EQ(maps[0].u.values()[7], static_cast<float>((10.0 + 1.0) / 2));
  EXPECT_FLOAT_EQ(maps[0].u.values()[8], 1.0f);
}

TEST(BuildUncertaintyMaps, MissingTable) {
  SimplePair a;
  a.m.pair_id = 4;
  std::vector<PairMeasurements> pairs = {a.m};
  EXPECT_THROW_CODE(build_uncertainty_maps(pairs, std::vector<CSigmaTable>{three_bins()}, {}),
                    ErrorCode::MissingTable);
}

TEST(PairMeasurements, ValidateShapes) {
  SimplePair a;
  EXPECT_NO_THROW(validate(a.m));
  a.m.cost = FloatGrid(10, 10);
  EXPECT_THROW_CODE(validate(a.m), ErrorCode::DimensionMismatch);
}

}  // namespace
}  // namespace photocov
