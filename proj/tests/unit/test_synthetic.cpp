#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "photocov/census_matcher.hpp"
#include "photocov/evaluation.hpp"
#include "photocov/monte_carlo.hpp"
#include "photocov/mvs_pipeline.hpp"
#include "photocov/synthetic.hpp"
#include "test_util.hpp"

namespace photocov {
namespace {

SceneSpec small_spec() {
  SceneSpec spec;
  spec.grid_rows = 2;
  spec.grid_cols = 2;
  spec.tie_points = 120;
  return spec;
}

bool grids_equal(const FloatGrid& a, const FloatGrid& b) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

TEST(Terrain, HeightsAndBounds) {
  Terrain flat;
  flat.kind = TerrainKind::Flat;
  EXPECT_EQ(flat.height(3.0, -7.0), 0.0);
  Terrain step;
  step.kind = TerrainKind::StepEdge;
  EXPECT_EQ(step.height(-1.0, 0.0), 0.0);
  EXPECT_EQ(step.height(1.0, 0.0), step.step_height);
  EXPECT_TRUE(step.may_occlude());
  Terrain sine;
  for (double x = -50; x <= 50; x += 1.7)
    for (double y = -50; y <= 50; y += 2.3) {
      EXPECT_GE(sine.height(x, y), sine.min_height());
      EXPECT_LE(sine.height(x, y), sine.max_height());
    }
}

TEST(Terrain, RayIntersectionLiesOnSurface) {
  Terrain sine;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int i = 0; i < 200; ++i) {
    const Vec3 origin(u(rng) * 50, u(rng) * 50, 100.0);
    const Vec3 dir = Vec3(u(rng), u(rng), -1.0).normalized();
    const auto hit = intersect_terrain(sine, origin, dir);
    ASSERT_TRUE(hit.has_value());
    EXPECT_NEAR((*hit).z(), sine.height(hit->x(), hit->y()), 1e-6);
    EXPECT_NEAR(((*hit - origin).normalized() - dir).norm(), 0.0, 1e-9);
  }
}

TEST(GenerateScene, DeterministicAndSeedSensitive) {
  const Scene a = generate_scene(small_spec(), 5);
  const Scene b = generate_scene(small_spec(), 5);
  const Scene c = generate_scene(small_spec(), 6);
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t i = 0; i < a.recon.cameras.size(); ++i) {
    EXPECT_EQ(a.recon.cameras[i].center, b.recon.cameras[i].center);
    EXPECT_EQ(a.recon.cameras[i].rotation, b.recon.cameras[i].rotation);
  }
  for (std::size_t i = 0; i < a.pairs.size(); ++i) EXPECT_TRUE(grids_equal(a.pairs[i].disparity, b.pairs[i].disparity));
  bool differs = false;
  for (std::size_t i = 0; i < a.recon.observations.size() && i < c.recon.observations.size(); ++i)
    differs |= a.recon.observations[i].pixel != c.recon.observations[i].pixel;
  EXPECT_TRUE(differs);
}

TEST(GenerateScene, StructureAndTruthConsistency) {
  const Scene s = generate_scene(small_spec(), 9);
  EXPECT_NO_THROW(validate(s.recon));
  EXPECT_EQ(s.recon.cameras.size(), 4u);
  // Every camera links to its three 8-neighbours, in both orders.
  EXPECT_EQ(s.pairs.size(), 12u);
  EXPECT_FALSE(s.reference_cloud.empty());
  for (const PairTruth& t : s.pairs) {
    int checked = 0;
    for (int row = 0; row < t.depth.height(); row += 17)
      for (int col = 0; col < t.depth.width(); col += 13) {
        const float d = t.disparity(col, row);
        if (!is_valid(d)) continue;
        EXPECT_NEAR(disparity_to_depth(d, t.geometry.baseline, t.geometry.rect_focal) / t.depth(col, row), 1.0, 1e-5);
        ++checked;
      }
    EXPECT_GT(checked, 20);
  }
}

TEST(GenerateScene, InvalidSpec) {
  SceneSpec spec = small_spec();
  spec.grid_cols = 1;
  spec.grid_rows = 1;
  EXPECT_THROW_CODE(generate_scene(spec, 1), ErrorCode::InvalidSpec);
  spec = small_spec();
  spec.focal = -1.0;
  EXPECT_THROW_CODE(generate_scene(spec, 1), ErrorCode::InvalidSpec);
}

TEST(SynthesizePairs, ThreadIndependentAndNoiseModel) {
  SceneSpec spec = small_spec();
  const Scene s = generate_scene(spec, 21);
  const auto one = synthesize_all_pairs(s, 77, 1);
  const auto four = synthesize_all_pairs(s, 77, 4);
  ASSERT_EQ(one.size(), four.size());
  double z2 = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < one.size(); ++k) {
    EXPECT_TRUE(grids_equal(one[k].disparity, four[k].disparity));
    EXPECT_TRUE(grids_equal(one[k].cost, four[k].cost));
    const FloatGrid& gt = s.pairs[k].disparity;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const float d = one[k].disparity.values()[i], g = gt.values()[i];
      if (!is_valid(d) || !is_valid(g)) continue;
      const double sigma = spec.cost_a + spec.cost_b * one[k].cost.values()[i];
      z2 += std::pow((d - g) / sigma, 2);
      ++n;
    }
  }
  ASSERT_GT(n, 10000u);
  // Standardized noise has unit variance.
  EXPECT_NEAR(z2 / n, 1.0, 0.03);
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Census, FrontoParallelPlaneRecoversShift) {
  const int w = 120, h = 60, shift = 9;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  FloatGrid texture(w + 2 * shift, h);
  for (float& v : texture.values()) v = u(rng);
  FloatGrid left(w, h), right(w, h);
  // Left pixel x shows the texture at x + shift, right pixel x - shift does too.
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      left(col, row) = texture(col + shift, row);
      right(col, row) = texture(col + 2 * shift, row);
    }
  const CensusMatch m = census_match(left, right, 20);
  int good = 0, total = 0;
  for (int row = 3; row < h - 3; ++row)
    for (int col = shift + 3; col < w - 3; ++col) {
      ++total;
      good += is_valid(m.disparity(col, row)) && std::abs(m.disparity(col, row) - shift) < 0.5;
    }
  EXPECT_GE(static_cast<double>(good) / total, 0.95);
}

TEST(Census, TransformInvariantToMonotoneIntensityChange) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  FloatGrid a(20, 20);
  for (float& v : a.values()) v = u(rng);
  FloatGrid b = a;
  for (float& v : b.values()) v = 3.0f * v + 0.5f;
  const auto ca = census_transform(a), cb = census_transform(b);
  for (std::size_t i = 0; i < ca.size(); ++i) EXPECT_EQ(ca.values()[i], cb.values()[i]);
}

TEST(MonteCarlo, SampleCovarianceAndFrobenius) {
  Eigen::MatrixXd s(4, 2);
  s << 1, 0, -1, 0, 0, 2, 0, -2;
  const Eigen::MatrixXd c = sample_covariance(s);
  EXPECT_NEAR(c(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c(1, 1), 8.0 / 3.0, 1e-15);
  EXPECT_NEAR(c(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(frobenius_relative_error(2.0 * c, c), 1.0, 1e-15);
}

TEST(MonteCarlo, TwoViewClosedForm) {
  MvsMonteCarloOptions o;
  o.trials = 4000;
  o.seed = 3;
  const MonteCarloReport r = monte_carlo_two_view(50.0, 5.0, 800.0, 0.5, o);
  const double expected = 2.0 * std::pow(0.5 * 50.0 * 50.0 / (5.0 * 800.0), 2);
  EXPECT_NEAR(r.analytic(0, 0) / expected, 1.0, 1e-6);
  EXPECT_LT(std::abs(r.empirical(0, 0) / expected - 1.0), 0.1);
}

TEST(MonteCarlo, ErrorShrinksWithTrials) {
  // Frobenius error of a sample covariance scales like 1/sqrt(trials).
  auto mean_err = [](int trials) {
    double acc = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      MvsMonteCarloOptions o;
      o.trials = trials;
      o.seed = seed;
      acc += monte_carlo_two_view(50.0, 5.0, 800.0, 0.5, o).frobenius_rel_err;
    }
    return acc / 8.0;
  };
  const double small = mean_err(250), large = mean_err(4000);
  EXPECT_LT(large, small);
  EXPECT_NEAR(small / large, 4.0, 2.0);
}

Reconstruction strip_scene() {
  SceneSpec spec;
  spec.grid_rows = 1;
  spec.grid_cols = 3;
  spec.tie_points = 50;
  spec.focal = 150.0;
  spec.gps_sigma = 0.0;
  return generate_scene(spec, 42).recon;
}

TEST(MonteCarlo, SfmMatchesAnalyticOnStrip) {
  SfmMonteCarloOptions o;
  o.trials = 600;
  o.seed = 2;
  o.sigma_px = 0.5;
  o.max_iterations = 30;
  o.threads = 2;
  const MonteCarloReport r = monte_carlo_sfm(strip_scene(), o);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.failed, 0);
  EXPECT_LT(r.frobenius_rel_err, 0.2);
}

TEST(MonteCarlo, SfmThreadCountDoesNotChangeResult) {
  const Reconstruction recon = strip_scene();
  SfmMonteCarloOptions o;
  o.trials = 100;
  o.max_iterations = 30;
  o.threads = 1;
  const MonteCarloReport a = monte_carlo_sfm(recon, o);
  o.threads = 3;
  const MonteCarloReport b = monte_carlo_sfm(recon, o);
  EXPECT_EQ(a.empirical, b.empirical);
  o.trials = 99;
  EXPECT_THROW_CODE(monte_carlo_sfm(recon, o), ErrorCode::InvalidConfig);
}

TEST(Calibrate, RecoversInjectedNoiseModel) {
  SceneSpec spec;
  const Scene scene = generate_scene(spec, 42);
  const auto pairs = synthesize_all_pairs(scene, 42, 4);
  CalibrationOptions o;
  o.threads = 4;
  const CalibrationResult r = calibrate(scene.recon, pairs, o);
  ASSERT_EQ(r.tables.size(), pairs.size());
  ASSERT_EQ(r.maps.size(), pairs.size());
  // Every pair shares the injected model, so pooling the samples gives one
  // table with well-populated bins.
  std::vector<NViewSample> pooled;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EXPECT_FALSE(r.samples[k].empty());
    EXPECT_EQ(r.maps[k].u.width(), pairs[k].disparity.width());
    pooled.insert(pooled.end(), r.samples[k].begin(), r.samples[k].end());
  }
  const CSigmaTable t = build_c_sigma_table(pooled, o.table, 0);
  int checked = 0;
  for (const CSigmaBin& b : t.bins) {
    if (b.count < 1000) continue;
    const double truth = spec.cost_a + spec.cost_b * b.cost_center;
    EXPECT_LT(std::abs(b.sigma / truth - 1.0), 0.1) << "c " << b.cost_center;
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Calibrate, PairDepthInReferenceMatchesTruth) {
  const Scene scene = generate_scene(small_spec(), 4);
  PairMeasurements m;
  m.pair_id = scene.pairs[0].pair_id;
  m.pair = scene.pairs[0].geometry;
  m.disparity = scene.pairs[0].disparity;
  m.cost = FloatGrid(m.disparity.width(), m.disparity.height(), 0.0f);
  const Camera& ref = scene.recon.cameras[m.pair.reference_camera_id];
  const FloatGrid depth = pair_depth_in_reference(m, ref);
  EXPECT_EQ(depth.width(), ref.width());
  int checked = 0;
  for (int row = 10; row < depth.height(); row += 23)
    for (int col = 10; col < depth.width(); col += 19) {
      const float z = depth(col, row);
      if (!is_valid(z)) continue;
      const auto hit = intersect_terrain(scene.spec.terrain, ref.center, ref.ray_direction(Vec2(col, row)));
      ASSERT_TRUE(hit.has_value());
      const double truth = (ref.rotation * (*hit - ref.center)).z();
      EXPECT_NEAR(z / truth, 1.0, 2e-3);
      ++checked;
    }
  EXPECT_GT(checked, 20);
}

}  // namespace
}  // namespace photocov
