#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "photocov/census_matcher.hpp"
#include "photocov/evaluation.hpp"
#include "photocov/mvs_pipeline.hpp"
#include "photocov/propagation.hpp"
#include "photocov/sfm_covariance.hpp"
#include "photocov/synthetic.hpp"

namespace photocov {
namespace {

struct SmallScene {
  Scene scene;
  std::vector<PairMeasurements> pairs;
  CalibrationResult cal;
  PairGeometries geoms;
  UncertaintyLookup lookup;
  ParameterCovariance cov;

  SmallScene() {
    SceneSpec spec;
    spec.grid_rows = 2;
    spec.grid_cols = 3;
    spec.tie_points = 150;
    scene = generate_scene(spec, 1);
    pairs = synthesize_all_pairs(scene, 1);
    CalibrationOptions o;
    o.n_min = 4;
    o.table.min_bin_count = 10;
    cal = calibrate(scene.recon, pairs, o);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      geoms[pairs[k].pair_id] = pairs[k].pair;
      lookup[pairs[k].pair_id] = &cal.maps[k].u;
    }
    cov = parameter_covariance(assemble_with_priors(linearize(scene.recon), priors_from(scene.recon)),
                               GaugeMode::PriorAnchored);
  }
};

const SmallScene& small_scene() {
  static const SmallScene s;
  return s;
}

void BM_PropagatePoint(benchmark::State& state) {
  const SmallScene& s = small_scene();
  const PointContext ctx = make_point_context(s.cal.dense_points[s.cal.dense_points.size() / 2], s.geoms,
                                              s.scene.recon.cameras, s.lookup);
  for (auto _ : state)
    benchmark::DoNotOptimize(propagate_point(ctx, s.cov, s.scene.recon.cameras, s.geoms, {}));
}
BENCHMARK(BM_PropagatePoint);

void BM_PropagateCloud(benchmark::State& state) {
  const SmallScene& s = small_scene();
  const std::vector<DensePoint> points(s.cal.dense_points.begin(), s.cal.dense_points.begin() + 1000);
  for (auto _ : state)
    benchmark::DoNotOptimize(propagate_cloud(points, s.cov, s.scene.recon.cameras, s.geoms, s.lookup, {}));
  state.SetItemsProcessed(state.iterations() * points.size());
}
BENCHMARK(BM_PropagateCloud)->Unit(benchmark::kMillisecond);

void BM_SfmCovariance(benchmark::State& state) {
  const SmallScene& s = small_scene();
  for (auto _ : state)
    benchmark::DoNotOptimize(parameter_covariance(
        assemble_with_priors(linearize(s.scene.recon), priors_from(s.scene.recon)), GaugeMode::PriorAnchored));
}
BENCHMARK(BM_SfmCovariance)->Unit(benchmark::kMillisecond);

void BM_Calibrate(benchmark::State& state) {
  const SmallScene& s = small_scene();
  CalibrationOptions o;
  o.n_min = 4;
  o.table.min_bin_count = 10;
  for (auto _ : state) benchmark::DoNotOptimize(calibrate(s.scene.recon, s.pairs, o));
}
BENCHMARK(BM_Calibrate)->Unit(benchmark::kMillisecond);

void BM_AucCurve(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(1.0);
  PairedErrors pe;
  for (int i = 0; i < state.range(0); ++i) {
    pe.actual.push_back(e(rng));
    pe.predicted.push_back(e(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc_curve(pe));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AucCurve)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_CensusMatch(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const int w = 192, h = 192;
  FloatGrid left(w, h), right(w, h);
  for (float& v : left.values()) v = u(rng);
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) right(col, row) = left(std::min(col + 12, w - 1), row);
  for (auto _ : state) benchmark::DoNotOptimize(census_match(left, right, 64));
}
BENCHMARK(BM_CensusMatch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace photocov

BENCHMARK_MAIN();
