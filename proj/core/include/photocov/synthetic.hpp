#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "photocov/geometry.hpp"
#include "photocov/grid.hpp"
#include "photocov/mvs_uncertainty.hpp"

namespace photocov {

enum class TerrainKind { Flat, Sinusoidal, StepEdge };

/// Height field z = h(x, y) in the world frame (z up).
struct Terrain {
  TerrainKind kind = TerrainKind::Sinusoidal;
  double amplitude = 2.0;    // Sinusoidal (m)
  double wavelength = 30.0;  // Sinusoidal (m)
  double step_height = 4.0;  // StepEdge, raised for x > 0 (m)

  double height(double x, double y) const;
  double min_height() const;
  double max_height() const;
  bool may_occlude() const { return kind == TerrainKind::StepEdge; }
};

/// First intersection of the ray origin + t dir (t > 0) with the terrain.
/// The ray must point downward.
std::optional<Vec3> intersect_terrain(const Terrain& terrain, const Vec3& origin, const Vec3& dir);

enum class MeasurementSource {
  NoiseModel,  // GT disparity plus Gaussian noise with sigma_true(c)
  Census,      // 7x7 census matcher on rendered textured images
};

struct SceneSpec {
  int grid_rows = 3;
  int grid_cols = 3;
  double altitude = 100.0;
  double overlap_forward = 0.8;  // along x
  double overlap_side = 0.6;     // along y
  Terrain terrain;
  int image_size = 192;
  double focal = 160.0;
  /// Standard deviation of the random attitude perturbation (rad).
  double attitude_jitter = 0.003;
  std::uint64_t texture_seed = 7;
  /// Noise on the sparse tie-point observations (px).
  double obs_noise_px = 0.5;
  int tie_points = 300;
  /// GPS prior sigma on camera centers (m); 0 disables priors.
  double gps_sigma = 0.02;
  /// sigma_true(c) = cost_a + cost_b * c (px).
  double cost_a = 0.2;
  double cost_b = 0.01;
  double cost_max = 60.0;
  /// Log-normal spread of a per-pair cost scale factor.
  double cost_scale_spread = 0.0;
  /// Spacing of the reference cloud sampled from the terrain (m).
  double reference_spacing = 0.5;
  MeasurementSource source = MeasurementSource::NoiseModel;
  int census_max_disparity = 128;
};

/// Throws InvalidSpec.
void validate(const SceneSpec& spec);

/// Ground truth of one ordered pair.
struct PairTruth {
  int pair_id = 0;
  StereoPairGeometry geometry;
  /// Rectified reference depth and disparity (NaN where the point is not
  /// visible in both views).
  FloatGrid depth;
  FloatGrid disparity;
  /// Right-to-left disparity on the rectified source grid, x_ref - x_src
  /// expressed at the source pixel (negative).
  FloatGrid disparity_rl;
};

struct Scene {
  SceneSpec spec;
  Reconstruction recon;
  std::vector<PairTruth> pairs;
  /// Dense terrain samples standing in for a LiDAR reference.
  std::vector<Vec3> reference_cloud;
};

/// Deterministic for a given spec and seed. Pairs link every camera with its
/// 8-neighbourhood in both orders.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Smooth texture intensity in [0, 1] at a ground position.
double texture_intensity(const SceneSpec& spec, double x, double y);

/// Matching cost field in [0, cost_max], high where texture is weak.
double cost_field(const SceneSpec& spec, double x, double y);

/// Noisy disparity and cost for one pair. Uses the spec's measurement source.
PairMeasurements synthesize_pair_measurements(const Scene& scene, const PairTruth& truth,
                                              const SceneSpec& spec, std::uint64_t seed);

std::vector<PairMeasurements> synthesize_all_pairs(const Scene& scene, std::uint64_t seed,
                                                   int threads = 1);

/// Rendered rectified image of one side of a pair (texture intensity, NaN
/// where the ray misses).
FloatGrid render_rectified(const Scene& scene, const StereoPairGeometry& geom, PairSide side);

/// Independent stream for (seed, index); stable across thread counts.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace photocov
