#include "photocov/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "photocov/census_matcher.hpp"
#include "photocov/error.hpp"
#include "photocov/parallel.hpp"

namespace photocov {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform [0, 1) from a hash of (seed, k).
double hash_unit(std::uint64_t seed, std::uint64_t k) {
  return static_cast<double>(splitmix64(seed * 0x2545f4914f6cdd1dULL + k) >> 11) * 0x1.0p-53;
}

/// Sum of hashed plane waves, normalized to [-1, 1].
double wave_field(std::uint64_t seed, int count, double min_wavelength, double max_wavelength,
                  double x, double y) {
  double sum = 0.0, norm = 0.0;
  for (int k = 0; k < count; ++k) {
    const double angle = 2.0 * std::numbers::pi * hash_unit(seed, 3 * k);
    const double wl = min_wavelength + (max_wavelength - min_wavelength) * hash_unit(seed, 3 * k + 1);
    const double phase = 2.0 * std::numbers::pi * hash_unit(seed, 3 * k + 2);
    const double amp = wl / max_wavelength;
    sum += amp * std::sin(2.0 * std::numbers::pi / wl * (std::cos(angle) * x + std::sin(angle) * y) + phase);
    norm += amp;
  }
  return sum / norm;
}

Mat3 nadir_rotation() {
  Mat3 r;
  r << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  return r;
}

bool sees(const Camera& cam, const Vec3& x) {
  if (!(cam.to_camera(x).z() > 0.0)) return false;
  return cam.in_image(project(cam, x));
}

/// Point is the first terrain hit from `camera_center`.
bool unoccluded(const Terrain& terrain, const Vec3& camera_center, const Vec3& x) {
  if (!terrain.may_occlude()) return true;
  const Vec3 dir = (x - camera_center).normalized();
  const auto hit = intersect_terrain(terrain, camera_center, dir);
  return hit && (*hit - x).norm() < 1e-3;
}

}  // namespace

double Terrain::height(double x, double y) const {
  switch (kind) {
    case TerrainKind::Flat: return 0.0;
    case TerrainKind::Sinusoidal: {
      const double w = 2.0 * std::numbers::pi / wavelength;
      return amplitude * std::sin(w * x) * std::cos(w * y);
    }
    case TerrainKind::StepEdge: return x > 0.0 ? step_height : 0.0;
  }
  return 0.0;
}

double Terrain::min_height() const {
  switch (kind) {
    case TerrainKind::Flat: return 0.0;
    case TerrainKind::Sinusoidal: return -std::abs(amplitude);
    case TerrainKind::StepEdge: return std::min(0.0, step_height);
  }
  return 0.0;
}

double Terrain::max_height() const {
  switch (kind) {
    case TerrainKind::Flat: return 0.0;
    case TerrainKind::Sinusoidal: return std::abs(amplitude);
    case TerrainKind::StepEdge: return std::max(0.0, step_height);
  }
  return 0.0;
}

std::optional<Vec3> intersect_terrain(const Terrain& terrain, const Vec3& origin, const Vec3& dir) {
  if (!(dir.z() < 0.0)) return std::nullopt;
  const double zmax = terrain.max_height() + 1e-9;
  const double zmin = terrain.min_height() - 1e-9;
  if (origin.z() <= zmin) return std::nullopt;
  const double t0 = std::max(0.0, (zmax - origin.z()) / dir.z());
  const double t1 = (zmin - origin.z()) / dir.z();
  auto f = [&](double t) {
    const Vec3 p = origin + t * dir;
    return p.z() - terrain.height(p.x(), p.y());
  };
  if (terrain.kind == TerrainKind::Flat) return origin + t1 * dir;
  constexpr int kSteps = 24;
  double a = t0, fa = f(a);
  if (fa <= 0.0) return origin + a * dir;
  for (int s = 1; s <= kSteps; ++s) {
    double b = t0 + (t1 - t0) * s / kSteps;
    double fb = f(b);
    if (fb <= 0.0) {
      // Illinois regula falsi on the bracket [a, b]; falls back to bisection
      // at discontinuities.
      int side = 0;
      for (int it = 0; it < 100 && b - a > 1e-12 * (1.0 + b); ++it) {
        double m = (a * fb - b * fa) / (fb - fa);
        if (!(m > a && m < b) || it % 8 == 7) m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return origin + m * dir;
        if (fm > 0.0) {
          a = m;
          fa = fm;
          if (side == -1) fb *= 0.5;
          side = -1;
        } else {
          b = m;
          fb = fm;
          if (side == 1) fa *= 0.5;
          side = 1;
        }
      }
      return origin + 0.5 * (a + b) * dir;
    }
    a = b;
    fa = fb;
  }
  return origin + t1 * dir;
}

void validate(const SceneSpec& spec) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidSpec, m); };
  if (spec.grid_rows < 1 || spec.grid_cols < 1 || spec.grid_rows * spec.grid_cols < 2)
    fail("the camera grid needs at least two cameras");
  if (!(spec.altitude > 0.0)) fail("altitude must be positive");
  if (!(spec.overlap_forward > 0.0 && spec.overlap_forward < 1.0)) fail("overlap_forward must be in (0, 1)");
  if (!(spec.overlap_side > 0.0 && spec.overlap_side < 1.0)) fail("overlap_side must be in (0, 1)");
  if (spec.image_size < 16) fail("image_size must be at least 16");
  if (!(spec.focal > 0.0)) fail("focal must be positive");
  if (!(spec.attitude_jitter >= 0.0)) fail("attitude_jitter must be non-negative");
  if (!(spec.obs_noise_px >= 0.0)) fail("obs_noise_px must be non-negative");
  if (spec.tie_points < 1) fail("tie_points must be positive");
  if (!(spec.gps_sigma >= 0.0)) fail("gps_sigma must be non-negative");
  if (!(spec.cost_a >= 0.0) || !(spec.cost_b >= 0.0)) fail("cost noise coefficients must be non-negative");
  if (!(spec.cost_max > 0.0)) fail("cost_max must be positive");
  if (!(spec.cost_scale_spread >= 0.0)) fail("cost_scale_spread must be non-negative");
  if (!(spec.reference_spacing > 0.0)) fail("reference_spacing must be positive");
  if (spec.terrain.kind == TerrainKind::Sinusoidal && !(spec.terrain.wavelength > 0.0))
    fail("terrain wavelength must be positive");
  if (spec.terrain.max_height() >= spec.altitude) fail("terrain reaches the cameras");
  if (spec.census_max_disparity < 1) fail("census_max_disparity must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

double texture_intensity(const SceneSpec& spec, double x, double y) {
  const double weak = cost_field(spec, x, y) / spec.cost_max;
  const double contrast = 0.15 + 0.85 * (1.0 - weak);
  const double fine = wave_field(spec.texture_seed ^ 0xa5a5a5a5ULL, 24, 0.5, 3.0, x, y);
  return std::clamp(0.5 + 0.5 * contrast * fine, 0.0, 1.0);
}

double cost_field(const SceneSpec& spec, double x, double y) {
  const double s = wave_field(spec.texture_seed, 6, 8.0, 30.0, x, y);
  // Stretch the bell-shaped wave sum towards a flatter distribution.
  const double u = std::clamp(0.5 + 0.8 * s, 0.0, 1.0);
  return spec.cost_max * u;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  validate(spec);
  Scene scene;
  scene.spec = spec;
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);

  const double footprint = spec.altitude * spec.image_size / spec.focal;
  const double step_x = footprint * (1.0 - spec.overlap_forward);
  const double step_y = footprint * (1.0 - spec.overlap_side);
  const double x0 = -0.5 * step_x * (spec.grid_cols - 1);
  const double y0 = -0.5 * step_y * (spec.grid_rows - 1);
  const Vec2 pp(0.5 * spec.image_size - 0.5, 0.5 * spec.image_size - 0.5);

  Reconstruction& recon = scene.recon;
  for (int r = 0; r < spec.grid_rows; ++r) {
    for (int c = 0; c < spec.grid_cols; ++c) {
      Camera cam;
      const Vec3 jitter(spec.attitude_jitter * normal(rng), spec.attitude_jitter * normal(rng),
                        spec.attitude_jitter * normal(rng));
      cam.rotation = rotation_exp(jitter) * nadir_rotation();
      cam.center = Vec3(x0 + c * step_x, y0 + r * step_y, spec.altitude);
      cam.focal = spec.focal;
      cam.principal_point = pp;
      cam.image_size = {spec.image_size, spec.image_size};
      recon.cameras.push_back(cam);
    }
  }

  // Sparse tie points seen by at least two cameras.
  const double half_x = 0.5 * (step_x * (spec.grid_cols - 1) + footprint) * 0.9;
  const double half_y = 0.5 * (step_y * (spec.grid_rows - 1) + footprint) * 0.9;
  std::uniform_real_distribution<double> ux(-half_x, half_x), uy(-half_y, half_y);
  const double sigma_px = spec.obs_noise_px > 0.0 ? spec.obs_noise_px : 0.5;
  int attempts = 0;
  while (static_cast<int>(recon.points.size()) < spec.tie_points) {
    if (++attempts > 100 * spec.tie_points)
      throw Error(ErrorCode::InvalidSpec, "cannot place tie points seen by two cameras");
    const double x = ux(rng), y = uy(rng);
    const Vec3 p(x, y, spec.terrain.height(x, y));
    const int pid = static_cast<int>(recon.points.size());
    std::vector<Observation> seen;
    for (int k = 0; k < static_cast<int>(recon.cameras.size()); ++k) {
      const Camera& cam = recon.cameras[k];
      if (!sees(cam, p) || !unoccluded(spec.terrain, cam.center, p)) continue;
      Observation o;
      o.camera_id = k;
      o.point_id = pid;
      o.pixel = project(cam, p) +
                Vec2(spec.obs_noise_px * normal(rng), spec.obs_noise_px * normal(rng));
      o.sigma_px = sigma_px;
      if (cam.in_image(o.pixel)) seen.push_back(o);
    }
    if (seen.size() < 2) continue;
    recon.points.push_back(p);
    recon.observations.insert(recon.observations.end(), seen.begin(), seen.end());
  }
  if (spec.gps_sigma > 0.0) {
    for (int k = 0; k < static_cast<int>(recon.cameras.size()); ++k) {
      PositionPrior prior;
      prior.target_id = k;
      prior.position = recon.cameras[k].center +
                       spec.gps_sigma * Vec3(normal(rng), normal(rng), normal(rng));
      prior.covariance = Mat3::Identity() * spec.gps_sigma * spec.gps_sigma;
      recon.gps_priors.push_back(prior);
    }
  }

  // Ordered pairs over the 8-neighbourhood.
  for (int r = 0; r < spec.grid_rows; ++r) {
    for (int c = 0; c < spec.grid_cols; ++c) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= spec.grid_rows || cc >= spec.grid_cols) continue;
          PairTruth t;
          t.pair_id = static_cast<int>(scene.pairs.size());
          const int ref = r * spec.grid_cols + c, src = rr * spec.grid_cols + cc;
          t.geometry = rectify_pair(recon.cameras[ref], recon.cameras[src], ref, src);
          scene.pairs.push_back(std::move(t));
        }
      }
    }
  }

  parallel_for(scene.pairs.size(), 1, [&](std::size_t k) {
    PairTruth& t = scene.pairs[k];
    const StereoPairGeometry& g = t.geometry;
    const Camera& ref = recon.cameras[g.reference_camera_id];
    const Camera& src = recon.cameras[g.source_camera_id];
    const Camera ref_rect = rectified_camera(g, ref, PairSide::Reference);
    const Camera src_rect = rectified_camera(g, src, PairSide::Source);
    const double bf = g.baseline * g.rect_focal;
    const int w = g.rect_image_size[0], h = g.rect_image_size[1];
    t.depth = FloatGrid(w, h, kInvalid);
    t.disparity = FloatGrid(w, h, kInvalid);
    t.disparity_rl = FloatGrid(w, h, kInvalid);
    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < w; ++col) {
        const Vec2 px(col, row);
        const auto hit = intersect_terrain(spec.terrain, ref_rect.center, ref_rect.ray_direction(px));
        if (hit && sees(ref, *hit) && sees(src, *hit) && src_rect.in_image(project(src_rect, *hit)) &&
            unoccluded(spec.terrain, src.center, *hit)) {
          const float depth = static_cast<float>(ref_rect.to_camera(*hit).z());
          t.depth(col, row) = depth;
          t.disparity(col, row) = static_cast<float>(bf / static_cast<double>(depth));
        }
        const auto hit_s = intersect_terrain(spec.terrain, src_rect.center, src_rect.ray_direction(px));
        if (hit_s && sees(src, *hit_s) && sees(ref, *hit_s) &&
            ref_rect.in_image(project(ref_rect, *hit_s)) &&
            unoccluded(spec.terrain, ref.center, *hit_s)) {
          const float depth = static_cast<float>(src_rect.to_camera(*hit_s).z());
          t.disparity_rl(col, row) = static_cast<float>(-bf / static_cast<double>(depth));
        }
      }
    }
  });

  const int nx = static_cast<int>(std::floor(2.0 * half_x / spec.reference_spacing)) + 1;
  const int ny = static_cast<int>(std::floor(2.0 * half_y / spec.reference_spacing)) + 1;
  scene.reference_cloud.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = -half_x + i * spec.reference_spacing;
      const double y = -half_y + j * spec.reference_spacing;
      scene.reference_cloud.emplace_back(x, y, spec.terrain.height(x, y));
    }
  }
  return scene;
}

FloatGrid render_rectified(const Scene& scene, const StereoPairGeometry& geom, PairSide side) {
  const int cam_id = side == PairSide::Reference ? geom.reference_camera_id : geom.source_camera_id;
  const Camera rect = rectified_camera(geom, scene.recon.cameras.at(cam_id), side);
  FloatGrid img(geom.rect_image_size[0], geom.rect_image_size[1], kInvalid);
  for (int row = 0; row < img.height(); ++row) {
    for (int col = 0; col < img.width(); ++col) {
      const auto hit = intersect_terrain(scene.spec.terrain, rect.center,
                                         rect.ray_direction(Vec2(col, row)));
      if (hit) img(col, row) = static_cast<float>(texture_intensity(scene.spec, hit->x(), hit->y()));
    }
  }
  return img;
}

PairMeasurements synthesize_pair_measurements(const Scene& scene, const PairTruth& truth,
                                              const SceneSpec& spec, std::uint64_t seed) {
  PairMeasurements m;
  m.pair_id = truth.pair_id;
  m.pair = truth.geometry;
  const int w = truth.disparity.width(), h = truth.disparity.height();
  m.disparity = FloatGrid(w, h, kInvalid);
  m.cost = FloatGrid(w, h, kInvalid);

  if (spec.source == MeasurementSource::Census) {
    const FloatGrid left = render_rectified(scene, truth.geometry, PairSide::Reference);
    const FloatGrid right = render_rectified(scene, truth.geometry, PairSide::Source);
    const CensusMatch cm = census_match(left, right, spec.census_max_disparity);
    for (std::size_t i = 0; i < m.disparity.size(); ++i) {
      const float d = cm.disparity.values()[i];
      if (!is_valid(truth.disparity.values()[i]) || !is_valid(d) || !(d > 0.0f)) continue;
      m.disparity.values()[i] = d;
      m.cost.values()[i] = cm.cost.values()[i];
    }
    return m;
  }

  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(truth.pair_id)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale =
      spec.cost_scale_spread > 0.0 ? std::exp(spec.cost_scale_spread * normal(rng)) : 1.0;
  const Camera& ref = scene.recon.cameras.at(truth.geometry.reference_camera_id);
  const Camera ref_rect = rectified_camera(truth.geometry, ref, PairSide::Reference);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const float gt = truth.disparity(col, row);
      if (!is_valid(gt)) continue;
      const Vec3 x = backproject(ref_rect, Vec2(col, row), truth.depth(col, row));
      const float c = static_cast<float>(scale * cost_field(spec, x.x(), x.y()));
      const double sigma = spec.cost_a + spec.cost_b * static_cast<double>(c);
      const double d = gt + sigma * normal(rng);
      if (!(d > 0.0)) continue;
      m.disparity(col, row) = static_cast<float>(d);
      m.cost(col, row) = c;
    }
  }
  return m;
}

std::vector<PairMeasurements> synthesize_all_pairs(const Scene& scene, std::uint64_t seed,
                                                   int threads) {
  std::vector<PairMeasurements> out(scene.pairs.size());
  parallel_for(scene.pairs.size(), threads, [&](std::size_t k) {
    out[k] = synthesize_pair_measurements(scene, scene.pairs[k], scene.spec, seed);
  });
  return out;
}

}  // namespace photocov
