#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "photocov/error.hpp"
#include "photocov/geometry.hpp"

namespace photocov::testing {

/// Nadir camera looking down -z with image x along world +x.
inline Camera nadir_camera(const Vec3& center, double focal = 500.0, int size = 200) {
  Camera c;
  c.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  c.center = center;
  c.focal = focal;
  c.principal_point = Vec2(size / 2.0, size / 2.0);
  c.image_size = {size, size};
  return c;
}

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
  return rotation_exp(axis * max_angle * u(rng));
}

/// Nadir camera with a small random attitude perturbation.
inline Camera jittered_nadir(std::mt19937_64& rng, const Vec3& center, double jitter = 0.05,
                             double focal = 500.0, int size = 200) {
  Camera c = nadir_camera(center, focal, size);
  c.rotation = c.rotation * random_rotation(rng, jitter);
  return c;
}

/// Small reconstruction: cameras in a zigzag strip above z = 0 (centers not
/// collinear), points near the ground observed by every camera with exact
/// pixels.
inline Reconstruction line_scene(std::mt19937_64& rng, int cameras, int points,
                                 double spacing = 4.0, double altitude = 40.0) {
  Reconstruction r;
  for (int i = 0; i < cameras; ++i)
    r.cameras.push_back(jittered_nadir(rng, Vec3(spacing * i, 0.3 * i + 1.5 * (i % 2), altitude), 0.02, 400.0, 300));
  std::uniform_real_distribution<double> xy(-8.0, 8.0), z(-3.0, 3.0);
  const double mid = spacing * (cameras - 1) / 2.0;
  while (static_cast<int>(r.points.size()) < points) {
    const Vec3 x(mid + xy(rng), xy(rng), z(rng));
    bool visible = true;
    for (const Camera& c : r.cameras) visible = visible && c.in_image(project(c, x));
    if (!visible) continue;
    const int id = static_cast<int>(r.points.size());
    r.points.push_back(x);
    for (int i = 0; i < cameras; ++i) r.observations.push_back({i, id, project(r.cameras[i], x), 0.5});
  }
  return r;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double d = std::max(b.norm(), 1e-300);
  return (a - b).norm() / d;
}

#define EXPECT_THROW_CODE(stmt, code_)                                     \
  do {                                                                    \
    try {                                                                 \
      stmt;                                                               \
      ADD_FAILURE() << "expected " << ::photocov::to_string(code_);       \
    } catch (const ::photocov::Error& e_) {                               \
      EXPECT_EQ(e_.code(), code_) << e_.what();                           \
    }                                                                     \
  } while (0)

}  // namespace photocov::testing
