#pragma once

#include <cstddef>
#include <vector>

#include "photocov/geometry.hpp"

namespace photocov {

/// Static 3D k-d tree. Read-only after construction, so queries may run
/// concurrently.
class PointIndex {
 public:
  PointIndex() = default;
  explicit PointIndex(std::vector<Vec3> points);

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  /// Indices of the k nearest points, closest first. Ties are broken by the
  /// lower index.
  std::vector<std::size_t> nearest(const Vec3& query, std::size_t k) const;

 private:
  struct Node {
    std::size_t point = 0;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth);

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace photocov
