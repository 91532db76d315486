#include "photocov/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace photocov {

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(points_.size());
  root_ = build(0, order_.size(), 0);
}

int PointIndex::build(std::size_t begin, std::size_t end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     const double va = points_[a][axis], vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({order_[mid], axis, -1, -1});
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::size_t> PointIndex::nearest(const Vec3& query, std::size_t k) const {
  k = std::min(k, points_.size());
  if (k == 0) return {};
  // Max-heap of the current best (distance^2, index).
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> best;
  auto visit = [&](auto&& self, int node) -> void {
    if (node < 0) return;
    const Node& nd = nodes_[node];
    const Vec3& p = points_[nd.point];
    const Entry e{(p - query).squaredNorm(), nd.point};
    if (best.size() < k) {
      best.push(e);
    } else if (e < best.top()) {
      best.pop();
      best.push(e);
    }
    const double diff = query[nd.axis] - p[nd.axis];
    const int near = diff < 0.0 ? nd.left : nd.right;
    const int far = diff < 0.0 ? nd.right : nd.left;
    self(self, near);
    if (best.size() < k || diff * diff <= best.top().first) self(self, far);
  };
  visit(visit, root_);
  std::vector<std::size_t> out(best.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = best.top().second;
    best.pop();
  }
  return out;
}

}  // namespace photocov
