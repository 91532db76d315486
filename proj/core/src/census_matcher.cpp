#include "photocov/census_matcher.hpp"

#include <bit>
#include <limits>

#include "photocov/error.hpp"

namespace photocov {

namespace {

constexpr std::uint64_t kNoCode = std::numeric_limits<std::uint64_t>::max();

}  // namespace

Grid<std::uint64_t> census_transform(const FloatGrid& image, int window) {
  if (window < 3 || window % 2 == 0 || window * window - 1 > 63)
    throw Error(ErrorCode::InvalidConfig, "census window must be odd, 3..7");
  const int r = window / 2;
  Grid<std::uint64_t> out(image.width(), image.height(), kNoCode);
  for (int row = r; row < image.height() - r; ++row) {
    for (int col = r; col < image.width() - r; ++col) {
      const float c = image(col, row);
      if (!is_valid(c)) continue;
      std::uint64_t code = 0;
      bool ok = true;
      for (int dy = -r; dy <= r && ok; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const float v = image(col + dx, row + dy);
          if (!is_valid(v)) {
            ok = false;
            break;
          }
          code = (code << 1) | (v < c ? 1u : 0u);
        }
      }
      if (ok) out(col, row) = code;
    }
  }
  return out;
}

CensusMatch census_match(const FloatGrid& left, const FloatGrid& right, int max_disparity,
                         int window) {
  if (!left.same_shape(right))
    throw Error(ErrorCode::DimensionMismatch, "census images differ in shape");
  if (max_disparity < 1) throw Error(ErrorCode::InvalidConfig, "max_disparity must be positive");
  const Grid<std::uint64_t> cl = census_transform(left, window);
  const Grid<std::uint64_t> cr = census_transform(right, window);
  CensusMatch m{FloatGrid(left.width(), left.height(), kInvalid),
                FloatGrid(left.width(), left.height(), kInvalid)};
  std::vector<int> costs(max_disparity + 1);
  for (int row = 0; row < left.height(); ++row) {
    for (int col = 0; col < left.width(); ++col) {
      const std::uint64_t a = cl(col, row);
      if (a == kNoCode) continue;
      int best = -1;
      for (int d = 0; d <= max_disparity; ++d) {
        const int xr = col - d;
        if (xr < 0 || cr(xr, row) == kNoCode) {
          costs[d] = -1;
          continue;
        }
        costs[d] = std::popcount(a ^ cr(xr, row));
        if (best < 0 || costs[d] < costs[best]) best = d;
      }
      if (best < 0) continue;
      double sub = 0.0;
      if (best > 0 && best < max_disparity && costs[best - 1] >= 0 && costs[best + 1] >= 0) {
        const double c0 = costs[best - 1], c1 = costs[best], c2 = costs[best + 1];
        const double denom = c0 - 2.0 * c1 + c2;
        if (denom > 0.0) sub = 0.5 * (c0 - c2) / denom;
      }
      m.disparity(col, row) = static_cast<float>(best + sub);
      m.cost(col, row) = static_cast<float>(costs[best]);
    }
  }
  return m;
}

}  // namespace photocov
