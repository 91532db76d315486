#pragma once

#include <cstdint>

#include "photocov/grid.hpp"

namespace photocov {

struct CensusMatch {
  FloatGrid disparity;
  /// Hamming distance of the winning candidate.
  FloatGrid cost;
};

/// 7x7 census transform. Bit set where the neighbour is darker than the
/// center; pixels whose window leaves the image or touches NaN get no code.
Grid<std::uint64_t> census_transform(const FloatGrid& image, int window = 7);

/// Winner-take-all matching over d = x_left - x_right in [0, max_disparity]
/// with Hamming cost, followed by parabolic sub-pixel refinement.
CensusMatch census_match(const FloatGrid& left, const FloatGrid& right, int max_disparity,
                         int window = 7);

}  // namespace photocov
