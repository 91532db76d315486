#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace photocov {

/// Dense row-major 2D grid. Row 0 is the top image row.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int col, int row) const noexcept {
    return col >= 0 && row >= 0 && col < width_ && row < height_;
  }

  T& operator()(int col, int row) { return data_[index(col, row)]; }
  const T& operator()(int col, int row) const { return data_[index(col, row)]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  std::size_t index(int col, int row) const noexcept {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using FloatGrid = Grid<float>;
using IntGrid = Grid<int>;

inline constexpr float kInvalid = std::numeric_limits<float>::quiet_NaN();

inline bool is_valid(float v) noexcept { return std::isfinite(v); }

}  // namespace photocov
