#pragma once

#include <optional>
#include <utility>

namespace bevlink {

/// Square bird's-eye-view grid in the ego frame (x forward, y left, meters).
///
/// Cell (row, col) covers x in [x_min + col*cell, x_min + (col+1)*cell) and
/// y in [y_min + row*cell, y_min + (row+1)*cell). Masks and feature maps are
/// stored row-major with this indexing.
struct BevGridSpec {
  double x_min = -32.0;
  double x_max = 32.0;
  double y_min = -32.0;
  double y_max = 32.0;
  int size = 64;

  static BevGridSpec centered(double half_extent_m, int cells);

  double cell_size() const noexcept { return (x_max - x_min) / size; }
  int cell_count() const noexcept { return size * size; }

  /// Throws ValidationError unless the grid is square with positive extent.
  void validate() const;

  /// Ego-frame coordinates of the center of cell (row, col).
  std::pair<double, double> cell_center(int row, int col) const noexcept;

  /// Cell containing (x, y), or nullopt when outside the extent.
  std::optional<std::pair<int, int>> locate(double x, double y) const noexcept;

  bool contains(double x, double y) const noexcept;

  bool operator==(const BevGridSpec&) const = default;
};

}  // namespace bevlink
