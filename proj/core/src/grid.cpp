#include "bevlink/grid.hpp"

#include <cmath>
#include <sstream>

#include "bevlink/errors.hpp"

namespace bevlink {

BevGridSpec BevGridSpec::centered(double half_extent_m, int cells) {
  BevGridSpec g{-half_extent_m, half_extent_m, -half_extent_m, half_extent_m, cells};
  g.validate();
  return g;
}

void BevGridSpec::validate() const {
  if (size <= 0) throw ValidationError("grid size must be positive");
  const double wx = x_max - x_min;
  const double wy = y_max - y_min;
  if (!(wx > 0.0) || !(wy > 0.0)) {
    std::ostringstream os;
    os << "grid extent must be positive (x: " << x_min << ".." << x_max << ", y: " << y_min << ".."
       << y_max << ")";
    throw ValidationError(os.str());
  }
  if (std::abs(wx - wy) > 1e-9 * std::max(wx, wy)) throw ValidationError("grid must be square");
}

std::pair<double, double> BevGridSpec::cell_center(int row, int col) const noexcept {
  const double c = cell_size();
  return {x_min + (col + 0.5) * c, y_min + (row + 0.5) * c};
}

bool BevGridSpec::contains(double x, double y) const noexcept {
  return x >= x_min && x < x_max && y >= y_min && y < y_max;
}

std::optional<std::pair<int, int>> BevGridSpec::locate(double x, double y) const noexcept {
  if (!contains(x, y)) return std::nullopt;
  const double c = cell_size();
  int col = static_cast<int>(std::floor((x - x_min) / c));
  int row = static_cast<int>(std::floor((y - y_min) / c));
  if (col >= size) col = size - 1;
  if (row >= size) row = size - 1;
  return std::make_pair(row, col);
}

}  // namespace bevlink
