#include "oedsteer/grid.hpp"

#include <algorithm>
#include <cmath>

namespace oedsteer {

Grid::Grid(int nx, int ny, double width, double height, double x0, double y0,
           std::span<const RegionRect> obstacles)
    : nx_(nx), ny_(ny), dx_(width / nx), dy_(height / ny), x0_(x0), y0_(y0) {
  require(nx >= 4 && ny >= 4, "Grid: need at least 4x4 cells");
  require(width > 0 && height > 0, "Grid: extent must be positive");
  for (const auto& r : obstacles) require(r.valid(), "Grid: malformed obstacle rectangle");

  solid_.assign(static_cast<size_t>(nx_) * ny_, 0);
  active_.assign(static_cast<size_t>(nx_) * ny_, -1);
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const double cx = centerX(i);
      const double cy = centerY(j);
      for (const auto& r : obstacles) {
        if (r.contains(cx, cy)) {
          solid_[flat(i, j)] = 1;
          break;
        }
      }
    }
  }
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (!solid_[flat(i, j)]) {
        active_[flat(i, j)] = static_cast<Index>(cells_.size());
        cells_.emplace_back(i, j);
      }
  if (cells_.empty()) throw DomainError("Grid: every cell is masked solid");
}

Grid::Grid(int nx, int ny, double width, double height, double x0, double y0,
           std::vector<std::uint8_t> solid_mask)
    : nx_(nx), ny_(ny), dx_(width / nx), dy_(height / ny), x0_(x0), y0_(y0),
      solid_(std::move(solid_mask)) {
  require(nx >= 4 && ny >= 4, "Grid: need at least 4x4 cells");
  require(width > 0 && height > 0, "Grid: extent must be positive");
  require(solid_.size() == static_cast<size_t>(nx_) * ny_, "Grid: mask size mismatch");
  active_.assign(solid_.size(), -1);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (!solid_[flat(i, j)]) {
        active_[flat(i, j)] = static_cast<Index>(cells_.size());
        cells_.emplace_back(i, j);
      }
  if (cells_.empty()) throw DomainError("Grid: every cell is masked solid");
}

std::pair<int, int> Grid::cellAt(double x, double y) const {
  int i = static_cast<int>(std::floor((x - x0_) / dx_));
  int j = static_cast<int>(std::floor((y - y0_) / dy_));
  i = std::clamp(i, 0, nx_ - 1);
  j = std::clamp(j, 0, ny_ - 1);
  return {i, j};
}

std::vector<Index> Grid::activeCellsIn(const RegionRect& region) const {
  std::vector<Index> out;
  for (Index a = 0; a < numActive(); ++a) {
    auto [i, j] = cellOf(a);
    if (region.contains(centerX(i), centerY(j))) out.push_back(a);
  }
  return out;
}

Grid build_grid(int nx, int ny, double width, double height,
                std::span<const RegionRect> obstacles, double x0, double y0) {
  return Grid(nx, ny, width, height, x0, y0, obstacles);
}

}  // namespace oedsteer
