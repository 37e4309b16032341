#pragma once

/// Structured cell-centered grid with rectangular obstacle masking.
/// Solid cells carry no degrees of freedom; fluid cells are enumerated by a
/// dense active index used for every field vector in the library.

#include <span>
#include <utility>
#include <vector>

#include "oedsteer/types.hpp"

namespace oedsteer {

struct RegionRect {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;

  bool contains(double x, double y) const {
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
  }
  bool valid() const { return xmin < xmax && ymin < ymax; }
};

class Grid {
 public:
  Grid(int nx, int ny, double width, double height, double x0, double y0,
       std::span<const RegionRect> obstacles);
  /// Grid with an explicit solid mask (row-major, size nx*ny); used when
  /// loading fields or winds whose mask came from a file.
  Grid(int nx, int ny, double width, double height, double x0, double y0,
       std::vector<std::uint8_t> solid_mask);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double width() const { return nx_ * dx_; }
  double height() const { return ny_ * dy_; }
  double cellArea() const { return dx_ * dy_; }

  Index numActive() const { return static_cast<Index>(cells_.size()); }

  bool isSolid(int i, int j) const { return solid_[flat(i, j)] != 0; }
  bool inBounds(int i, int j) const { return i >= 0 && i < nx_ && j >= 0 && j < ny_; }

  /// Active (fluid) index of cell (i, j), or -1 for solid cells.
  Index activeIndex(int i, int j) const { return active_[flat(i, j)]; }
  std::pair<int, int> cellOf(Index active) const { return cells_[static_cast<size_t>(active)]; }

  double centerX(int i) const { return x0_ + (i + 0.5) * dx_; }
  double centerY(int j) const { return y0_ + (j + 0.5) * dy_; }

  /// Cell containing the point, clamped to the grid box.
  std::pair<int, int> cellAt(double x, double y) const;

  /// Active cells whose centers lie in the region.
  std::vector<Index> activeCellsIn(const RegionRect& region) const;

  /// Lumped mass diagonal (cell areas), one entry per active cell.
  Vector massDiag() const { return Vector::Constant(numActive(), cellArea()); }

 private:
  Index flat(int i, int j) const { return static_cast<Index>(j) * nx_ + i; }

  int nx_, ny_;
  double dx_, dy_, x0_, y0_;
  std::vector<std::uint8_t> solid_;
  std::vector<Index> active_;
  std::vector<std::pair<int, int>> cells_;
};

Grid build_grid(int nx, int ny, double width, double height,
                std::span<const RegionRect> obstacles = {}, double x0 = 0.0, double y0 = 0.0);

}  // namespace oedsteer
