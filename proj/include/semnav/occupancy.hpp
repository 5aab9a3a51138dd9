// Planar occupancy grids: from aggregated depth frames (running average),
// from a field's SDF, and Minkowski dilation. Plus grid line rasterizers.
#pragma once

#include "semnav/capture.hpp"
#include "semnav/field.hpp"

#include <vector>

namespace semnav {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct OccupancyGrid {
  Vec origin;  // World coordinates of the lower-left corner of cell (0, 0).
  double cell_size = 0.1;
  int nx = 0;
  int ny = 0;
  std::vector<double> occupancy;  // Row-major (y outer), values in [0, 1].
  double threshold = 0.5;         // value >= threshold means occupied.

  static OccupancyGrid covering(const Bounds& bounds, double cell_size, double initial = 0.0);

  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < nx && c.y < ny; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * nx + c.x; }
  double value(Cell c) const { return occupancy[index(c)]; }
  // Cells outside the grid count as occupied.
  bool occupied(Cell c) const { return !contains(c) || value(c) >= threshold; }
  bool free(Cell c) const { return !occupied(c); }
  std::size_t free_count() const;

  Cell cell_of(const Vec& p) const;
  Vec center(Cell c) const;
};

// Running-average map over frames in dataset order. Per frame, cells holding
// a ray endpoint observe 1 and cells the ray crosses on its way there (up to
// one cell short of the endpoint) observe 0; each observed cell then moves
// to (1 - alpha) v + alpha obs, except on its first observation, which sets
// v = obs. Cells never observed keep 0.5 and therefore count as occupied.
OccupancyGrid occupancy_from_cloud(const FrameDataset& frames, const Bounds& bounds, double cell_size,
                                   double alpha = 0.2, double threshold = 0.5);

// A cell is occupied (1) iff the field's SDF at any of its four corners is
// below d_min; otherwise 0. Planar fields only.
OccupancyGrid occupancy_from_field(const SpatialField& field, const Bounds& bounds, double cell_size,
                                   double d_min);

// Occupied cells grown by a disk: a cell becomes occupied if the center of an
// occupied cell lies within `radius` of its center. Result values are 0/1.
OccupancyGrid dilate(const OccupancyGrid& grid, double radius);

// Classic integer Bresenham line between two cells, endpoints included.
std::vector<Cell> bresenham_line(Cell a, Cell b);

// Every cell the segment a-b touches, including both cells (or all four) at
// exact corner crossings. For segments between cell centers this is a
// superset of bresenham_line.
std::vector<Cell> supercover_line(const OccupancyGrid& grid, const Vec& a, const Vec& b);

// True when every cell touched by segment a-b is free.
bool line_of_sight(const OccupancyGrid& grid, const Vec& a, const Vec& b);

}  // namespace semnav
