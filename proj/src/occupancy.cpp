#include "semnav/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace semnav {

namespace {

void require_planar(int dimension, const char* op) {
  if (dimension != 2) throw std::invalid_argument(std::string(op) + ": occupancy grids are planar");
}

}  // namespace

OccupancyGrid OccupancyGrid::covering(const Bounds& bounds, double cell_size, double initial) {
  require_planar(static_cast<int>(bounds.lo.size()), "OccupancyGrid");
  if (!(cell_size > 0.0)) throw std::invalid_argument("OccupancyGrid: cell size must be positive");
  OccupancyGrid g;
  g.origin = bounds.lo;
  g.cell_size = cell_size;
  const Vec extent = bounds.extent();
  g.nx = std::max(1, static_cast<int>(std::ceil(extent[0] / cell_size - 1e-9)));
  g.ny = std::max(1, static_cast<int>(std::ceil(extent[1] / cell_size - 1e-9)));
  g.occupancy.assign(static_cast<std::size_t>(g.nx) * g.ny, initial);
  return g;
}

std::size_t OccupancyGrid::free_count() const {
  return static_cast<std::size_t>(
      std::count_if(occupancy.begin(), occupancy.end(), [&](double v) { return v < threshold; }));
}

Cell OccupancyGrid::cell_of(const Vec& p) const {
  return Cell{static_cast<int>(std::floor((p[0] - origin[0]) / cell_size)),
              static_cast<int>(std::floor((p[1] - origin[1]) / cell_size))};
}

Vec OccupancyGrid::center(Cell c) const {
  Vec p(2);
  p << origin[0] + (c.x + 0.5) * cell_size, origin[1] + (c.y + 0.5) * cell_size;
  return p;
}

OccupancyGrid occupancy_from_cloud(const FrameDataset& frames, const Bounds& bounds, double cell_size,
                                   double alpha, double threshold) {
  require_planar(frames.dimension, "occupancy_from_cloud");
  if (frames.frames.empty()) throw std::invalid_argument("occupancy_from_cloud: no frames");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("occupancy_from_cloud: alpha must lie in (0, 1]");
  OccupancyGrid g = OccupancyGrid::covering(bounds, cell_size, 0.5);
  g.threshold = threshold;
  std::vector<bool> seen(g.occupancy.size(), false);
  std::vector<std::int8_t> obs(g.occupancy.size());
  for (const Frame& f : frames.frames) {
    std::fill(obs.begin(), obs.end(), std::int8_t{-1});
    std::vector<Cell> hits;
    for (int px = 0; px < f.pixel_count(); ++px) {
      const Vec dir = f.ray_direction(px);
      const bool hit = f.valid(px);
      const double depth = hit ? f.depth[static_cast<std::size_t>(px)] : f.intrinsics.max_range;
      const double reach = hit ? std::max(0.0, depth - cell_size) : depth;
      for (const Cell c : supercover_line(g, f.pose.position, f.pose.position + reach * dir)) {
        if (g.contains(c)) obs[g.index(c)] = 0;
      }
      if (hit) hits.push_back(g.cell_of(f.pose.position + depth * dir));
    }
    for (const Cell c : hits) {
      if (g.contains(c)) obs[g.index(c)] = 1;
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs[i] < 0) continue;
      if (!seen[i]) {
        g.occupancy[i] = obs[i];
        seen[i] = true;
      } else {
        g.occupancy[i] = (1.0 - alpha) * g.occupancy[i] + alpha * obs[i];
      }
    }
  }
  return g;
}

OccupancyGrid occupancy_from_field(const SpatialField& field, const Bounds& bounds, double cell_size,
                                   double d_min) {
  require_planar(field.input_dim(), "occupancy_from_field");
  OccupancyGrid g = OccupancyGrid::covering(bounds, cell_size);
  const int cx = g.nx + 1;
  const int cy = g.ny + 1;
  ag::Matrix corners(static_cast<Eigen::Index>(cx) * cy, 2);
  for (int y = 0; y < cy; ++y) {
    for (int x = 0; x < cx; ++x) {
      corners.row(static_cast<Eigen::Index>(y) * cx + x) << g.origin[0] + x * cell_size,
          g.origin[1] + y * cell_size;
    }
  }
  const Eigen::VectorXd sdf = query_batch(field, corners).sdf;
  auto at = [&](int x, int y) { return sdf[static_cast<Eigen::Index>(y) * cx + x]; };
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      const double m = std::min({at(x, y), at(x + 1, y), at(x, y + 1), at(x + 1, y + 1)});
      g.occupancy[g.index({x, y})] = m < d_min ? 1.0 : 0.0;
    }
  }
  return g;
}

OccupancyGrid dilate(const OccupancyGrid& grid, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("dilate: radius must be non-negative");
  const int r = static_cast<int>(std::floor(radius / grid.cell_size));
  std::vector<Cell> stencil;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (std::hypot(dx, dy) * grid.cell_size <= radius + 1e-12) stencil.push_back({dx, dy});
    }
  }
  OccupancyGrid out = grid;
  std::fill(out.occupancy.begin(), out.occupancy.end(), 0.0);
  for (int y = 0; y < grid.ny; ++y) {
    for (int x = 0; x < grid.nx; ++x) {
      if (!grid.occupied({x, y})) continue;
      for (const Cell d : stencil) {
        const Cell c{x + d.x, y + d.y};
        if (out.contains(c)) out.occupancy[out.index(c)] = 1.0;
      }
    }
  }
  return out;
}

std::vector<Cell> bresenham_line(Cell a, Cell b) {
  std::vector<Cell> out;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Cell c = a;
  while (true) {
    out.push_back(c);
    if (c == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      c.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      c.y += sy;
    }
  }
  return out;
}

std::vector<Cell> supercover_line(const OccupancyGrid& grid, const Vec& a, const Vec& b) {
  const double ux = (a[0] - grid.origin[0]) / grid.cell_size;
  const double uy = (a[1] - grid.origin[1]) / grid.cell_size;
  const double dx = (b[0] - a[0]) / grid.cell_size;
  const double dy = (b[1] - a[1]) / grid.cell_size;
  Cell c{static_cast<int>(std::floor(ux)), static_cast<int>(std::floor(uy))};
  const Cell end = grid.cell_of(b);
  const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Parameter t in [0, 1] at which the segment crosses the next vertical /
  // horizontal grid line, and the increment between successive crossings.
  double tx = sx > 0 ? (c.x + 1 - ux) / dx : (sx < 0 ? (c.x - ux) / dx : inf);
  double ty = sy > 0 ? (c.y + 1 - uy) / dy : (sy < 0 ? (c.y - uy) / dy : inf);
  const double step_x = sx != 0 ? 1.0 / std::abs(dx) : inf;
  const double step_y = sy != 0 ? 1.0 / std::abs(dy) : inf;
  std::vector<Cell> out{c};
  const int limit = std::abs(end.x - c.x) + std::abs(end.y - c.y) + 2;
  for (int i = 0; i < 2 * limit && !(c == end); ++i) {
    constexpr double tie = 1e-12;
    if (std::abs(tx - ty) <= tie) {
      if (tx > 1.0) break;
      out.push_back({c.x + sx, c.y});
      out.push_back({c.x, c.y + sy});
      c.x += sx;
      c.y += sy;
      tx += step_x;
      ty += step_y;
    } else if (tx < ty) {
      if (tx > 1.0) break;
      c.x += sx;
      tx += step_x;
    } else {
      if (ty > 1.0) break;
      c.y += sy;
      ty += step_y;
    }
    out.push_back(c);
  }
  return out;
}

bool line_of_sight(const OccupancyGrid& grid, const Vec& a, const Vec& b) {
  const auto cells = supercover_line(grid, a, b);
  return std::all_of(cells.begin(), cells.end(), [&](Cell c) { return grid.free(c); });
}

}  // namespace semnav
