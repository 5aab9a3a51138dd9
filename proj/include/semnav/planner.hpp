// Grid planning (BFS + line-of-sight smoothing) and gradient-based waypoint
// optimization over a spatial field.
#pragma once

#include "semnav/field.hpp"
#include "semnav/occupancy.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semnav {

enum class PlanStatus { Ok, NoPath, Infeasible };
const char* to_string(PlanStatus status);

struct Path {
  std::vector<Vec> waypoints;
  std::vector<double> sdf;       // Field SDF per waypoint, when annotated.
  std::vector<double> semantic;  // Query similarity per waypoint, when annotated.

  double length() const;
};

double path_length(std::span<const Vec> points);

// Fills Path::sdf and, when a query is given, Path::semantic.
void annotate(Path& path, const SpatialField& field, const Eigen::VectorXd* query = nullptr);

// ---- grid planner -----------------------------------------------------------

// Free cell whose center is most similar to q; the first in row-major order
// wins ties. Throws if the grid has no free cell.
Cell select_goal_cell(const SpatialField& field, const OccupancyGrid& grid, const Eigen::VectorXd& q);

// Fewest-hop 8-connected path. Diagonal moves need both orthogonally adjacent
// cells free. Throws if start or goal is occupied; nullopt when disconnected.
std::optional<std::vector<Cell>> bfs_path(const OccupancyGrid& grid, Cell start, Cell goal);

enum class EdgeCost { Unit, Octile };

struct GridSearchResult {
  std::vector<Cell> cells;
  double cost = 0.0;  // Hops (Unit) or cell-size units (Octile).
};

// Same connectivity as bfs_path with Dijkstra ordering.
std::optional<GridSearchResult> dijkstra_path(const OccupancyGrid& grid, Cell start, Cell goal, EdgeCost cost);

// Greedy farthest-visible simplification: from each kept point, jump to the
// farthest later point with line of sight. Endpoints are always kept.
std::vector<Vec> los_simplify(const OccupancyGrid& grid, const std::vector<Vec>& points);
std::vector<Cell> los_simplify(const OccupancyGrid& grid, const std::vector<Cell>& cells);

struct GridPlanResult {
  PlanStatus status = PlanStatus::NoPath;
  Path path;
  Cell start_cell;
  Cell goal_cell;
};

// Plans from the exact start to the exact goal point.
GridPlanResult grid_plan(const OccupancyGrid& grid, const Vec& start, const Vec& goal);
// Plans to the center of select_goal_cell(field, grid, query).
GridPlanResult grid_plan(const OccupancyGrid& grid, const SpatialField& field, const Vec& start,
                         const Eigen::VectorXd& query);

// ---- gradient planner ------------------------------------------------------

struct PlannerParams {
  double d_min = 0.3;
  // Kept on top of d_min whenever a planner reads a learned field.
  double clearance_margin = 0.1;
  int n_points = 32;
  int n_targets = 512;
  double lambda_o = 1.0;
  double lambda_n = 1.0;
  double lambda_s = 15.0;
  double lambda_d = 25.0;
  double lr = 1e-2;
  int max_iters = 300;
  double convergence_tol = 1e-4;
  int convergence_window = 10;
  double init_cell_size = 0.1;   // Grid used to build the initial path.
  double feasibility_tol = 0.0;  // Accepted iterates keep SDF >= d_min - tol.
  double dense_step = 0.02;      // Spacing of the final along-path SDF check.
  std::uint64_t seed = 1;

  double clearance() const { return d_min + clearance_margin; }
  void validate() const;
};

// Sum_i clamp(d_min - sdf_i, 0, inf).
ag::Tensor loss_obstacle(const ag::Tensor& sdf, double d_min);
// Sum over interior i of | |p_i - p_{i+1}| - |p_i - p_{i-1}| |.
ag::Tensor loss_spacing(const ag::Tensor& points);
// -(sem_T . q) for a 1 x E semantic row.
ag::Tensor loss_semantic_goal(const ag::Tensor& sem_goal, const Eigen::VectorXd& q);
// Sum_i |p_i - p_{i+1}|; coincident points contribute a zero gradient.
ag::Tensor loss_length(const ag::Tensor& points);

struct LossBreakdown {
  double obstacle = 0.0;
  double spacing = 0.0;
  double semantic = 0.0;
  double length = 0.0;
  double total = 0.0;
};

struct PathObjective {
  ag::Tensor total;
  LossBreakdown terms;
  Eigen::VectorXd sdf;
};

// Weighted sum of the four losses for an N x 2 waypoint tensor, with the
// obstacle hinge at params.clearance(). The semantic term is dropped when
// query is null. With a query, the last waypoint enters the spacing and
// length terms as a constant, so only the semantic and obstacle terms move it.
PathObjective path_objective(const SpatialField& field, const ag::Tensor& points, const Eigen::VectorXd* query,
                             const PlannerParams& params);

// Arc-length resampling to n points that keeps every vertex of the input
// polyline; extra points are spread over segments in proportion to their
// length. Falls back to plain arc-length sampling if the vertices alone
// exceed n.
std::vector<Vec> resample_path(const std::vector<Vec>& points, int n);

struct GradientPlanRequest {
  Vec start;
  std::optional<Eigen::VectorXd> query;  // Semantic goal; the end point floats.
  std::optional<Vec> goal;               // Fixed goal; the end point is pinned.
  std::optional<Path> init;
  Bounds bounds;  // Region for the initialization grid and target sampling.
};

struct GradientPlanResult {
  PlanStatus status = PlanStatus::NoPath;
  Path path;
  int iterations = 0;
  bool converged = false;
  int best_iteration = 0;  // 0 is the initial path.
  LossBreakdown initial;
  LossBreakdown final_terms;
  double min_dense_sdf = 0.0;  // Smallest field SDF along the returned path.
};

// Adam on every waypoint but the start (and the goal when pinned). Below,
// c = params.clearance(); it replaces d_min in the obstacle loss, the
// initialization grid and target seeding. An iterate is accepted when its
// movable waypoints keep field SDF >= b, where
// b = min(c - feasibility_tol, smallest such SDF on the initial path).
// Returns the lowest-loss accepted iterate whose densely sampled segments
// pass the same bound, falling back to earlier accepted iterates. When none
// passes, the lowest-loss iterate is returned with status Infeasible; a
// returned path that stays below c - feasibility_tol is also Infeasible.
GradientPlanResult gradient_plan(const SpatialField& field, const GradientPlanRequest& request,
                                 const PlannerParams& params);

// Waypoint records: index, coordinates, and sdf/semantic when annotated.
nlohmann::json path_to_json(const Path& path);
Path path_from_json(const nlohmann::json& j);

}  // namespace semnav
