#include "semnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>

namespace semnav {

namespace {

constexpr Cell kSteps[8] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

// Calls visit(neighbor, is_diagonal) for every move allowed from c.
template <typename Visit>
void for_each_move(const OccupancyGrid& grid, Cell c, Visit&& visit) {
  for (const Cell d : kSteps) {
    const Cell n{c.x + d.x, c.y + d.y};
    if (!grid.free(n)) continue;
    const bool diagonal = d.x != 0 && d.y != 0;
    if (diagonal && (!grid.free({c.x + d.x, c.y}) || !grid.free({c.x, c.y + d.y}))) continue;
    visit(n, diagonal);
  }
}

void require_free(const OccupancyGrid& grid, Cell c, const char* what) {
  if (!grid.free(c)) throw std::invalid_argument(std::string("grid search: ") + what + " cell is occupied");
}

std::vector<Cell> unwind(const OccupancyGrid& grid, const std::vector<int>& parent, Cell goal) {
  std::vector<Cell> out;
  for (int i = static_cast<int>(grid.index(goal)); i >= 0; i = parent[static_cast<std::size_t>(i)]) {
    out.push_back({i % grid.nx, i / grid.nx});
  }
  std::reverse(out.begin(), out.end());
  return out;
}

ag::Matrix to_matrix(const std::vector<Vec>& pts) {
  ag::Matrix m(static_cast<Eigen::Index>(pts.size()), pts.empty() ? 0 : pts.front().size());
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

std::vector<Vec> to_points(const ag::Matrix& m) {
  std::vector<Vec> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

GridPlanResult plan_cells(const OccupancyGrid& grid, const Vec& start, Cell goal_cell, const Vec& goal) {
  GridPlanResult r;
  r.start_cell = grid.cell_of(start);
  r.goal_cell = goal_cell;
  const auto cells = bfs_path(grid, r.start_cell, goal_cell);
  if (!cells) return r;
  std::vector<Vec> raw{start};
  for (const Cell c : *cells) raw.push_back(grid.center(c));
  raw.push_back(goal);
  r.path.waypoints = los_simplify(grid, raw);
  r.status = PlanStatus::Ok;
  return r;
}

// Field SDF at points spaced at most `step` apart along every segment; the
// first and last segments may be given a relaxed bound.
struct DenseCheck {
  double min_sdf = std::numeric_limits<double>::infinity();
  bool passed = true;
};

DenseCheck dense_check(const SpatialField& field, const std::vector<Vec>& pts, double step, double bound,
                       double first_bound, double last_bound) {
  std::vector<Vec> samples;
  std::vector<double> bounds;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double len = (pts[s + 1] - pts[s]).norm();
    const int k = std::max(1, static_cast<int>(std::ceil(len / step)));
    double b = bound;
    if (s == 0) b = std::min(b, first_bound);
    if (s + 2 == pts.size()) b = std::min(b, last_bound);
    for (int i = 0; i <= k; ++i) {
      samples.push_back(pts[s] + (pts[s + 1] - pts[s]) * (static_cast<double>(i) / k));
      bounds.push_back(b);
    }
  }
  DenseCheck out;
  if (samples.empty()) return out;
  const Eigen::VectorXd sdf = query_batch(field, to_matrix(samples)).sdf;
  for (Eigen::Index i = 0; i < sdf.size(); ++i) {
    out.min_sdf = std::min(out.min_sdf, sdf[i]);
    if (sdf[i] < bounds[static_cast<std::size_t>(i)]) out.passed = false;
  }
  return out;
}

}  // namespace

const char* to_string(PlanStatus status) {
  switch (status) {
    case PlanStatus::Ok:
      return "ok";
    case PlanStatus::NoPath:
      return "no_path";
    case PlanStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

double path_length(std::span<const Vec> points) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) total += (points[i + 1] - points[i]).norm();
  return total;
}

double Path::length() const { return path_length(waypoints); }

void annotate(Path& path, const SpatialField& field, const Eigen::VectorXd* query) {
  if (path.waypoints.empty()) return;
  const auto out = query_batch(field, to_matrix(path.waypoints));
  path.sdf.assign(out.sdf.data(), out.sdf.data() + out.sdf.size());
  path.semantic.clear();
  if (query) {
    const Eigen::VectorXd sim = out.sem * *query;
    path.semantic.assign(sim.data(), sim.data() + sim.size());
  }
}

Cell select_goal_cell(const SpatialField& field, const OccupancyGrid& grid, const Eigen::VectorXd& q) {
  if (q.size() != field.embedding_dim()) throw std::invalid_argument("select_goal_cell: query dimension mismatch");
  std::vector<Cell> cells;
  std::vector<Vec> centers;
  for (int y = 0; y < grid.ny; ++y) {
    for (int x = 0; x < grid.nx; ++x) {
      if (!grid.free({x, y})) continue;
      cells.push_back({x, y});
      centers.push_back(grid.center({x, y}));
    }
  }
  if (cells.empty()) throw std::runtime_error("select_goal_cell: no free cell");
  const Eigen::VectorXd sim = query_batch(field, to_matrix(centers)).sem * q;
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (sim[static_cast<Eigen::Index>(i)] > sim[static_cast<Eigen::Index>(best)]) best = i;
  }
  return cells[best];
}

std::optional<std::vector<Cell>> bfs_path(const OccupancyGrid& grid, Cell start, Cell goal) {
  require_free(grid, start, "start");
  require_free(grid, goal, "goal");
  std::vector<int> parent(grid.occupancy.size(), -2);
  std::deque<Cell> frontier{start};
  parent[grid.index(start)] = -1;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    if (c == goal) return unwind(grid, parent, goal);
    for_each_move(grid, c, [&](Cell n, bool) {
      int& p = parent[grid.index(n)];
      if (p != -2) return;
      p = static_cast<int>(grid.index(c));
      frontier.push_back(n);
    });
  }
  return std::nullopt;
}

std::optional<GridSearchResult> dijkstra_path(const OccupancyGrid& grid, Cell start, Cell goal, EdgeCost cost) {
  require_free(grid, start, "start");
  require_free(grid, goal, "goal");
  const double diag = cost == EdgeCost::Octile ? std::sqrt(2.0) : 1.0;
  std::vector<double> dist(grid.occupancy.size(), std::numeric_limits<double>::infinity());
  std::vector<int> parent(grid.occupancy.size(), -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[grid.index(start)] = 0.0;
  open.push({0.0, grid.index(start)});
  while (!open.empty()) {
    const auto [d, i] = open.top();
    open.pop();
    if (d > dist[i]) continue;
    const Cell c{static_cast<int>(i) % grid.nx, static_cast<int>(i) / grid.nx};
    if (c == goal) return GridSearchResult{unwind(grid, parent, goal), d};
    for_each_move(grid, c, [&](Cell n, bool diagonal) {
      const double nd = d + (diagonal ? diag : 1.0);
      const std::size_t j = grid.index(n);
      if (nd < dist[j]) {
        dist[j] = nd;
        parent[j] = static_cast<int>(i);
        open.push({nd, j});
      }
    });
  }
  return std::nullopt;
}

std::vector<Vec> los_simplify(const OccupancyGrid& grid, const std::vector<Vec>& points) {
  if (points.size() <= 2) return points;
  std::vector<Vec> out{points.front()};
  std::size_t i = 0;
  while (i + 1 < points.size()) {
    std::size_t j = points.size() - 1;
    while (j > i + 1 && !line_of_sight(grid, points[i], points[j])) --j;
    out.push_back(points[j]);
    i = j;
  }
  return out;
}

std::vector<Cell> los_simplify(const OccupancyGrid& grid, const std::vector<Cell>& cells) {
  std::vector<Vec> pts;
  for (const Cell c : cells) pts.push_back(grid.center(c));
  std::vector<Cell> out;
  for (const Vec& p : los_simplify(grid, pts)) out.push_back(grid.cell_of(p));
  return out;
}

GridPlanResult grid_plan(const OccupancyGrid& grid, const Vec& start, const Vec& goal) {
  return plan_cells(grid, start, grid.cell_of(goal), goal);
}

GridPlanResult grid_plan(const OccupancyGrid& grid, const SpatialField& field, const Vec& start,
                         const Eigen::VectorXd& query) {
  const Cell goal = select_goal_cell(field, grid, query);
  return plan_cells(grid, start, goal, grid.center(goal));
}

void PlannerParams::validate() const {
  if (!(d_min > 0.0)) throw std::invalid_argument("planner: d_min must be positive");
  if (n_points < 2) throw std::invalid_argument("planner: need at least two waypoints");
  if (n_targets < 0) throw std::invalid_argument("planner: n_targets must be non-negative");
  if (lambda_o < 0 || lambda_n < 0 || lambda_s < 0 || lambda_d < 0) {
    throw std::invalid_argument("planner: loss weights must be non-negative");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("planner: lr must be positive");
  if (max_iters < 0 || convergence_window < 1) throw std::invalid_argument("planner: bad iteration limits");
  if (!(init_cell_size > 0.0) || !(dense_step > 0.0)) throw std::invalid_argument("planner: bad resolution");
  if (!(clearance_margin >= 0.0)) throw std::invalid_argument("planner: clearance_margin must be non-negative");
  if (!(feasibility_tol >= 0.0)) throw std::invalid_argument("planner: feasibility_tol must be non-negative");
}

ag::Tensor loss_obstacle(const ag::Tensor& sdf, double d_min) {
  return ag::sum(ag::clamp(ag::add_scalar(ag::neg(sdf), d_min), 0.0));
}

ag::Tensor loss_spacing(const ag::Tensor& points) {
  const auto n = points.rows();
  if (n < 3) return ag::Tensor::scalar(0.0);
  const ag::Tensor seg =
      ag::l2norm(ag::sub(ag::slice_rows(points, 1, n - 1), ag::slice_rows(points, 0, n - 1)));
  return ag::sum(ag::abs(ag::sub(ag::slice_rows(seg, 1, n - 2), ag::slice_rows(seg, 0, n - 2))));
}

ag::Tensor loss_semantic_goal(const ag::Tensor& sem_goal, const Eigen::VectorXd& q) {
  if (sem_goal.rows() != 1 || sem_goal.cols() != q.size()) {
    throw std::invalid_argument("loss_semantic_goal: expects one row matching the query");
  }
  return ag::neg(ag::sum(ag::mul(sem_goal, ag::Tensor::constant(q.transpose()))));
}

ag::Tensor loss_length(const ag::Tensor& points) {
  const auto n = points.rows();
  if (n < 2) return ag::Tensor::scalar(0.0);
  return ag::sum(ag::l2norm(ag::sub(ag::slice_rows(points, 1, n - 1), ag::slice_rows(points, 0, n - 1))));
}

PathObjective path_objective(const SpatialField& field, const ag::Tensor& points, const Eigen::VectorXd* query,
                             const PlannerParams& params) {
  const FieldOutput out = field.evaluate(points);
  PathObjective obj;
  const ag::Tensor lo = loss_obstacle(out.sdf, params.clearance());
  ag::Tensor shape = points;
  if (query && points.rows() > 1) {
    const auto n = points.rows();
    const ag::Tensor parts[] = {ag::slice_rows(points, 0, n - 1),
                                ag::Tensor::constant(points.value().bottomRows(1))};
    shape = ag::concat_rows(parts);
  }
  const ag::Tensor ln = loss_spacing(shape);
  const ag::Tensor ld = loss_length(shape);
  obj.terms.obstacle = lo.item();
  obj.terms.spacing = ln.item();
  obj.terms.length = ld.item();
  obj.total = ag::add(ag::add(ag::scale(lo, params.lambda_o), ag::scale(ln, params.lambda_n)),
                      ag::scale(ld, params.lambda_d));
  if (query) {
    const ag::Tensor ls = loss_semantic_goal(ag::slice_rows(out.sem, points.rows() - 1, 1), *query);
    obj.terms.semantic = ls.item();
    obj.total = ag::add(obj.total, ag::scale(ls, params.lambda_s));
  }
  obj.terms.total = obj.total.item();
  obj.sdf = out.sdf.value().col(0);
  return obj;
}

std::vector<Vec> resample_path(const std::vector<Vec>& points, int n) {
  if (points.size() < 2) throw std::invalid_argument("resample_path: need at least two points");
  if (n < 2) throw std::invalid_argument("resample_path: need at least two output points");
  const std::size_t segs = points.size() - 1;
  std::vector<double> len(segs);
  double total = 0.0;
  for (std::size_t s = 0; s < segs; ++s) {
    len[s] = (points[s + 1] - points[s]).norm();
    total += len[s];
  }
  const auto count = static_cast<std::size_t>(n);
  if (points.size() > count || total == 0.0) {
    std::vector<Vec> out;
    std::size_t s = 0;
    double before = 0.0;  // Arc length at the start of segment s.
    for (std::size_t i = 0; i < count; ++i) {
      const double target = total * static_cast<double>(i) / static_cast<double>(count - 1);
      while (s + 1 < segs && before + len[s] < target) before += len[s++];
      const double t = len[s] > 0.0 ? std::clamp((target - before) / len[s], 0.0, 1.0) : 0.0;
      out.push_back(points[s] + t * (points[s + 1] - points[s]));
    }
    out.back() = points.back();
    return out;
  }

  // Largest-remainder split of the extra points over segments.
  const std::size_t extra = count - points.size();
  std::vector<std::size_t> alloc(segs);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t used = 0;
  for (std::size_t s = 0; s < segs; ++s) {
    const double share = static_cast<double>(extra) * len[s] / total;
    alloc[s] = static_cast<std::size_t>(std::floor(share));
    used += alloc[s];
    remainder.push_back({share - static_cast<double>(alloc[s]), s});
  }
  std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < extra; ++k, ++used) ++alloc[remainder[k % segs].second];

  std::vector<Vec> out;
  for (std::size_t s = 0; s < segs; ++s) {
    out.push_back(points[s]);
    for (std::size_t j = 1; j <= alloc[s]; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(alloc[s] + 1);
      out.push_back(points[s] + t * (points[s + 1] - points[s]));
    }
  }
  out.push_back(points.back());
  return out;
}

namespace {

struct Snapshot {
  int iteration = 0;
  ag::Matrix points;
  LossBreakdown terms;
};

// Free target candidates drawn uniformly in the bounds; returns the one most
// similar to q if it beats `incumbent`.
std::optional<Vec> best_target(const SpatialField& field, const OccupancyGrid& grid, const Bounds& bounds,
                               const Eigen::VectorXd& q, const PlannerParams& params, double incumbent) {
  if (params.n_targets == 0) return std::nullopt;
  Rng rng(params.seed);
  std::uniform_real_distribution<double> ux(bounds.lo[0], bounds.hi[0]);
  std::uniform_real_distribution<double> uy(bounds.lo[1], bounds.hi[1]);
  std::vector<Vec> accepted;
  std::vector<double> scores;
  for (int round = 0; round < 20 && static_cast<int>(accepted.size()) < params.n_targets; ++round) {
    std::vector<Vec> cand;
    for (int i = 0; i < params.n_targets; ++i) {
      Vec p(2);
      p[0] = ux(rng);
      p[1] = uy(rng);
      if (grid.free(grid.cell_of(p))) cand.push_back(p);
    }
    if (cand.empty()) continue;
    const auto out = query_batch(field, to_matrix(cand));
    const Eigen::VectorXd sim = out.sem * q;
    for (std::size_t i = 0; i < cand.size() && static_cast<int>(accepted.size()) < params.n_targets; ++i) {
      if (out.sdf[static_cast<Eigen::Index>(i)] < params.clearance()) continue;
      accepted.push_back(cand[i]);
      scores.push_back(sim[static_cast<Eigen::Index>(i)]);
    }
  }
  std::optional<Vec> best;
  double best_score = incumbent;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    if (scores[i] > best_score) {
      best_score = scores[i];
      best = accepted[i];
    }
  }
  return best;
}

}  // namespace

GradientPlanResult gradient_plan(const SpatialField& field, const GradientPlanRequest& request,
                                 const PlannerParams& params) {
  params.validate();
  if (field.input_dim() != 2) throw std::invalid_argument("gradient_plan: planar fields only");
  if (!request.query && !request.goal) throw std::invalid_argument("gradient_plan: needs a query or a goal");
  if (request.query && request.query->size() != field.embedding_dim()) {
    throw std::invalid_argument("gradient_plan: query dimension mismatch");
  }
  const Eigen::VectorXd* q = request.query ? &*request.query : nullptr;
  const bool pinned = request.goal.has_value();
  GradientPlanResult result;

  std::vector<Vec> init;
  if (request.init) {
    init = request.init->waypoints;
    if (init.size() < 2) throw std::invalid_argument("gradient_plan: initial path needs two waypoints");
  } else {
    OccupancyGrid grid = occupancy_from_field(field, request.bounds, params.init_cell_size, params.clearance());
    if (grid.occupied(grid.cell_of(request.start)) || (pinned && grid.occupied(grid.cell_of(*request.goal)))) {
      grid = occupancy_from_field(field, request.bounds, params.init_cell_size, params.d_min);
    }
    GridPlanResult r = pinned ? grid_plan(grid, request.start, *request.goal)
                              : grid_plan(grid, field, request.start, *q);
    if (r.status != PlanStatus::Ok) return result;
    if (!pinned) {
      const double incumbent = query(field, grid.center(r.goal_cell)).sem.dot(*q);
      if (const auto target = best_target(field, grid, request.bounds, *q, params, incumbent)) {
        GridPlanResult retarget = grid_plan(grid, request.start, *target);
        if (retarget.status == PlanStatus::Ok) r = std::move(retarget);
      }
    }
    init = r.path.waypoints;
  }
  init.front() = request.start;
  if (pinned) init.back() = *request.goal;
  const std::vector<Vec> pts = resample_path(init, params.n_points);
  const auto n = static_cast<Eigen::Index>(pts.size());
  const ag::Matrix all = to_matrix(pts);

  const Eigen::Index first = 1;
  const Eigen::Index movable = n - 1 - (pinned ? 1 : 0);
  const ag::Tensor start_row = ag::Tensor::constant(all.topRows(1));
  const ag::Tensor goal_row = ag::Tensor::constant(all.bottomRows(1));
  std::vector<ag::NamedParameter> vars{{"waypoints", ag::Tensor::parameter(all.middleRows(first, movable))}};
  ag::AdamState adam = ag::make_adam_state(vars, ag::AdamOptions{.lr = params.lr});
  auto assemble = [&] {
    std::vector<ag::Tensor> parts{start_row};
    if (movable > 0) parts.push_back(vars[0].tensor);
    if (pinned) parts.push_back(goal_row);
    return ag::concat_rows(parts);
  };
  auto movable_min = [&](const Eigen::VectorXd& sdf) {
    return movable > 0 ? sdf.segment(first, movable).minCoeff() : std::numeric_limits<double>::infinity();
  };

  std::vector<Snapshot> accepted;
  Snapshot overall;
  double overall_loss = std::numeric_limits<double>::infinity();
  double accepted_loss = std::numeric_limits<double>::infinity();
  double bound = params.clearance() - params.feasibility_tol;
  std::vector<double> history;
  for (int it = 0;; ++it) {
    const ag::Tensor p = assemble();
    PathObjective obj = path_objective(field, p, q, params);
    const double loss = obj.terms.total;
    if (!std::isfinite(loss)) throw std::runtime_error("gradient_plan: loss became non-finite");
    if (it == 0) {
      result.initial = obj.terms;
      bound = std::min(bound, movable_min(obj.sdf));
    }
    if (loss < overall_loss) {
      overall_loss = loss;
      overall = {it, p.value(), obj.terms};
    }
    if (movable_min(obj.sdf) >= bound && loss < accepted_loss) {
      accepted_loss = loss;
      accepted.push_back({it, p.value(), obj.terms});
    }
    history.push_back(loss);
    const auto w = static_cast<std::size_t>(params.convergence_window);
    if (history.size() > w && std::abs(history.back() - history[history.size() - 1 - w]) < params.convergence_tol) {
      result.converged = true;
      break;
    }
    if (it == params.max_iters || movable == 0) break;
    ag::zero_grad(vars);
    ag::backward(obj.total);
    ag::adam_step(vars, adam);
    result.iterations = it + 1;
  }

  // Bounds for the fixed end segments cannot exceed the clearance of the
  // fixed endpoints themselves.
  const double start_sdf = query(field, request.start).sdf;
  const double goal_sdf = pinned ? query(field, *request.goal).sdf : bound;
  const Snapshot* chosen = nullptr;
  DenseCheck check;
  for (auto s = accepted.rbegin(); s != accepted.rend(); ++s) {
    check = dense_check(field, to_points(s->points), params.dense_step, bound, start_sdf, goal_sdf);
    if (check.passed) {
      chosen = &*s;
      break;
    }
  }
  if (!chosen) {
    chosen = &overall;
    check = dense_check(field, to_points(overall.points), params.dense_step, bound, start_sdf, goal_sdf);
    result.status = PlanStatus::Infeasible;
  } else {
    result.status = bound < params.clearance() - params.feasibility_tol ? PlanStatus::Infeasible : PlanStatus::Ok;
  }
  result.best_iteration = chosen->iteration;
  result.final_terms = chosen->terms;
  result.min_dense_sdf = check.min_sdf;
  result.path.waypoints = to_points(chosen->points);
  annotate(result.path, field, q);
  return result;
}

nlohmann::json path_to_json(const Path& path) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < path.waypoints.size(); ++i) {
    nlohmann::json w;
    w["index"] = i;
    const char* axes[] = {"x", "y", "z"};
    for (Eigen::Index k = 0; k < path.waypoints[i].size() && k < 3; ++k) w[axes[k]] = path.waypoints[i][k];
    if (i < path.sdf.size()) w["sdf"] = path.sdf[i];
    if (i < path.semantic.size()) w["semantic"] = path.semantic[i];
    out.push_back(std::move(w));
  }
  return out;
}

Path path_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("path: expected an array of waypoints");
  Path path;
  for (const auto& w : j) {
    Vec p(w.contains("z") ? 3 : 2);
    p[0] = w.at("x").get<double>();
    p[1] = w.at("y").get<double>();
    if (p.size() == 3) p[2] = w.at("z").get<double>();
    path.waypoints.push_back(p);
    if (w.contains("sdf")) path.sdf.push_back(w.at("sdf").get<double>());
    if (w.contains("semantic")) path.semantic.push_back(w.at("semantic").get<double>());
  }
  if (path.waypoints.size() < 2) throw std::invalid_argument("path: need at least two waypoints");
  return path;
}

}  // namespace semnav
