#include "semnav/analytic_field.hpp"
#include "semnav/planner.hpp"

#include "grid_cases.hpp"
#include "mock_fields.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace semnav;
using testing::block;
using testing::ConstantField;
using testing::empty_grid;
using testing::random_free;
using testing::random_grid;
using testing::RampField;
using testing::unit;
using testing::v2;

namespace {

Scene disk_scene() {
  Scene s = testing::open_scene(4.0);
  s.obstacles.push_back(make_sphere(v2(2.0, 2.0), 0.5, "disk"));
  return s;
}

AnalyticField field_of(const Scene& s, int dim = 8) { return AnalyticField(s, synth_table(s.labels(), dim, 1)); }

double min_dense_sdf(const Scene& s, const std::vector<Vec>& pts, double step = 0.005) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const int n = std::max(1, static_cast<int>(std::ceil((pts[i + 1] - pts[i]).norm() / step)));
    for (int k = 0; k <= n; ++k) m = std::min(m, analytic_sdf(s, pts[i] + (pts[i + 1] - pts[i]) * (double(k) / n)));
  }
  return m;
}

ag::Matrix rows_of(const std::vector<Vec>& pts) {
  ag::Matrix m(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

}  // namespace

TEST_CASE("bfs on an empty grid takes the diagonal") {
  const OccupancyGrid g = empty_grid(10, 10);
  const auto p = bfs_path(g, {0, 0}, {9, 9});
  REQUIRE(p);
  CHECK(p->size() == 10);
  CHECK(p->front() == Cell{0, 0});
  CHECK(p->back() == Cell{9, 9});
  const auto same = bfs_path(g, {3, 4}, {3, 4});
  REQUIRE(same);
  CHECK(same->size() == 1);
}

TEST_CASE("bfs threads the gap in a wall and reports disconnection") {
  OccupancyGrid g = empty_grid(10, 10);
  block(g, 5, 0, 5, 9);
  g.occupancy[g.index({5, 7})] = 0.0;
  const auto p = bfs_path(g, {0, 0}, {9, 0});
  REQUIRE(p);
  CHECK(std::find(p->begin(), p->end(), Cell{5, 7}) != p->end());
  const auto d = dijkstra_path(g, {0, 0}, {9, 0}, EdgeCost::Unit);
  REQUIRE(d);
  CHECK(static_cast<double>(p->size() - 1) == d->cost);

  g.occupancy[g.index({5, 7})] = 1.0;
  CHECK_FALSE(bfs_path(g, {0, 0}, {9, 0}));
  CHECK_FALSE(dijkstra_path(g, {0, 0}, {9, 0}, EdgeCost::Octile));
  CHECK_THROWS(bfs_path(g, {5, 3}, {9, 0}));
}

TEST_CASE("diagonal moves cannot cut corners") {
  OccupancyGrid g = empty_grid(3, 3);
  block(g, 1, 0, 1, 0);
  const auto p = bfs_path(g, {0, 0}, {2, 1});
  REQUIRE(p);
  for (std::size_t i = 0; i + 1 < p->size(); ++i) {
    const Cell a = (*p)[i];
    const Cell b = (*p)[i + 1];
    if (a.x != b.x && a.y != b.y) {
      CHECK(g.free({a.x, b.y}));
      CHECK(g.free({b.x, a.y}));
    }
  }
}

TEST_CASE("bfs hop counts equal unit-cost dijkstra on random grids") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const OccupancyGrid g = random_grid(seed);
    std::mt19937_64 rng(seed + 100);
    const Cell s = random_free(g, rng);
    const Cell t = random_free(g, rng);
    const auto b = bfs_path(g, s, t);
    const auto d = dijkstra_path(g, s, t, EdgeCost::Unit);
    REQUIRE(b.has_value() == d.has_value());
    if (!b) continue;
    CHECK(static_cast<double>(b->size() - 1) == d->cost);
    ++compared;
  }
  CHECK(compared >= 40);
}

TEST_CASE("line-of-sight simplification") {
  const OccupancyGrid open = empty_grid(10, 3);
  std::vector<Cell> corridor;
  for (int x = 0; x < 10; ++x) corridor.push_back({x, 1});
  CHECK(los_simplify(open, corridor).size() == 2);

  OccupancyGrid l = empty_grid(6, 6);
  block(l, 1, 1, 5, 5);
  std::vector<Cell> around;
  for (int y = 5; y >= 0; --y) around.push_back({0, y});
  for (int x = 1; x < 6; ++x) around.push_back({x, 0});
  const auto s = los_simplify(l, around);
  REQUIRE(s.size() == 3);
  CHECK(s[1] == Cell{0, 0});
}

TEST_CASE("smoothed grid paths: free under bresenham, within 10% of octile dijkstra") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const OccupancyGrid g = random_grid(1000 + seed);
    std::mt19937_64 rng(seed);
    const Cell s = random_free(g, rng);
    const Cell t = random_free(g, rng);
    const GridPlanResult r = grid_plan(g, g.center(s), g.center(t));
    const auto oracle = dijkstra_path(g, s, t, EdgeCost::Octile);
    REQUIRE((r.status == PlanStatus::Ok) == oracle.has_value());
    if (!oracle) continue;
    ++compared;
    const double straight = (g.center(t) - g.center(s)).norm();
    CHECK(r.path.length() >= straight - 1e-12);
    CHECK(r.path.length() <= 1.1 * oracle->cost * g.cell_size + 1e-9);
    CHECK(r.path.waypoints.front() == g.center(s));
    for (std::size_t i = 0; i + 1 < r.path.waypoints.size(); ++i) {
      for (const Cell c : bresenham_line(g.cell_of(r.path.waypoints[i]), g.cell_of(r.path.waypoints[i + 1]))) {
        CHECK(g.free(c));
      }
    }
  }
  CHECK(compared >= 15);
}

TEST_CASE("grid plan between neighbours and to an unreachable goal") {
  OccupancyGrid g = empty_grid(5, 5);
  const GridPlanResult r = grid_plan(g, v2(0.5, 0.5), v2(1.5, 0.5));
  CHECK(r.status == PlanStatus::Ok);
  CHECK(r.path.waypoints.size() == 2);
  CHECK(r.path.length() == doctest::Approx(1.0));

  block(g, 2, 0, 2, 4);
  CHECK(grid_plan(g, v2(0.5, 0.5), v2(4.5, 0.5)).status == PlanStatus::NoPath);
}

TEST_CASE("goal cell selection") {
  SUBCASE("ties go to the first free cell in row-major order") {
    const ConstantField f(1.0, unit(4, 0));
    OccupancyGrid g = empty_grid(4, 4);
    CHECK(select_goal_cell(f, g, unit(4, 0)) == Cell{0, 0});
    block(g, 0, 0, 0, 0);
    CHECK(select_goal_cell(f, g, unit(4, 0)) == Cell{1, 0});
    block(g, 0, 0, 3, 3);
    CHECK_THROWS(select_goal_cell(f, g, unit(4, 0)));
  }
  SUBCASE("argmax over free cells") {
    const RampField f(1.0, 2.0);
    OccupancyGrid g = empty_grid(4, 4);
    CHECK(select_goal_cell(f, g, unit(2, 0)).x == 3);
    block(g, 3, 0, 3, 3);
    const Cell c = select_goal_cell(f, g, unit(2, 0));
    CHECK(c == Cell{2, 0});
  }
  SUBCASE("the only labelled object attracts the goal") {
    Scene s = testing::open_scene(4.0);
    s.obstacles.push_back(make_box(v2(2.0, 0.1), v2(2.0, 0.1), "wall"));
    s.obstacles.push_back(make_box(v2(2.0, 3.9), v2(2.0, 0.1), "wall"));
    s.obstacles.push_back(make_box(v2(0.1, 2.0), v2(0.1, 2.0), "wall"));
    s.obstacles.push_back(make_box(v2(3.9, 2.0), v2(0.1, 2.0), "wall"));
    s.obstacles.push_back(make_sphere(v2(2.2, 1.8), 0.3, "mug"));
    const AnalyticField f = field_of(s, 16);
    const OccupancyGrid g = occupancy_from_field(f, s.bounds, 0.1, 0.05);
    const Cell c = select_goal_cell(f, g, make_query(synth_table(s.labels(), 16, 1), "mug").vector);
    CHECK(g.free(c));
    CHECK(label_sdf(s, "mug", g.center(c)) <= 3 * g.cell_size);
  }
}

TEST_CASE("path losses by hand") {
  ag::Matrix three(3, 2);
  three << 0, 0, 1, 0, 4, 0;
  CHECK(loss_spacing(ag::Tensor::constant(three)).item() == doctest::Approx(2.0));
  ag::Matrix even(4, 2);
  even << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK(loss_spacing(ag::Tensor::constant(even)).item() == doctest::Approx(0.0).epsilon(1e-12));

  ag::Matrix ell(3, 2);
  ell << 0, 0, 1, 0, 1, 1;
  CHECK(loss_length(ag::Tensor::constant(ell)).item() == doctest::Approx(2.0));

  ag::Matrix sdf(3, 1);
  sdf << 0.5, 0.2, 0.3;
  CHECK(loss_obstacle(ag::Tensor::constant(sdf), 0.3).item() == doctest::Approx(0.1));
  CHECK(loss_obstacle(ag::Tensor::constant(sdf), 0.2).item() == 0.0);

  const Eigen::VectorXd q = unit(3, 1);
  CHECK(loss_semantic_goal(ag::Tensor::constant(q.transpose()), q).item() == doctest::Approx(-1.0));
  CHECK(loss_semantic_goal(ag::Tensor::constant(unit(3, 2).transpose()), q).item() == 0.0);
}

TEST_CASE("length: coincident points and a long-double oracle") {
  ag::Matrix same(2, 2);
  same << 1.5, -2.0, 1.5, -2.0;
  ag::Tensor p = ag::Tensor::parameter(same);
  const ag::Tensor l = loss_length(p);
  CHECK(l.item() == 0.0);
  ag::backward(l);
  CHECK(p.grad().isZero(0.0));
  CHECK(p.grad().allFinite());

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  ag::Matrix pts(200, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = g(rng);
  long double oracle = 0.0L;
  for (Eigen::Index i = 0; i + 1 < pts.rows(); ++i) {
    const long double dx = pts(i + 1, 0) - pts(i, 0);
    const long double dy = pts(i + 1, 1) - pts(i, 1);
    oracle += std::sqrt(dx * dx + dy * dy);
  }
  CHECK(std::abs(loss_length(ag::Tensor::constant(pts)).item() - static_cast<double>(oracle)) < 1e-12);
}

TEST_CASE("spacing and length are invariant to rigid motions") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    ag::Matrix pts(7, 2);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = g(rng);
    const double th = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
    Eigen::Matrix2d rot;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    ag::Matrix moved = pts * rot.transpose();
    moved.rowwise() += Eigen::RowVector2d(g(rng), g(rng));
    CHECK(loss_spacing(ag::Tensor::constant(moved)).item() ==
          doctest::Approx(loss_spacing(ag::Tensor::constant(pts)).item()).epsilon(1e-12));
    CHECK(loss_length(ag::Tensor::constant(moved)).item() ==
          doctest::Approx(loss_length(ag::Tensor::constant(pts)).item()).epsilon(1e-12));
  }
}

TEST_CASE("a descent step on the obstacle loss raises the analytic sdf") {
  const Scene s = disk_scene();
  const AnalyticField f = field_of(s);
  ag::Matrix pts(3, 2);
  pts << 2.0, 2.6, 2.65, 2.0, 1.2, 1.6;
  ag::Tensor p = ag::Tensor::parameter(pts);
  ag::backward(loss_obstacle(f.evaluate(p).sdf, 0.3));
  const ag::Matrix stepped = pts - 0.01 * p.grad();
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double before = analytic_sdf(s, pts.row(i).transpose());
    const double after = analytic_sdf(s, stepped.row(i).transpose());
    if (before < 0.3) {
      CHECK(after > before);
    } else {
      CHECK(after == before);
    }
  }
}

TEST_CASE("a descent step on the semantic loss raises similarity") {
  const RampField f(1.0, 2.0);
  ag::Matrix pt(1, 2);
  pt << 1.0, 0.5;
  ag::Tensor p = ag::Tensor::parameter(pt);
  const Eigen::VectorXd q = unit(2, 0);
  ag::backward(loss_semantic_goal(f.evaluate(p).sem, q));
  const ag::Matrix stepped = pt - 0.05 * p.grad();
  CHECK(stepped(0, 0) > pt(0, 0));
  CHECK(query(f, stepped.row(0).transpose()).sem.dot(q) > query(f, pt.row(0).transpose()).sem.dot(q));
}

TEST_CASE("resampling keeps vertices and endpoints") {
  const std::vector<Vec> poly{v2(0, 0), v2(1, 0), v2(1, 3)};
  const auto r = resample_path(poly, 9);
  REQUIRE(r.size() == 9);
  CHECK(r.front() == poly.front());
  CHECK(r.back() == poly.back());
  CHECK(std::find(r.begin(), r.end(), poly[1]) != r.end());
  CHECK(path_length(r) == doctest::Approx(4.0));
}

TEST_CASE("gradient planner keeps an optimal straight segment") {
  const ConstantField f(5.0, unit(4, 0));
  PlannerParams params;
  params.lambda_s = 0.0;
  GradientPlanRequest req;
  req.start = v2(0.5, 0.5);
  req.goal = v2(3.5, 2.5);
  req.init = Path{{req.start, *req.goal}, {}, {}};
  req.bounds = {v2(0, 0), v2(4, 4)};
  const GradientPlanResult r = gradient_plan(f, req, params);
  CHECK(r.status == PlanStatus::Ok);
  CHECK(r.path.waypoints.front() == req.start);
  CHECK(r.path.waypoints.back() == *req.goal);
  CHECK(std::abs(r.path.length() - (*req.goal - req.start).norm()) <= 1e-3);
}

TEST_CASE("gradient planner routes around a blocking disk") {
  const Scene s = disk_scene();
  const AnalyticField f = field_of(s);
  PlannerParams params;
  GradientPlanRequest req;
  req.start = v2(0.4, 2.0);
  req.goal = v2(3.6, 2.0);
  req.bounds = s.bounds;
  const GradientPlanResult r = gradient_plan(f, req, params);
  REQUIRE(r.status == PlanStatus::Ok);
  CHECK(r.path.waypoints.front() == req.start);
  CHECK(min_dense_sdf(s, r.path.waypoints) >= params.d_min - 0.01);
  CHECK(r.final_terms.total <= r.initial.total);
  CHECK(r.path.length() > 3.2);

  const GradientPlanResult again = gradient_plan(f, req, params);
  CHECK(again.path.waypoints == r.path.waypoints);
  CHECK(again.iterations == r.iterations);
}

TEST_CASE("length-only descent never lengthens a feasible path") {
  const Scene s = disk_scene();
  const AnalyticField f = field_of(s);
  PlannerParams params;
  params.lambda_o = 0.0;
  params.lambda_n = 0.0;
  params.lambda_s = 0.0;
  GradientPlanRequest req;
  req.start = v2(0.4, 0.4);
  req.goal = v2(3.6, 0.8);
  req.init = Path{{req.start, v2(0.4, 3.6), v2(3.6, 3.6), *req.goal}, {}, {}};
  req.bounds = s.bounds;
  const GradientPlanResult r = gradient_plan(f, req, params);
  CHECK(r.path.length() <= path_length(resample_path(req.init->waypoints, params.n_points)) + 1e-12);
  CHECK(min_dense_sdf(s, r.path.waypoints) >= params.d_min - 0.01);
}

TEST_CASE("semantic goal: the end point climbs the similarity ramp") {
  const RampField f(5.0, 2.0);
  PlannerParams params;
  GradientPlanRequest req;
  req.start = v2(0.5, 2.0);
  req.query = unit(2, 0);
  req.bounds = {v2(0, 0), v2(4, 4)};
  const GradientPlanResult r = gradient_plan(f, req, params);
  REQUIRE(r.status == PlanStatus::Ok);
  const OccupancyGrid g = occupancy_from_field(f, req.bounds, 0.1, params.clearance());
  const double grid_sim = query(f, g.center(select_goal_cell(f, g, *req.query))).sem.dot(*req.query);
  CHECK(query(f, r.path.waypoints.back()).sem.dot(*req.query) >= grid_sim - 1e-9);
  CHECK(r.path.waypoints.front() == req.start);
}

TEST_CASE("objective terms and bad requests") {
  const ConstantField f(0.2, unit(3, 0));
  PlannerParams params;
  const std::vector<Vec> pts{v2(0, 0), v2(1, 0), v2(1, 1)};
  const Eigen::VectorXd q = unit(3, 0);
  const PathObjective o = path_objective(f, ag::Tensor::constant(rows_of(pts)), &q, params);
  CHECK(o.terms.obstacle == doctest::Approx(3 * (params.clearance() - 0.2)));
  CHECK(o.terms.semantic == doctest::Approx(-1.0));
  CHECK(o.terms.length == doctest::Approx(2.0));
  CHECK(o.terms.total == doctest::Approx(params.lambda_o * o.terms.obstacle + params.lambda_n * o.terms.spacing +
                                         params.lambda_s * o.terms.semantic + params.lambda_d * o.terms.length));

  GradientPlanRequest req;
  req.start = v2(0, 0);
  req.bounds = {v2(0, 0), v2(1, 1)};
  CHECK_THROWS(gradient_plan(f, req, params));
  req.query = unit(5, 0);
  CHECK_THROWS(gradient_plan(f, req, params));
  params.n_points = 1;
  CHECK_THROWS(params.validate());
}

TEST_CASE("path json round trip") {
  const Scene s = disk_scene();
  const AnalyticField f = field_of(s);
  Path p{{v2(0.1, 0.2), v2(1.0 / 3.0, 0.7), v2(3.9, 3.1)}, {}, {}};
  const EmbeddingTable table = synth_table(s.labels(), 8, 1);
  const Eigen::VectorXd q = make_query(table, "disk").vector;
  annotate(p, f, &q);
  const Path back = path_from_json(path_to_json(p));
  CHECK(back.waypoints == p.waypoints);
  CHECK(back.sdf == p.sdf);
  CHECK(back.semantic == p.semantic);
  CHECK_THROWS(path_from_json(nlohmann::json::array({{{"x", 0.0}}})));
}
