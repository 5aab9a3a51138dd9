#include "semnav/eval.hpp"

#include "semnav/analytic_field.hpp"
#include "semnav/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace semnav {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec draw_point(const Scene& scene, Rng& rng, const PointFilter& admissible, int budget) {
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int k = 0; k < scene.dimension; ++k) axis.emplace_back(scene.bounds.lo[k], scene.bounds.hi[k]);
  Vec p(scene.dimension);
  for (int tries = 0; tries < budget; ++tries) {
    for (int k = 0; k < scene.dimension; ++k) p[k] = axis[static_cast<std::size_t>(k)](rng);
    if (admissible(p)) return p;
  }
  throw std::runtime_error("trials: no admissible point found in " + scene.name);
}

// Sum of sorted values, so the result does not depend on input order.
double ordered_mean(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool usable(PlanStatus s) { return s == PlanStatus::Ok; }

// Runs every planner on every trial and fills status, paths and raw values.
PlannerReport collect(const std::vector<PlannerEntry>& planners, const TrialSet& trials, const std::string& metric,
                      const std::function<double(const PlanOutcome&, const Trial&)>& value) {
  if (planners.size() < 2) throw std::invalid_argument("benchmark: need at least two planners");
  PlannerReport report;
  report.scene = trials.scene;
  report.metric = metric;
  for (const auto& p : planners) report.planners.push_back(p.name);
  report.failures.assign(planners.size(), 0);
  for (const Trial& t : trials.trials) {
    TrialRecord rec;
    for (std::size_t k = 0; k < planners.size(); ++k) {
      PlanOutcome out = planners[k].plan(t);
      rec.status.push_back(out.status);
      rec.raw.push_back(usable(out.status) ? value(out, t) : kNaN);
      if (!usable(out.status)) ++report.failures[k];
      rec.paths.push_back(std::move(out.path));
    }
    rec.normalized.assign(planners.size(), kNaN);
    report.trials.push_back(std::move(rec));
  }
  return report;
}

void summarize(PlannerReport& report) {
  const std::size_t np = report.planners.size();
  std::vector<std::vector<double>> per(np);
  std::vector<std::vector<double>> per_oracle(np);
  for (const auto& rec : report.trials) {
    if (!rec.complete) continue;
    for (std::size_t k = 0; k < np; ++k) {
      per[k].push_back(rec.normalized[k]);
      if (std::isfinite(rec.oracle)) per_oracle[k].push_back(rec.raw[k] / rec.oracle);
    }
  }
  report.mean.clear();
  report.oracle_multiple.clear();
  for (std::size_t k = 0; k < np; ++k) {
    report.mean.push_back(ordered_mean(per[k]));
    report.oracle_multiple.push_back(ordered_mean(per_oracle[k]));
  }
}

void classify(PlannerReport& report, TrialRecord& rec, bool normalizer_ok) {
  const auto ok = std::count_if(rec.status.begin(), rec.status.end(), usable);
  rec.complete = ok == static_cast<long>(rec.status.size()) && normalizer_ok;
  if (rec.complete) {
    ++report.complete_trials;
  } else if (ok == 0 || !normalizer_ok) {
    ++report.excluded_trials;
  } else {
    ++report.partial_trials;
  }
}

}  // namespace

TrialSet make_pair_trials(const Scene& scene, int n_pairs, std::uint64_t seed, const PointFilter& admissible) {
  if (n_pairs < 0) throw std::invalid_argument("trials: negative pair count");
  TrialSet set{scene.name, seed, {}};
  Rng rng(seed);
  const int budget = 1000 * std::max(n_pairs, 1);
  for (int i = 0; i < n_pairs; ++i) {
    Trial t;
    t.start = draw_point(scene, rng, admissible, budget);
    t.goal = draw_point(scene, rng, admissible, budget);
    set.trials.push_back(std::move(t));
  }
  return set;
}

TrialSet make_query_trials(const Scene& scene, const std::vector<std::string>& queries, int n_starts,
                           std::uint64_t seed, const PointFilter& admissible) {
  if (n_starts < 0) throw std::invalid_argument("trials: negative start count");
  TrialSet set{scene.name, seed, {}};
  Rng rng(seed);
  const int budget = 1000 * std::max(n_starts, 1);
  for (const auto& q : queries) {
    for (int i = 0; i < n_starts; ++i) {
      Trial t;
      t.start = draw_point(scene, rng, admissible, budget);
      t.query = q;
      set.trials.push_back(std::move(t));
    }
  }
  return set;
}

PlannerReport run_length_benchmark(const std::vector<PlannerEntry>& planners, const TrialSet& trials,
                                   const std::function<std::optional<double>(const Trial&)>& oracle) {
  PlannerReport report = collect(planners, trials, "length_multiple",
                                 [](const PlanOutcome& o, const Trial&) { return o.path.length(); });
  for (std::size_t i = 0; i < report.trials.size(); ++i) {
    TrialRecord& rec = report.trials[i];
    double best = std::numeric_limits<double>::infinity();
    for (double v : rec.raw) {
      if (std::isfinite(v)) best = std::min(best, v);
    }
    classify(report, rec, best > 0.0 && std::isfinite(best));
    if (!rec.complete) continue;
    for (std::size_t k = 0; k < rec.raw.size(); ++k) rec.normalized[k] = rec.raw[k] / best;
    if (oracle) {
      if (const auto len = oracle(trials.trials[i]); len && *len > 0.0) rec.oracle = *len;
    }
  }
  summarize(report);
  return report;
}

PlannerReport run_semantic_benchmark(const std::vector<PlannerEntry>& planners, const TrialSet& trials,
                                     const TerminalScore& score) {
  PlannerReport report = collect(planners, trials, "semantic_ratio", [&](const PlanOutcome& o, const Trial& t) {
    return score(o.path, t.query);
  });
  for (TrialRecord& rec : report.trials) {
    double best = -std::numeric_limits<double>::infinity();
    for (double v : rec.raw) {
      if (std::isfinite(v)) best = std::max(best, v);
    }
    classify(report, rec, best > 0.0 && std::isfinite(best));
    if (!rec.complete) continue;
    for (std::size_t k = 0; k < rec.raw.size(); ++k) rec.normalized[k] = rec.raw[k] / best;
  }
  summarize(report);
  return report;
}

PathAudit audit_path(const Scene& scene, const Path& path, double threshold, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("audit: step must be positive");
  PathAudit a;
  a.min_clearance = std::numeric_limits<double>::infinity();
  auto visit = [&](const Vec& p) {
    const double d = analytic_sdf(scene, p);
    a.min_clearance = std::min(a.min_clearance, d);
    if (d < threshold) ++a.violations;
    ++a.samples;
  };
  const auto& w = path.waypoints;
  if (w.empty()) return a;
  visit(w.front());
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Vec d = w[i + 1] - w[i];
    const int k = std::max(1, static_cast<int>(std::ceil(d.norm() / step)));
    for (int j = 1; j <= k; ++j) visit(w[i] + d * (static_cast<double>(j) / k));
  }
  return a;
}

AuditReport collision_audit(const std::vector<Path>& paths, const Scene& scene, double threshold, double step) {
  AuditReport r;
  r.threshold = threshold;
  for (const auto& p : paths) {
    r.paths.push_back(audit_path(scene, p, threshold, step));
    if (r.paths.back().violations > 0) ++r.violating_paths;
    r.min_clearance = std::min(r.min_clearance, r.paths.back().min_clearance);
  }
  return r;
}

void write_table(std::ostream& out, const std::string& title, const std::vector<PlannerReport>& reports) {
  if (reports.empty()) return;
  const auto& names = reports.front().planners;
  for (const auto& r : reports) {
    if (r.planners != names) throw std::invalid_argument("write_table: reports use different planners");
  }
  std::size_t w0 = 8;
  for (const auto& n : names) w0 = std::max(w0, n.size());
  char buf[64];
  out << title << '\n';
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), "planner");
  out << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "  %12s", r.scene.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), names[k].c_str());
    out << buf;
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof buf, "  %12.3f", r.mean[k]);
      out << buf;
    }
    out << '\n';
  }
  out << "trials (complete/partial/excluded):";
  for (const auto& r : reports) {
    out << ' ' << r.scene << '=' << r.complete_trials << '/' << r.partial_trials << '/' << r.excluded_trials;
  }
  out << '\n';
  const bool any_oracle = std::any_of(reports.begin(), reports.end(), [](const PlannerReport& r) {
    return std::any_of(r.oracle_multiple.begin(), r.oracle_multiple.end(), [](double v) { return std::isfinite(v); });
  });
  if (!any_oracle) return;
  out << "multiple of the octile oracle length\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(w0), names[k].c_str());
    out << buf;
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof buf, "  %12.3f", r.oracle_multiple[k]);
      out << buf;
    }
    out << '\n';
  }
}

void write_trials_csv(std::ostream& out, const std::vector<PlannerReport>& reports) {
  out << "scene,metric,trial,planner,status,raw,normalized,oracle\n";
  char buf[128];
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
      const auto& rec = r.trials[i];
      for (std::size_t k = 0; k < r.planners.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g", rec.raw[k], rec.normalized[k], rec.oracle);
        out << r.scene << ',' << r.metric << ',' << i << ',' << r.planners[k] << ',' << to_string(rec.status[k])
            << ',' << buf << '\n';
      }
    }
  }
}

SceneEvaluation evaluate_scene(const Scene& scene, const SpatialField& field, const EmbeddingTable& table,
                               const SuiteConfig& config) {
  if (scene.dimension != 2) throw std::invalid_argument("evaluate_scene: planar scenes only");
  const PlannerParams& pp = config.planner;
  pp.validate();

  std::vector<OccupancyGrid> grids;
  for (double c : config.grid_cells) grids.push_back(occupancy_from_field(field, scene.bounds, c, pp.clearance()));
  const auto admissible = [&](const Vec& p) {
    if (analytic_sdf(scene, p) < pp.d_min) return false;
    return std::all_of(grids.begin(), grids.end(), [&](const OccupancyGrid& g) { return g.free(g.cell_of(p)); });
  };

  std::vector<PlannerEntry> planners;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const OccupancyGrid* g = &grids[i];
    planners.push_back({"grid_" + std::to_string(static_cast<int>(std::lround(config.grid_cells[i] * 100))) + "cm",
                        [g, &field, &table](const Trial& t) {
                          GridPlanResult r = t.goal ? grid_plan(*g, t.start, *t.goal)
                                                    : grid_plan(*g, field, t.start, table.at(t.query));
                          return PlanOutcome{r.status, std::move(r.path)};
                        }});
  }
  if (config.gradient) {
    planners.push_back({"gradient", [&](const Trial& t) {
                          GradientPlanRequest req;
                          req.start = t.start;
                          req.bounds = scene.bounds;
                          if (t.goal) req.goal = *t.goal;
                          else req.query = table.at(t.query);
                          GradientPlanResult r = gradient_plan(field, req, pp);
                          return PlanOutcome{r.status, std::move(r.path)};
                        }});
  }

  std::optional<OccupancyGrid> oracle_grid;
  std::function<std::optional<double>(const Trial&)> oracle;
  if (config.oracle) {
    const AnalyticField truth(scene, table);
    oracle_grid = occupancy_from_field(truth, scene.bounds, 0.05, pp.d_min);
    oracle = [&](const Trial& t) -> std::optional<double> {
      const OccupancyGrid& g = *oracle_grid;
      const Cell a = g.cell_of(t.start);
      const Cell b = g.cell_of(*t.goal);
      if (g.occupied(a) || g.occupied(b)) return std::nullopt;
      const auto r = dijkstra_path(g, a, b, EdgeCost::Octile);
      if (!r) return std::nullopt;
      return r->cost * g.cell_size;
    };
  }

  SceneEvaluation ev;
  ev.scene = scene.name;
  ev.length = run_length_benchmark(planners, make_pair_trials(scene, config.n_pairs, config.seed, admissible), oracle);

  std::vector<std::string> queries;
  for (const auto& l : scene.labels()) {
    if (l != "wall") queries.push_back(l);
  }
  const TerminalScore score = [&](const Path& path, const std::string& q) {
    return similarity(query(field, path.waypoints.back()).sem, table.at(q));
  };
  ev.semantic = run_semantic_benchmark(
      planners, make_query_trials(scene, queries, config.n_starts, config.seed + 1, admissible), score);

  const double threshold = pp.d_min - config.audit_tolerance;
  for (std::size_t k = 0; k < planners.size(); ++k) {
    std::vector<Path> paths;
    for (const auto* rep : {&ev.length, &ev.semantic}) {
      for (const auto& rec : rep->trials) {
        if (usable(rec.status[k])) paths.push_back(rec.paths[k]);
      }
    }
    ev.audit.push_back(collision_audit(paths, scene, threshold));
  }
  return ev;
}

}  // namespace semnav
