// Benchmark protocol: randomized trials, per-trial normalization across
// planners (length multiple, relative semantic score), collision audits, and
// report tables. Also the end-to-end runner for the desk suite.
#pragma once

#include "semnav/capture.hpp"
#include "semnav/embedding.hpp"
#include "semnav/field.hpp"
#include "semnav/planner.hpp"
#include "semnav/train.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace semnav {

struct Trial {
  Vec start;
  std::optional<Vec> goal;  // Length trials.
  std::string query;        // Semantic trials.
};

struct TrialSet {
  std::string scene;
  std::uint64_t seed = 0;
  std::vector<Trial> trials;
};

using PointFilter = std::function<bool(const Vec&)>;

// Starts and goals drawn uniformly in the scene bounds until `admissible`
// accepts them. Throws after 1000 * n consecutive rejections.
TrialSet make_pair_trials(const Scene& scene, int n_pairs, std::uint64_t seed, const PointFilter& admissible);
// n_starts admissible starts per query, queries in the given order.
TrialSet make_query_trials(const Scene& scene, const std::vector<std::string>& queries, int n_starts,
                           std::uint64_t seed, const PointFilter& admissible);

struct PlanOutcome {
  PlanStatus status = PlanStatus::NoPath;
  Path path;
};

struct PlannerEntry {
  std::string name;
  std::function<PlanOutcome(const Trial&)> plan;
};

struct TrialRecord {
  std::vector<PlanStatus> status;  // One per planner.
  std::vector<Path> paths;
  std::vector<double> raw;         // Length or terminal similarity; NaN on failure.
  std::vector<double> normalized;  // Multiple or ratio; NaN unless the trial is complete.
  double oracle = std::numeric_limits<double>::quiet_NaN();
  bool complete = false;  // Every planner returned a usable path.
};

struct PlannerReport {
  std::string scene;
  std::string metric;  // "length_multiple" or "semantic_ratio".
  std::vector<std::string> planners;
  std::vector<TrialRecord> trials;
  std::vector<double> mean;             // Over complete trials.
  std::vector<double> oracle_multiple;  // Mean raw / oracle length; NaN without an oracle.
  std::vector<int> failures;            // Trials the planner failed.
  int complete_trials = 0;
  int partial_trials = 0;   // Some, not all, planners failed.
  int excluded_trials = 0;  // Every planner failed, or no usable normalizer.
};

// Infeasible paths count as failures. Sums are taken over sorted values, so
// aggregates do not depend on trial order.
PlannerReport run_length_benchmark(const std::vector<PlannerEntry>& planners, const TrialSet& trials,
                                   const std::function<std::optional<double>(const Trial&)>& oracle = {});

// Terminal similarity of each planner's last waypoint, divided by the best
// across planners for that trial. Trials whose best similarity is not
// positive are excluded.
using TerminalScore = std::function<double(const Path&, const std::string& query)>;
PlannerReport run_semantic_benchmark(const std::vector<PlannerEntry>& planners, const TrialSet& trials,
                                     const TerminalScore& score);

struct PathAudit {
  double min_clearance = 0.0;
  int violations = 0;  // Samples with analytic SDF below the threshold.
  int samples = 0;
};

struct AuditReport {
  double threshold = 0.0;
  std::vector<PathAudit> paths;
  int violating_paths = 0;
  double min_clearance = std::numeric_limits<double>::infinity();
};

// Samples each segment every `step` (endpoints included) against the
// scene's analytic SDF.
PathAudit audit_path(const Scene& scene, const Path& path, double threshold, double step = 0.01);
AuditReport collision_audit(const std::vector<Path>& paths, const Scene& scene, double threshold,
                            double step = 0.01);

// Rows are planners, columns scenes, cells the per-planner mean. Reports
// must share the planner list.
void write_table(std::ostream& out, const std::string& title, const std::vector<PlannerReport>& reports);
// scene,metric,trial,planner,status,raw,normalized,oracle
void write_trials_csv(std::ostream& out, const std::vector<PlannerReport>& reports);

// ---- desk suite -------------------------------------------------------------

struct SuiteConfig {
  int n_pairs = 100;
  int n_starts = 10;  // Per query.
  std::vector<double> grid_cells{0.1, 0.2, 0.4};
  bool gradient = true;
  bool oracle = true;  // Octile Dijkstra on a 5 cm analytic grid.
  double audit_tolerance = 0.02;
  PlannerParams planner;
  std::uint64_t seed = 1;
};

struct SceneEvaluation {
  std::string scene;
  PlannerReport length;
  PlannerReport semantic;
  std::vector<AuditReport> audit;  // Per planner, over its length and semantic paths.
};

// Planner names are "grid_<cm>cm" and "gradient". Grids come from the field
// at planner.clearance(). Trial points keep analytic clearance >= d_min and
// lie in free cells of every grid. Audits use d_min - audit_tolerance. Queries
// are the scene labels other than "wall".
SceneEvaluation evaluate_scene(const Scene& scene, const SpatialField& field, const EmbeddingTable& table,
                               const SuiteConfig& config);

}  // namespace semnav
