// Systematic SDF underestimation from noisy aggregated points, and the
// additive correction derived from it.
#pragma once

#include "semnav/field.hpp"
#include "semnav/occupancy.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace semnav {

struct NoiseModel {
  double sigma_depth = 0.01;
  double sigma_pose = 0.005;

  // sqrt(sigma_depth^2 + sigma_pose^2)
  double sigma_c() const;
  void validate() const;
};

struct MinDistanceEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo estimate of E[min_i |x_i|] with x_i ~ N(d e_1, sigma^2 I) in
// `dim` dimensions. Trials are split into fixed chunks with their own seeds
// and reduced in chunk order, so the result does not depend on `threads`.
MinDistanceEstimate simulate_min_distance(double true_dist, double sigma_c, int n, long trials,
                                          std::uint64_t seed, int dim = 3, int threads = 0);

struct BiasCurve {
  std::vector<int> ns;
  std::vector<double> expected_min_dist;
  std::vector<double> stderrs;
  double true_dist = 1.0;
  double sigma_c = 0.0;
  long trials = 0;
  std::uint64_t seed = 0;

  double bias(std::size_t i) const { return true_dist - expected_min_dist[i]; }
  // No later point exceeds an earlier one by more than k combined standard errors.
  bool monotone_non_increasing(double k = 3.0) const;
};

BiasCurve bias_curve(const NoiseModel& noise, double true_dist, const std::vector<int>& ns, long trials,
                     std::uint64_t seed, int dim = 3, int threads = 0);

// CSV with header "N,mean_min_dist,stderr".
void write_bias_csv(std::ostream& out, const BiasCurve& curve);

// Mean number of cloud points within sigma_c of a cloud point (itself
// included), averaged over up to `max_probes` randomly chosen points.
double estimate_effective_count(const std::vector<Vec>& cloud, double sigma_c, std::uint64_t seed,
                                int max_probes = 4000);

struct CorrectionParams {
  double n_eff = 100.0;        // Aggregated points per noise ball.
  double clutter_factor = 1.0;  // Multiplier for several noisy surfaces in reach.
  double true_dist = 1.0;
  long trials = 4000;
  std::uint64_t seed = 11;
  int dim = 3;
};

inline constexpr double kMaxCorrection = 0.5;

// clutter_factor * (true_dist - E[min distance at round(n_eff) samples]),
// clamped to [0, kMaxCorrection]. Exactly 0 when the noise is zero.
double correction_constant(const NoiseModel& noise, const CorrectionParams& params);

struct RegionComparison {
  double threshold = 0.0;
  double iou = 0.0;
  double area_difference = 0.0;  // Field free area minus baseline free area (m^2).
  std::size_t field_free_cells = 0;
  std::size_t baseline_free_cells = 0;
};

// Compares {field SDF > threshold} at cell centers with the free cells of the
// cloud grid dilated by robot_radius. Throws when the baseline has no free cell.
std::vector<RegionComparison> navigable_region_compare(const SpatialField& field, const OccupancyGrid& cloud_grid,
                                                       const std::vector<double>& thresholds, double robot_radius);

}  // namespace semnav
