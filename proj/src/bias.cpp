#include "semnav/bias.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>


namespace semnav {

namespace {

constexpr long kChunkTrials = 1024;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct ChunkSums {
  double sum = 0.0;
  double sum_sq = 0.0;
};

ChunkSums run_chunk(double d, double sigma, int n, long trials, std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ChunkSums s;
  for (long t = 0; t < trials; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double x = d + sigma * gauss(rng);
      double r2 = x * x;
      // The axial term alone bounds |x| from below.
      if (r2 >= best) continue;
      for (int k = 1; k < dim; ++k) {
        const double y = sigma * gauss(rng);
        r2 += y * y;
      }
      best = std::min(best, r2);
    }
    const double m = std::sqrt(best);
    s.sum += m;
    s.sum_sq += m * m;
  }
  return s;
}

}  // namespace

double NoiseModel::sigma_c() const { return std::hypot(sigma_depth, sigma_pose); }

void NoiseModel::validate() const {
  if (!(sigma_depth >= 0.0) || !(sigma_pose >= 0.0)) throw std::invalid_argument("noise: sigmas must be non-negative");
}

MinDistanceEstimate simulate_min_distance(double true_dist, double sigma_c, int n, long trials,
                                          std::uint64_t seed, int dim, int threads) {
  if (n < 1) throw std::invalid_argument("simulate_min_distance: need at least one sample");
  if (trials < 1) throw std::invalid_argument("simulate_min_distance: need at least one trial");
  if (dim < 1) throw std::invalid_argument("simulate_min_distance: dimension must be positive");
  if (!(sigma_c >= 0.0)) throw std::invalid_argument("simulate_min_distance: sigma must be non-negative");
  if (sigma_c == 0.0) return {std::abs(true_dist), 0.0};

  const long chunks = (trials + kChunkTrials - 1) / kChunkTrials;
  std::vector<ChunkSums> sums(static_cast<std::size_t>(chunks));
  const std::uint64_t base = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(n)));
  auto work = [&](long c) {
    const long count = std::min(kChunkTrials, trials - c * kChunkTrials);
    sums[static_cast<std::size_t>(c)] =
        run_chunk(true_dist, sigma_c, n, count, splitmix64(base + static_cast<std::uint64_t>(c)), dim);
  };
  const int workers = std::min<long>(chunks, threads > 0 ? threads
                                                         : std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (long c = 0; c < chunks; ++c) work(c);
  } else {
    std::atomic<long> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (long c = next++; c < chunks; c = next++) work(c);
      });
    }
  }

  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& s : sums) {
    sum += s.sum;
    sum_sq += s.sum_sq;
  }
  const double t = static_cast<double>(trials);
  const double mean = sum / t;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - t * mean * mean) / (t - 1.0)) : 0.0;
  return {mean, std::sqrt(var / t)};
}

bool BiasCurve::monotone_non_increasing(double k) const {
  for (std::size_t j = 1; j < ns.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      const double tol = k * std::hypot(stderrs[i], stderrs[j]);
      if (expected_min_dist[j] > expected_min_dist[i] + tol) return false;
    }
  }
  return true;
}

BiasCurve bias_curve(const NoiseModel& noise, double true_dist, const std::vector<int>& ns, long trials,
                     std::uint64_t seed, int dim, int threads) {
  noise.validate();
  BiasCurve curve;
  curve.ns = ns;
  curve.true_dist = true_dist;
  curve.sigma_c = noise.sigma_c();
  curve.trials = trials;
  curve.seed = seed;
  for (int n : ns) {
    const auto est = simulate_min_distance(true_dist, curve.sigma_c, n, trials, seed, dim, threads);
    curve.expected_min_dist.push_back(est.mean);
    curve.stderrs.push_back(est.standard_error);
  }
  return curve;
}

void write_bias_csv(std::ostream& out, const BiasCurve& curve) {
  const auto old = out.precision(12);
  out << "N,mean_min_dist,stderr\n";
  for (std::size_t i = 0; i < curve.ns.size(); ++i) {
    out << curve.ns[i] << ',' << curve.expected_min_dist[i] << ',' << curve.stderrs[i] << '\n';
  }
  out.precision(old);
}

double estimate_effective_count(const std::vector<Vec>& cloud, double sigma_c, std::uint64_t seed, int max_probes) {
  if (cloud.empty()) throw std::invalid_argument("estimate_effective_count: empty cloud");
  if (!(sigma_c > 0.0)) throw std::invalid_argument("estimate_effective_count: sigma must be positive");
  const auto dim = cloud.front().size();
  using Key = std::array<std::int64_t, 3>;
  auto key_of = [&](const Vec& p, const Eigen::Vector3i& offset) {
    Key k{0, 0, 0};
    for (Eigen::Index i = 0; i < dim; ++i) k[i] = static_cast<std::int64_t>(std::floor(p[i] / sigma_c)) + offset[i];
    return k;
  };
  std::map<Key, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < cloud.size(); ++i) buckets[key_of(cloud[i], Eigen::Vector3i::Zero())].push_back(i);

  std::vector<std::size_t> probes(cloud.size());
  for (std::size_t i = 0; i < probes.size(); ++i) probes[i] = i;
  if (static_cast<int>(probes.size()) > max_probes) {
    std::mt19937_64 rng(seed);
    std::shuffle(probes.begin(), probes.end(), rng);
    probes.resize(static_cast<std::size_t>(max_probes));
  }
  const int reach_z = dim == 3 ? 1 : 0;
  double total = 0.0;
  for (std::size_t p : probes) {
    std::size_t count = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -reach_z; dz <= reach_z; ++dz) {
          const auto it = buckets.find(key_of(cloud[p], Eigen::Vector3i(dx, dy, dz)));
          if (it == buckets.end()) continue;
          for (std::size_t q : it->second) {
            if ((cloud[q] - cloud[p]).norm() <= sigma_c) ++count;
          }
        }
      }
    }
    total += static_cast<double>(count);
  }
  return total / static_cast<double>(probes.size());
}

double correction_constant(const NoiseModel& noise, const CorrectionParams& params) {
  noise.validate();
  if (!(params.n_eff > 0.0)) throw std::invalid_argument("correction_constant: n_eff must be positive");
  if (!(params.clutter_factor >= 0.0)) throw std::invalid_argument("correction_constant: bad clutter factor");
  const double sigma = noise.sigma_c();
  if (sigma == 0.0) return 0.0;
  const int n = std::max(1, static_cast<int>(std::lround(params.n_eff)));
  const auto est = simulate_min_distance(params.true_dist, sigma, n, params.trials, params.seed, params.dim);
  const double c = params.clutter_factor * (params.true_dist - est.mean);
  return std::clamp(c, 0.0, kMaxCorrection);
}

std::vector<RegionComparison> navigable_region_compare(const SpatialField& field, const OccupancyGrid& cloud_grid,
                                                       const std::vector<double>& thresholds, double robot_radius) {
  const OccupancyGrid baseline = dilate(cloud_grid, robot_radius);
  if (baseline.free_count() == 0) throw std::runtime_error("navigable_region_compare: baseline has no free space");
  ag::Matrix centers(static_cast<Eigen::Index>(baseline.nx) * baseline.ny, 2);
  for (int y = 0; y < baseline.ny; ++y) {
    for (int x = 0; x < baseline.nx; ++x) {
      centers.row(static_cast<Eigen::Index>(baseline.index({x, y}))) = baseline.center({x, y}).transpose();
    }
  }
  const Eigen::VectorXd sdf = query_batch(field, centers).sdf;
  const double cell_area = baseline.cell_size * baseline.cell_size;
  std::vector<RegionComparison> out;
  for (double th : thresholds) {
    RegionComparison r;
    r.threshold = th;
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (int y = 0; y < baseline.ny; ++y) {
      for (int x = 0; x < baseline.nx; ++x) {
        const bool a = sdf[static_cast<Eigen::Index>(baseline.index({x, y}))] > th;
        const bool b = baseline.free({x, y});
        r.field_free_cells += a;
        r.baseline_free_cells += b;
        inter += a && b;
        uni += a || b;
      }
    }
    r.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    r.area_difference =
        (static_cast<double>(r.field_free_cells) - static_cast<double>(r.baseline_free_cells)) * cell_area;
    out.push_back(r);
  }
  return out;
}

}  // namespace semnav
