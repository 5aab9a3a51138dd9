#pragma once

#include "semnav/scene.hpp"

#include <doctest.h>

#include <random>

namespace testing {

inline semnav::Vec v2(double x, double y) {
  semnav::Vec v(2);
  v << x, y;
  return v;
}

inline semnav::Vec v3(double x, double y, double z) {
  semnav::Vec v(3);
  v << x, y, z;
  return v;
}

// Open square region with a few labeled obstacles and no walls.
inline semnav::Scene open_scene(double size = 4.0) {
  semnav::Scene s;
  s.name = "open";
  s.bounds.lo = v2(0, 0);
  s.bounds.hi = v2(size, size);
  return s;
}

inline semnav::Vec uniform_point(const semnav::Bounds& b, std::mt19937_64& rng) {
  semnav::Vec p(b.lo.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) p[k] = std::uniform_real_distribution<double>(b.lo[k], b.hi[k])(rng);
  return p;
}

}  // namespace testing
