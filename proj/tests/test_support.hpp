#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "irncc/patch.hpp"
#include "irncc/rng.hpp"

namespace irncc::testkit {

inline Patch random_patch(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Patch p(rows, cols);
  for (double& v : p.values()) v = rng.uniform(lo, hi);
  return p;
}

/// Random patch whose pixels all sit at least `gap` away from the mean.
inline Patch kink_free_patch(Rng& rng, int side, double gap = 0.1) {
  Patch p = random_patch(rng, side, side);
  for (bool moved = true; moved;) {
    moved = false;
    double mean = 0.0;
    for (double v : p.values()) mean += v;
    mean /= static_cast<double>(p.size());
    for (double& v : p.values())
      if (std::abs(v - mean) <= gap) {
        v = mean + (v >= mean ? 1 : -1) * (gap + rng.uniform(0.05, 0.5));
        moved = true;
      }
  }
  return p;
}

/// Relative error with an absolute floor, the usual gradient-check measure.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b)));
}

// Independent two-pass statistics.
inline double naive_mean(const Patch& p) {
  long double s = 0;
  for (double v : p.values()) s += v;
  return static_cast<double>(s / p.size());
}

inline double naive_std(const Patch& p) {
  const double m = naive_mean(p);
  long double s = 0;
  for (double v : p.values()) s += (v - m) * (v - m);
  return std::sqrt(static_cast<double>(s / (p.size() - 1)));
}

inline double naive_mad(const Patch& p) {
  const double m = naive_mean(p);
  long double s = 0;
  for (double v : p.values()) s += std::abs(v - m);
  return static_cast<double>(s / p.size());
}

}  // namespace irncc::testkit
