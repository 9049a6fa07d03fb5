#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "e2p/error.hpp"

namespace e2p {

/// Linear-interpolation percentile (numpy convention) over a sorted vector.
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorCategory::InvalidArgument, "percentile of empty set");
  if (sorted.size() == 1) return sorted[0];
  double pos = q / 100.0 * double(sorted.size() - 1);
  size_t lo = size_t(std::floor(pos));
  if (lo >= sorted.size() - 1) return sorted.back();
  double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, q);
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // population variance
};

inline MeanVar mean_var(const std::vector<double>& v) {
  MeanVar mv;
  if (v.empty()) return mv;
  for (double x : v) mv.mean += x;
  mv.mean /= double(v.size());
  for (double x : v) mv.var += (x - mv.mean) * (x - mv.mean);
  mv.var /= double(v.size());
  return mv;
}

}  // namespace e2p
