#pragma once

// Shared statistical helpers for the test binaries: Kolmogorov-Smirnov
// distances with their 95% critical values, and mean / standard-error
// reduction for Monte Carlo checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testutil {

// One-sample KS distance of `sample` against the CDF callable.
inline double ks_distance(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

// 95% critical value for the one-sample KS distance.
inline double ks_critical(std::size_t n) {
  return 1.358 / std::sqrt(static_cast<double>(n));
}

// Two-sample KS distance.  Ties (e.g. a shared atom) are consumed on both
// sides before the gap is measured, so the statistic compares the
// right-continuous empirical CDFs instead of a mid-tie walking state.
inline double ks_distance_two(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

// 95% critical value for the two-sample KS distance.
inline double ks_critical_two(std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return 1.358 * std::sqrt((nn + mm) / (nn * mm));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  const double m = s / n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / (n - 1.0) / n)};
}

// Standard error of a Bernoulli proportion estimate.
inline double binom_se(double p_hat, double n) {
  return std::sqrt(std::max(p_hat * (1.0 - p_hat), 1e-300) / n);
}

}  // namespace testutil
