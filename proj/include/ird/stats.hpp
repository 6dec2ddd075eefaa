#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ird/errors.hpp"

namespace ird::stats {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw DimensionError("mean of an empty sequence");
  // Welford keeps large-magnitude draws from losing digits.
  double m = 0.0;
  std::size_t k = 0;
  for (double x : v) m += (x - m) / static_cast<double>(++k);
  return m;
}

/// Unbiased sample variance; 0 for a single value.
inline double variance(std::span<const double> v) {
  if (v.empty()) throw DimensionError("variance of an empty sequence");
  double m = 0.0, s = 0.0;
  std::size_t k = 0;
  for (double x : v) {
    ++k;
    const double d = x - m;
    m += d / static_cast<double>(k);
    s += d * (x - m);
  }
  return k > 1 ? s / static_cast<double>(k - 1) : 0.0;
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an ascending sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DimensionError("quantile of an empty sequence");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

struct Interval1D {
  double lower;
  double upper;
  double length() const noexcept { return upper - lower; }
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

/// Shortest window of an ascending sample holding ceil(level * J) points.
inline Interval1D shortest_window_sorted(std::span<const double> sorted, double level) {
  const std::size_t n = sorted.size();
  if (n == 0) throw DimensionError("credible window of an empty sample");
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9)), 1, n);
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a + k <= n; ++a) {
    const double w = sorted[a + k - 1] - sorted[a];
    if (w < width) {
      width = w;
      best = a;
    }
  }
  return {sorted[best], sorted[best + k - 1]};
}

// Kolmogorov limiting distribution: P(sqrt(n) D_n > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KSResult {
  double statistic;
  double p_value;
  bool passes(double level) const noexcept { return p_value > level; }
};

/// One-sample KS against a continuous CDF, with Stephens' finite-n correction.
inline KSResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DimensionError("KS test on an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    d = std::max({d, f - static_cast<double>(k) / n, static_cast<double>(k + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

inline KSResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DimensionError("KS test on an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

/// Wasserstein-1 distance between two empirical distributions.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DimensionError("Wasserstein distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Integrate |F_a - F_b| over the merged support.
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(a.front(), b.front());
  double dist = 0.0;
  while (i < a.size() || j < b.size()) {
    const double v = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    dist += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (v - prev);
    prev = v;
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
  }
  return dist;
}

}  // namespace ird::stats
