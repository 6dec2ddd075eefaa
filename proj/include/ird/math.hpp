#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <limits>
#include <span>

namespace ird {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// std::lgamma writes the global signgam on glibc; the reentrant form keeps
// concurrent replicates race-free.
inline double log_gamma(double v) noexcept {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(v, &sign);
#else
  return std::lgamma(v);
#endif
}

inline double log_factorial(double k) noexcept { return log_gamma(k + 1.0); }

inline double log_sum_exp(std::span<const double> values) noexcept {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace ird

namespace ird {

/// log(k!) for non-negative integer k, tabulated for the small counts that
/// dominate every likelihood evaluation.
inline double log_factorial_int(std::int64_t k) noexcept {
  static const auto table = [] {
    std::array<double, 1024> t{};
    for (std::size_t v = 0; v < t.size(); ++v) t[v] = log_gamma(static_cast<double>(v) + 1.0);
    return t;
  }();
  if (k >= 0 && k < static_cast<std::int64_t>(table.size())) return table[static_cast<std::size_t>(k)];
  return log_gamma(static_cast<double>(k) + 1.0);
}

}  // namespace ird
