#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ird/dataset.hpp"
#include "ird/errors.hpp"
#include "ird/math.hpp"
#include "ird/rng.hpp"

namespace ird {

/// Open interval (lower, upper); either end may be infinite.
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  static constexpr Interval positive() { return {0.0, kInf}; }
  static constexpr Interval real_line() { return {-kInf, kInf}; }

  bool contains(double v) const noexcept { return v > lower && v < upper; }
  bool is_positive_half_line() const noexcept { return lower == 0.0 && upper == kInf; }
  bool bounded() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Warning sink for recoverable oddities (floored Dirichlet weights, truncated
/// draw sets, improper conjugate forms). Set once before starting workers.
inline std::function<void(std::string_view)>& warning_handler() {
  static std::function<void(std::string_view)> handler = [](std::string_view msg) {
    std::clog << "warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(std::string_view msg) {
  if (auto& h = warning_handler()) h(msg);
}

/// Prior on an unknown covariate.
///
/// `flat` is the improper uniform density on (0, inf), represented as log
/// density 0 on its support and never normalized.
struct CovariatePrior {
  enum class Kind { uniform, exponential, flat, normal };

  Kind kind = Kind::flat;
  double a = 0.0;  // uniform lower, exponential mean, normal mean
  double b = 0.0;  // uniform upper, normal sd

  static CovariatePrior uniform(double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("uniform prior needs lower < upper");
    return {Kind::uniform, lo, hi};
  }
  static CovariatePrior exponential(double mean) {
    if (!(mean > 0.0)) throw ConfigError("exponential prior needs a positive mean");
    return {Kind::exponential, mean, 0.0};
  }
  static CovariatePrior flat_improper() { return {Kind::flat, 0.0, 0.0}; }
  static CovariatePrior normal(double mu, double sd) {
    if (!(sd > 0.0)) throw ConfigError("normal prior needs a positive sd");
    return {Kind::normal, mu, sd};
  }

  Interval support() const noexcept {
    switch (kind) {
      case Kind::uniform: return {a, b};
      case Kind::normal: return Interval::real_line();
      default: return Interval::positive();
    }
  }

  bool proper() const noexcept { return kind != Kind::flat; }

  double log_density(double x) const noexcept {
    if (!support().contains(x)) return kNegInf;
    switch (kind) {
      case Kind::uniform: return -std::log(b - a);
      case Kind::exponential: return -std::log(a) - x / a;
      case Kind::normal: {
        const double z = (x - a) / b;
        return -0.5 * z * z - std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi);
      }
      case Kind::flat: return 0.0;
    }
    return kNegInf;
  }

  /// Median for proper priors; NaN for the flat prior, which has none.
  double median() const noexcept {
    switch (kind) {
      case Kind::uniform: return 0.5 * (a + b);
      case Kind::exponential: return a * std::log(2.0);
      case Kind::normal: return a;
      case Kind::flat: return std::numeric_limits<double>::quiet_NaN();
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  double sample(RngStream& rng) const {
    switch (kind) {
      case Kind::uniform: return a + (b - a) * rng.uniform();
      case Kind::exponential: return -a * std::log(rng.uniform());
      case Kind::normal: return a + b * rng.normal();
      case Kind::flat: break;
    }
    throw ConfigError("cannot sample from an improper prior");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::uniform: return "uniform(" + std::to_string(a) + "," + std::to_string(b) + ")";
      case Kind::exponential: return "exponential(" + std::to_string(a) + ")";
      case Kind::normal: return "normal(" + std::to_string(a) + "," + std::to_string(b) + ")";
      case Kind::flat: return "flat";
    }
    return "?";
  }
};

/// Contract every inverse-regression model satisfies.
///
/// `log_likelihood_case` returns -inf exactly on support violations and is
/// never +inf or NaN. `initial_theta(data, i)` and `initial_x(data, i)` seed
/// chains for the leave-one-out problem with case `i` withheld.
template <class M>
concept InverseModel = requires(const M& m, std::span<const std::int64_t> y, double x,
                                std::span<const double> theta, const Dataset& data, std::size_t i) {
  { m.name() } -> std::convertible_to<std::string>;
  { m.theta_dim() } -> std::convertible_to<std::size_t>;
  { m.covariate_support() } -> std::same_as<Interval>;
  { m.theta_support(i) } -> std::same_as<Interval>;
  { m.log_likelihood_case(y, x, theta) } -> std::convertible_to<double>;
  { m.log_prior_theta(theta) } -> std::convertible_to<double>;
  { m.log_prior_x(x) } -> std::convertible_to<double>;
  { m.initial_theta(data, i) } -> std::convertible_to<std::vector<double>>;
  { m.initial_x(data, i) } -> std::convertible_to<double>;
};

/// Optional: models that can simulate a response at (x, theta).
template <class M>
concept ResponseSampler = InverseModel<M> && requires(const M& m, double x, std::span<const double> theta,
                                                      RngStream& rng) {
  { m.sample_response(x, theta, rng) } -> std::convertible_to<std::vector<std::int64_t>>;
};

/// Optional sampler hints: proposal step for x and each theta coordinate,
/// on the transformed (log, for positive coordinates) scale.
template <class M>
concept HasSamplerHints = requires(const M& m, std::size_t k) {
  { m.x_proposal_scale() } -> std::convertible_to<double>;
  { m.theta_proposal_scale(k) } -> std::convertible_to<double>;
};

/// Whether the leave-one-out posterior of case `i` is proper. Models with
/// proper priors need not provide `xval_proper`.
template <InverseModel M>
bool xval_posterior_proper(const M& model, const Dataset& data, std::size_t i) {
  if constexpr (requires { { model.xval_proper(data, i) } -> std::convertible_to<bool>; })
    return model.xval_proper(data, i);
  else
    return true;
}

namespace detail {

template <InverseModel M>
void check_theta(const M& model, std::span<const double> theta) {
  if (theta.size() != model.theta_dim())
    throw DimensionError("theta has length " + std::to_string(theta.size()) + ", model " +
                         std::string(model.name()) + " expects " + std::to_string(model.theta_dim()));
}

template <InverseModel M>
bool theta_in_support(const M& model, std::span<const double> theta) {
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (!model.theta_support(k).contains(theta[k])) return false;
  return true;
}

template <InverseModel M>
void check_response_dim(const M& model, const Dataset& data) {
  if constexpr (requires { { model.response_dim() } -> std::convertible_to<std::size_t>; }) {
    if (model.response_dim() != data.response_dim())
      throw DimensionError("dataset response dimension does not match model " + std::string(model.name()));
  }
}

}  // namespace detail

/// Log prior of theta plus the log-likelihood of every case except `i`
/// at its observed covariate. Pass i >= n to keep every case.
template <InverseModel M>
double log_retained_kernel(const M& model, const Dataset& data, std::size_t i, std::span<const double> theta) {
  if (!detail::theta_in_support(model, theta)) return kNegInf;
  double acc = model.log_prior_theta(theta);
  if (acc == kNegInf) return acc;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (j == i) continue;
    const double l = model.log_likelihood_case(data.response(j), data.covariate(j), theta);
    if (l == kNegInf) return kNegInf;
    acc += l;
  }
  return acc;
}

/// Log prior of x_tilde plus the log-likelihood of `y` at x_tilde.
template <InverseModel M>
double log_case_kernel(const M& model, std::span<const std::int64_t> y, double x_tilde,
                       std::span<const double> theta) {
  if (!model.covariate_support().contains(x_tilde)) return kNegInf;
  const double p = model.log_prior_x(x_tilde);
  if (p == kNegInf) return kNegInf;
  const double l = model.log_likelihood_case(y, x_tilde, theta);
  return l == kNegInf ? kNegInf : p + l;
}

/// Unnormalized log density of (x_tilde_i, theta) given X_{-i} and Y:
/// log[pi(x_tilde, theta) f(y_i | x_tilde, theta) prod_{j != i} f(y_j | x_j, theta)].
template <InverseModel M>
double log_xval_kernel(const M& model, const Dataset& data, std::size_t i, double x_tilde,
                       std::span<const double> theta) {
  detail::check_theta(model, theta);
  detail::check_response_dim(model, data);
  if (i >= data.size()) throw DimensionError("case index " + std::to_string(i) + " out of range");
  if (!detail::theta_in_support(model, theta)) return kNegInf;
  const double c = log_case_kernel(model, data.response(i), x_tilde, theta);
  if (c == kNegInf) return kNegInf;
  const double r = log_retained_kernel(model, data, i, theta);
  return r == kNegInf ? kNegInf : c + r;
}

/// Joint log kernel log[pi(X_tilde, theta) L(Y, X_tilde, theta)] with every
/// covariate replaced. Meant for small-instance checks.
template <InverseModel M>
double log_full_kernel(const M& model, const Dataset& data, std::span<const double> x_tilde_all,
                       std::span<const double> theta) {
  detail::check_theta(model, theta);
  detail::check_response_dim(model, data);
  if (x_tilde_all.size() != data.size())
    throw DimensionError("x_tilde_all has length " + std::to_string(x_tilde_all.size()) + ", dataset has " +
                         std::to_string(data.size()) + " cases");
  if (!detail::theta_in_support(model, theta)) return kNegInf;
  double acc = model.log_prior_theta(theta);
  if (acc == kNegInf) return acc;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double c = log_case_kernel(model, data.response(j), x_tilde_all[j], theta);
    if (c == kNegInf) return kNegInf;
    acc += c;
  }
  return acc;
}

/// Median of the covariates with case `i` removed; the fallback starting point
/// for x_tilde under a prior without a median.
inline double median_covariate_excluding(const Dataset& data, std::size_t i) {
  std::vector<double> xs;
  for (std::size_t j = 0; j < data.size(); ++j)
    if (j != i) xs.push_back(data.covariate(j));
  if (xs.empty()) xs.assign(data.covariates().begin(), data.covariates().end());
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace ird
