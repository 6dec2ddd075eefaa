#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ird/model.hpp"

namespace ird {

/// y_i ~ Geometric(p_i), p_i = 1 / (1 + theta x_i), on {0, 1, 2, ...}:
/// P(y) = p (1 - p)^y, mean theta x, variance theta x (1 + theta x).
/// Flat prior on theta > 0.
class GeometricModel {
 public:
  explicit GeometricModel(CovariatePrior x_prior = CovariatePrior::uniform(1.0, 2.0)) : prior_(x_prior) {
    if (prior_.kind == CovariatePrior::Kind::normal)
      throw ConfigError("geometric model needs a covariate prior on the positive half-line");
  }

  std::string name() const { return "geometric"; }
  std::size_t theta_dim() const noexcept { return 1; }
  std::size_t response_dim() const noexcept { return 1; }
  const CovariatePrior& x_prior() const noexcept { return prior_; }

  Interval covariate_support() const noexcept { return prior_.support(); }
  Interval theta_support(std::size_t) const noexcept { return Interval::positive(); }

  double log_likelihood_case(std::span<const std::int64_t> y, double x, std::span<const double> theta) const noexcept {
    const double mu = theta[0] * x;
    if (!(mu > 0.0) || !std::isfinite(mu)) return kNegInf;
    const double k = static_cast<double>(y[0]);
    return k * std::log(mu) - (k + 1.0) * std::log1p(mu);
  }

  double log_prior_theta(std::span<const double> theta) const noexcept { return theta[0] > 0.0 ? 0.0 : kNegInf; }
  double log_prior_x(double x) const noexcept { return prior_.log_density(x); }

  std::vector<double> initial_theta(const Dataset& data, std::size_t i) const {
    double sy = 0.0, sx = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j == i) continue;
      sy += static_cast<double>(data.response(j)[0]);
      sx += data.covariate(j);
    }
    if (!(sx > 0.0)) return {1.0};
    return {(sy + 0.5) / sx};
  }

  double initial_x(const Dataset& data, std::size_t i) const {
    return prior_.proper() ? prior_.median() : median_covariate_excluding(data, i);
  }

  // f(y | x, theta) depends on x only through theta * x, so with a flat
  // covariate prior the integral over x_tilde diverges for every case.
  bool xval_proper(const Dataset&, std::size_t) const noexcept { return prior_.proper(); }

  std::vector<std::int64_t> sample_response(double x, std::span<const double> theta, RngStream& rng) const {
    return {std::geometric_distribution<std::int64_t>(1.0 / (1.0 + theta[0] * x))(rng)};
  }

 private:
  CovariatePrior prior_;
};

}  // namespace ird
