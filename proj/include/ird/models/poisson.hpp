#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ird/model.hpp"

namespace ird {

/// y_i ~ Poisson(theta * x_i) with the flat prior pi(theta) = 1 on theta > 0.
class PoissonModel {
 public:
  explicit PoissonModel(CovariatePrior x_prior = CovariatePrior::flat_improper()) : prior_(x_prior) {
    if (prior_.kind == CovariatePrior::Kind::normal)
      throw ConfigError("poisson model needs a covariate prior on the positive half-line");
    if (prior_.kind == CovariatePrior::Kind::uniform && prior_.a < 0.0)
      throw ConfigError("poisson model needs a non-negative covariate support");
  }

  std::string name() const { return "poisson"; }
  std::size_t theta_dim() const noexcept { return 1; }
  std::size_t response_dim() const noexcept { return 1; }
  const CovariatePrior& x_prior() const noexcept { return prior_; }

  Interval covariate_support() const noexcept { return prior_.support(); }
  Interval theta_support(std::size_t) const noexcept { return Interval::positive(); }

  double log_likelihood_case(std::span<const std::int64_t> y, double x, std::span<const double> theta) const noexcept {
    const double mu = theta[0] * x;
    if (!(mu > 0.0) || !std::isfinite(mu)) return kNegInf;
    const auto k = y[0];
    return static_cast<double>(k) * std::log(mu) - mu - log_factorial_int(k);
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

  /// Under the flat covariate prior the leave-one-out posterior is proper
  /// exactly when the retained counts are not all zero.
  bool xval_proper(const Dataset& data, std::size_t i) const {
    if (prior_.proper()) return true;
    std::int64_t retained = 0;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (j != i) retained += data.response(j)[0];
    return retained > 0;
  }

  std::vector<std::int64_t> sample_response(double x, std::span<const double> theta, RngStream& rng) const {
    return {std::poisson_distribution<std::int64_t>(theta[0] * x)(rng)};
  }

 private:
  CovariatePrior prior_;
};

/// Shape/rate parameterization: density  rate^shape theta^(shape-1) e^(-rate theta) / Gamma(shape).
struct GammaParams {
  double shape;
  double rate;
  bool proper() const noexcept { return shape > 0.0 && rate > 0.0; }
  double mean() const noexcept { return shape / rate; }
  double log_pdf(double t) const noexcept {
    if (!(t > 0.0)) return kNegInf;
    return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(t) - rate * t;
  }
};

namespace detail {

struct RetainedSums {
  double counts = 0.0;
  double covariates = 0.0;
};

inline RetainedSums retained_sums(const Dataset& data, std::size_t i) {
  if (data.response_dim() != 1) throw DimensionError("Poisson oracles need scalar responses");
  if (i >= data.size()) throw DimensionError("case index out of range");
  RetainedSums s;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (j == i) continue;
    s.counts += static_cast<double>(data.response(j)[0]);
    s.covariates += data.covariate(j);
  }
  return s;
}

}  // namespace detail

/// Exact cross-validation posterior of theta with x_i deleted (flat priors on
/// theta and x_tilde): Gamma(sum_{j!=i} y_j, sum_{j!=i} x_j).
inline GammaParams cv_theta_exact(const Dataset& data, std::size_t i) {
  const auto s = detail::retained_sums(data, i);
  GammaParams g{s.counts, s.covariates};
  if (!g.proper()) warn("cross-validation posterior of theta is improper for case " + std::to_string(i));
  return g;
}

/// Exact log density of the cross-validation posterior of x_tilde_i under
/// flat priors on theta and x_tilde.
inline double cv_x_exact_logpdf(const Dataset& data, std::size_t i, double x_tilde) {
  if (!(x_tilde > 0.0)) return kNegInf;
  const auto s = detail::retained_sums(data, i);
  const double yi = static_cast<double>(data.response(i)[0]);
  const double total = s.counts + yi;
  if (!(s.counts > 0.0)) return kNegInf;
  return s.counts * std::log(s.covariates) + log_gamma(total + 1.0) - log_gamma(yi + 1.0) - log_gamma(s.counts) +
         yi * std::log(x_tilde) - (total + 1.0) * std::log(x_tilde + s.covariates);
}

/// Posterior of theta given X and Y_{-i} under pi(theta) = 1: the retained
/// likelihood theta^a e^{-theta S} normalizes to Gamma(a + 1, S).
inline GammaParams forward_theta_posterior(const Dataset& data, std::size_t i) {
  const auto s = detail::retained_sums(data, i);
  return {s.counts + 1.0, s.covariates};
}

/// Leave-one-out forward predictive of y_i: Poisson(theta x_i) mixed over
/// forward_theta_posterior, i.e. negative binomial.
inline double forward_predictive_logpmf(const Dataset& data, std::size_t i, std::int64_t y_tilde) {
  if (y_tilde < 0) return kNegInf;
  const auto g = forward_theta_posterior(data, i);
  const double x = data.covariate(i);
  const double y = static_cast<double>(y_tilde);
  return log_gamma(y + g.shape) - log_gamma(g.shape) - log_factorial_int(y_tilde) +
         g.shape * std::log(g.rate / (g.rate + x)) + y * std::log(x / (g.rate + x));
}

}  // namespace ird
