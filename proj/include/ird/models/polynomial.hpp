#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ird/model.hpp"

namespace ird {

/// y_i ~ Poisson(sum_{d=1}^{degree} theta_d x_i^d), flat priors on theta_d > 0.
class PolynomialPoissonModel {
 public:
  explicit PolynomialPoissonModel(int degree, CovariatePrior x_prior = CovariatePrior::uniform(0.0, 10.0))
      : degree_(degree), prior_(x_prior) {
    if (degree < 1 || degree > 3) throw ConfigError("polynomial degree must be 1, 2 or 3");
    if (prior_.kind == CovariatePrior::Kind::normal)
      throw ConfigError("polynomial model needs a covariate prior on the positive half-line");
  }

  std::string name() const { return "polynomial_poisson_" + std::to_string(degree_); }
  int degree() const noexcept { return degree_; }
  std::size_t theta_dim() const noexcept { return static_cast<std::size_t>(degree_); }
  std::size_t response_dim() const noexcept { return 1; }
  const CovariatePrior& x_prior() const noexcept { return prior_; }

  Interval covariate_support() const noexcept { return prior_.support(); }
  Interval theta_support(std::size_t) const noexcept { return Interval::positive(); }

  double mean(double x, std::span<const double> theta) const noexcept {
    double mu = 0.0, p = 1.0;
    for (int d = 0; d < degree_; ++d) {
      p *= x;
      mu += theta[static_cast<std::size_t>(d)] * p;
    }
    return mu;
  }

  double log_likelihood_case(std::span<const std::int64_t> y, double x, std::span<const double> theta) const noexcept {
    const double mu = mean(x, theta);
    if (!(mu > 0.0) || !std::isfinite(mu)) return kNegInf;
    return static_cast<double>(y[0]) * std::log(mu) - mu - log_factorial_int(y[0]);
  }

  double log_prior_theta(std::span<const double> theta) const noexcept {
    for (double t : theta)
      if (!(t > 0.0)) return kNegInf;
    return 0.0;
  }
  double log_prior_x(double x) const noexcept { return prior_.log_density(x); }

  // Split the moment estimate evenly across the polynomial terms.
  std::vector<double> initial_theta(const Dataset& data, std::size_t i) const {
    std::vector<double> theta(theta_dim());
    double sy = 0.0;
    std::vector<double> sxd(theta_dim(), 0.0);
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j == i) continue;
      sy += static_cast<double>(data.response(j)[0]);
      double p = 1.0;
      for (auto& s : sxd) s += (p *= data.covariate(j));
    }
    for (std::size_t d = 0; d < theta.size(); ++d)
      theta[d] = sxd[d] > 0.0 ? (sy + 0.5) / sxd[d] / static_cast<double>(degree_) : 1.0;
    return theta;
  }

  double initial_x(const Dataset& data, std::size_t i) const {
    return prior_.proper() ? prior_.median() : median_covariate_excluding(data, i);
  }

  /// Under the flat covariate prior the leave-one-out posterior needs at
  /// least one positive retained count; the x_tilde integral then behaves
  /// like the linear Poisson case near theta = 0.
  bool xval_proper(const Dataset& data, std::size_t i) const {
    if (prior_.proper()) return true;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (j != i && data.response(j)[0] > 0) return true;
    return false;
  }

  std::vector<std::int64_t> sample_response(double x, std::span<const double> theta, RngStream& rng) const {
    return {std::poisson_distribution<std::int64_t>(mean(x, theta))(rng)};
  }

 private:
  int degree_;
  CovariatePrior prior_;
};

}  // namespace ird
