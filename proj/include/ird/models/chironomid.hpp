#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ird/model.hpp"

namespace ird {

inline constexpr double kDirichletFloor = 1e-12;

/// Multinomial-Dirichlet species/climate model with unimodal response curves.
struct ChironomidSpec {
  std::size_t n_sites = 62;
  std::size_t m_species = 52;
  std::int64_t site_total = 100;
  double alpha_lower = 0.1, alpha_upper = 50.0;
  double beta_mean = 11.19, beta_sd = 1.57;
  double gamma_shape = 9.0, gamma_rate = 3.0;  // mean 3, variance 1
  double x_mean = 11.19, x_sd = 1.11;

  void validate() const {
    if (n_sites < 2) throw ConfigError("chironomid model needs at least 2 sites");
    if (m_species < 2) throw ConfigError("chironomid model needs at least 2 species");
    if (site_total < 1) throw ConfigError("site totals must be positive");
    if (!(alpha_lower > 0.0 && alpha_lower < alpha_upper)) throw ConfigError("bad alpha prior range");
    if (!(beta_sd > 0.0 && x_sd > 0.0 && gamma_shape > 0.0 && gamma_rate > 0.0))
      throw ConfigError("chironomid prior scales must be positive");
  }
};

/// Response level alpha exp(-((x - beta) / gamma)^2).
inline double response_function(double x, double alpha, double beta, double gamma) noexcept {
  const double z = (x - beta) / gamma;
  return alpha * std::exp(-z * z);
}

/// The Dirichlet relative abundances are integrated out, leaving a
/// Dirichlet-multinomial likelihood per site; theta holds the species
/// parameters laid out as [alpha_1..alpha_m, beta_1..beta_m, gamma_1..gamma_m].
class ChironomidModel {
 public:
  explicit ChironomidModel(ChironomidSpec spec = {}) : spec_(spec) {
    spec_.validate();
    log_alpha_density_ = -std::log(spec_.alpha_upper - spec_.alpha_lower);
    log_gamma_norm_ = spec_.gamma_shape * std::log(spec_.gamma_rate) - log_gamma(spec_.gamma_shape);
  }

  std::string name() const { return "chironomid"; }
  const ChironomidSpec& spec() const noexcept { return spec_; }
  std::size_t species() const noexcept { return spec_.m_species; }
  std::size_t theta_dim() const noexcept { return 3 * spec_.m_species; }
  std::size_t response_dim() const noexcept { return spec_.m_species; }

  Interval covariate_support() const noexcept { return Interval::real_line(); }
  Interval theta_support(std::size_t k) const noexcept {
    const std::size_t m = spec_.m_species;
    if (k < m) return {spec_.alpha_lower, spec_.alpha_upper};
    if (k < 2 * m) return Interval::real_line();
    return Interval::positive();
  }

  double log_likelihood_case(std::span<const std::int64_t> y, double x, std::span<const double> theta) const noexcept {
    const std::size_t m = spec_.m_species;
    if (!std::isfinite(x)) return kNegInf;
    double conc = 0.0, acc = 0.0;
    std::int64_t total = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const double lambda = std::max(response_function(x, theta[k], theta[m + k], theta[2 * m + k]), kDirichletFloor);
      conc += lambda;
      if (y[k] > 0) {
        acc += log_gamma(lambda + static_cast<double>(y[k])) - log_gamma(lambda) - log_factorial_int(y[k]);
        total += y[k];
      }
    }
    acc += log_factorial_int(total) + log_gamma(conc) - log_gamma(conc + static_cast<double>(total));
    return std::isfinite(acc) ? acc : kNegInf;
  }

  double log_prior_theta(std::span<const double> theta) const noexcept {
    const std::size_t m = spec_.m_species;
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double a = theta[k], b = theta[m + k], g = theta[2 * m + k];
      if (!(a > spec_.alpha_lower && a < spec_.alpha_upper) || !(g > 0.0)) return kNegInf;
      const double zb = (b - spec_.beta_mean) / spec_.beta_sd;
      acc += log_alpha_density_ - 0.5 * zb * zb + log_gamma_norm_ + (spec_.gamma_shape - 1.0) * std::log(g) -
             spec_.gamma_rate * g;
    }
    return acc - static_cast<double>(m) * (std::log(spec_.beta_sd) + 0.5 * std::log(2.0 * std::numbers::pi));
  }

  double log_prior_x(double x) const noexcept {
    return CovariatePrior::normal(spec_.x_mean, spec_.x_sd).log_density(x);
  }

  std::vector<double> initial_theta(const Dataset& data, std::size_t i) const {
    const std::size_t m = spec_.m_species;
    std::vector<double> share(m, 0.0), weighted_x(m, 0.0), weight(m, 0.0);
    std::size_t sites = 0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j == i) continue;
      ++sites;
      const auto y = data.response(j);
      const double tot = std::max<double>(1.0, static_cast<double>(data.response_total(j)));
      for (std::size_t k = 0; k < m; ++k) {
        const double p = static_cast<double>(y[k]) / tot;
        share[k] += p;
        weighted_x[k] += p * data.covariate(j);
        weight[k] += p;
      }
    }
    std::vector<double> theta(3 * m);
    for (std::size_t k = 0; k < m; ++k) {
      const double mean_share = sites > 0 ? share[k] / static_cast<double>(sites) : 1.0 / static_cast<double>(m);
      theta[k] = std::clamp(25.0 * static_cast<double>(m) * mean_share, spec_.alpha_lower + 0.4, spec_.alpha_upper - 5.0);
      theta[m + k] = weight[k] > 0.0 ? weighted_x[k] / weight[k] : spec_.beta_mean;
      theta[2 * m + k] = spec_.gamma_shape / spec_.gamma_rate;
    }
    return theta;
  }

  double initial_x(const Dataset&, std::size_t) const { return spec_.x_mean; }

  double x_proposal_scale() const noexcept { return 0.5; }
  double theta_proposal_scale(std::size_t k) const noexcept {
    const std::size_t m = spec_.m_species;
    if (k < m) return 2.0;
    if (k < 2 * m) return 0.5;
    return 0.2;
  }

 private:
  ChironomidSpec spec_;
  double log_alpha_density_ = 0.0;
  double log_gamma_norm_ = 0.0;
};

/// Dirichlet draw via normalized gammas; weights below kDirichletFloor are
/// floored and reported.
inline std::vector<double> sample_dirichlet(std::span<const double> weights, RngStream& rng) {
  std::vector<double> p(weights.size());
  bool floored = false;
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    double w = weights[k];
    if (!(w >= kDirichletFloor)) {
      w = kDirichletFloor;
      floored = true;
    }
    p[k] = std::gamma_distribution<double>(w, 1.0)(rng);
    sum += p[k];
  }
  if (floored) warn("Dirichlet weight below 1e-12 floored");
  if (!(sum > 0.0)) {
    // Every component underflowed; fall back to the largest weight.
    const auto top = std::max_element(weights.begin(), weights.end()) - weights.begin();
    std::fill(p.begin(), p.end(), 0.0);
    p[static_cast<std::size_t>(top)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline std::vector<std::int64_t> sample_multinomial(std::int64_t total, std::span<const double> p, RngStream& rng) {
  std::vector<std::int64_t> counts(p.size(), 0);
  double remaining_mass = 1.0;
  std::int64_t remaining = total;
  for (std::size_t k = 0; k + 1 < p.size() && remaining > 0; ++k) {
    const double q = remaining_mass > 0.0 ? std::clamp(p[k] / remaining_mass, 0.0, 1.0) : 0.0;
    counts[k] = std::binomial_distribution<std::int64_t>(remaining, q)(rng);
    remaining -= counts[k];
    remaining_mass -= p[k];
  }
  if (!p.empty()) counts.back() += remaining;
  return counts;
}

struct ChironomidSample {
  Dataset data;
  std::vector<double> psi;  // true species parameters, model theta layout
};

/// Draws species parameters from the priors, site climates from the
/// covariate prior, then abundances and counts with fixed site totals.
inline ChironomidSample simulate_chironomid_with_truth(const ChironomidSpec& spec, RngStream& rng) {
  spec.validate();
  const std::size_t m = spec.m_species, n = spec.n_sites;
  std::vector<double> psi(3 * m);
  std::gamma_distribution<double> tolerance(spec.gamma_shape, 1.0 / spec.gamma_rate);
  for (std::size_t k = 0; k < m; ++k) {
    psi[k] = spec.alpha_lower + (spec.alpha_upper - spec.alpha_lower) * rng.uniform();
    psi[m + k] = spec.beta_mean + spec.beta_sd * rng.normal();
    psi[2 * m + k] = tolerance(rng);
  }
  std::vector<double> xs(n);
  std::vector<std::int64_t> counts;
  counts.reserve(n * m);
  std::vector<double> lambda(m);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = spec.x_mean + spec.x_sd * rng.normal();
    for (std::size_t k = 0; k < m; ++k) lambda[k] = response_function(xs[i], psi[k], psi[m + k], psi[2 * m + k]);
    const auto p = sample_dirichlet(lambda, rng);
    const auto y = sample_multinomial(spec.site_total, p, rng);
    counts.insert(counts.end(), y.begin(), y.end());
  }
  return {Dataset(std::move(counts), m, std::move(xs)), std::move(psi)};
}

inline Dataset simulate_chironomid(const ChironomidSpec& spec, RngStream& rng) {
  return simulate_chironomid_with_truth(spec, rng).data;
}

}  // namespace ird
