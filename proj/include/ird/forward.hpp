#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ird/errors.hpp"
#include "ird/mcmc.hpp"
#include "ird/model.hpp"
#include "ird/models/poisson.hpp"
#include "ird/rng.hpp"

// Forward (response-space) leave-one-out predictives: for each case, draws of
// y_tilde_i from pi(y_tilde_i | X, Y_{-i}). They feed the same discrepancy
// machinery with Y in place of X.

namespace ird {

/// Per-case draws from the Poisson negative-binomial predictive, by
/// composition: theta ~ forward_theta_posterior(i), y ~ Poisson(theta x_i).
/// Case i uses rng.derive(i).
inline std::vector<std::vector<double>> forward_xval_poisson_exact(const Dataset& data, std::size_t draws,
                                                                    const RngStream& rng) {
  if (data.response_dim() != 1) throw DimensionError("forward Poisson predictive needs scalar responses");
  if (draws == 0) throw ConfigError("draw count must be positive");
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream r = rng.derive(i);
    const auto g = forward_theta_posterior(data, i);
    if (!(g.rate > 0.0)) throw ImproperPosteriorError(i, "retained covariates sum to zero");
    std::gamma_distribution<double> gamma(g.shape, 1.0 / g.rate);
    out[i].resize(draws);
    for (auto& y : out[i]) {
      const double mu = gamma(r) * data.covariate(i);
      y = mu > 0.0 ? static_cast<double>(std::poisson_distribution<std::int64_t>(mu)(r)) : 0.0;
    }
  }
  return out;
}

namespace detail {

template <InverseModel M>
class ForwardTarget {
 public:
  ForwardTarget(const M& model, const Dataset& data, std::size_t i) : model_(model), data_(data), i_(i) {}
  double propose(std::span<const double> theta, std::size_t) { return log_retained_kernel(model_, data_, i_, theta); }
  void accept() {}

 private:
  const M& model_;
  const Dataset& data_;
  std::size_t i_;
};

}  // namespace detail

/// Generic forward predictive: a theta chain targeting pi(theta | X, Y_{-i})
/// per case, one simulated response per retained state. Scalar responses.
template <ResponseSampler M>
std::vector<std::vector<double>> forward_xval_mcmc(const M& model, const Dataset& data, const MCMCConfig& config,
                                                   const RngStream& rng) {
  config.validate();
  if (data.response_dim() != 1) throw DimensionError("forward predictive checks need scalar responses");
  const std::size_t p = model.theta_dim();
  std::vector<Interval> supports;
  for (std::size_t k = 0; k < p; ++k) supports.push_back(model.theta_support(k));
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream r = rng.derive(i);
    detail::ForwardTarget<M> target(model, data, i);
    auto [state, lk] = detail::find_initial_state(target, model.initial_theta(data, i), supports, r,
                                                  [](std::span<const double>) { return std::string("theta"); });
    std::vector<double> scales(p);
    for (std::size_t k = 0; k < p; ++k) {
      if (config.proposal_scales.size() == p) scales[k] = config.proposal_scales[k];
      else if constexpr (HasSamplerHints<M>) scales[k] = model.theta_proposal_scale(k);
      else scales[k] = detail::default_scale(supports[k]);
    }
    auto run = detail::run_mh(target, std::move(state), lk, supports, scales,
                              {config.n_iterations, config.burn_in, config.thin}, config.adapt,
                              config.adapt_target_acceptance, r);
    const std::size_t n_kept = run.log_kernel.size();
    out[i].resize(n_kept);
    for (std::size_t k = 0; k < n_kept; ++k) {
      const std::span<const double> th(run.draws.data() + k * p, p);
      out[i][k] = static_cast<double>(model.sample_response(data.covariate(i), th, r)[0]);
    }
  }
  return out;
}

}  // namespace ird
