#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ird/errors.hpp"
#include "ird/math.hpp"
#include "ird/mcmc.hpp"
#include "ird/model.hpp"
#include "ird/parallel.hpp"
#include "ird/rng.hpp"

namespace ird {

struct IRMCMCConfig {
  std::optional<std::size_t> i_star;  // nullopt: select_pilot_case
  std::size_t K = 100;
  std::size_t M = 10;
  bool with_replacement = false;
  MCMCConfig pilot{};
  // Per resampled theta: burn_in warm-up iterations from the previous
  // position, then M retained draws spaced by thin. n_iterations is unused.
  MCMCConfig conditional{100, 20, 3, {}, true, 0.44};
  std::size_t jobs = 1;

  void validate() const {
    pilot.validate();
    if (K == 0) throw ConfigError("K must be positive");
    if (M == 0) throw ConfigError("M must be positive");
    if (conditional.thin == 0) throw ConfigError("conditional thin must be positive");
    if (!with_replacement && K > pilot.retained())
      throw ConfigError("K = " + std::to_string(K) + " exceeds the " + std::to_string(pilot.retained()) +
                        " retained pilot draws; resampling without replacement needs K <= N");
  }
};

/// Leave-one-out covariate draws for every case.
struct XValDraws {
  std::size_t theta_dim = 0;
  std::vector<std::vector<double>> per_case;        // x_tilde draws
  std::vector<std::vector<double>> per_case_theta;  // row-major theta draws
  std::vector<double> weight_ess;
  std::vector<double> max_weight_share;
  std::size_t pilot_case = std::numeric_limits<std::size_t>::max();  // max() when no pilot
  Chain pilot;

  std::size_t cases() const noexcept { return per_case.size(); }
};

/// Case whose covariate is closest to the median of X, smallest index on ties.
inline std::size_t select_pilot_case(const Dataset& data) {
  if (data.size() < 2) throw DimensionError("pilot case selection needs n >= 2");
  const double med = median_covariate_excluding(data, data.size());
  std::size_t best = 0;
  double best_d = std::abs(data.covariate(0) - med);
  for (std::size_t j = 1; j < data.size(); ++j) {
    const double d = std::abs(data.covariate(j) - med);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

/// log f(y*|x*,th) + log f(y_i|xt*,th) - log f(y*|xt*,th) - log f(y_i|x_i,th).
template <InverseModel M>
double importance_log_weight(const M& model, const Dataset& data, std::size_t i_star, std::size_t i,
                             double x_tilde_star, std::span<const double> theta) {
  if (i_star >= data.size() || i >= data.size()) throw DimensionError("case index out of range");
  detail::check_theta(model, theta);
  if (i == i_star) return 0.0;
  const auto ys = data.response(i_star), yi = data.response(i);
  const double a = model.log_likelihood_case(ys, data.covariate(i_star), theta);
  const double b = model.log_likelihood_case(yi, x_tilde_star, theta);
  const double c = model.log_likelihood_case(ys, x_tilde_star, theta);
  const double d = model.log_likelihood_case(yi, data.covariate(i), theta);
  if (a == kNegInf || b == kNegInf || c == kNegInf || d == kNegInf) return kNegInf;
  return a + b - c - d;
}

struct WeightSummary {
  double ess = 0.0;
  double max_share = 0.0;
  std::size_t finite = 0;
};

inline WeightSummary summarize_log_weights(std::span<const double> log_w) {
  WeightSummary s;
  double mx = kNegInf;
  for (double v : log_w)
    if (v != kNegInf) {
      ++s.finite;
      mx = std::max(mx, v);
    }
  if (s.finite == 0) return s;
  double sum = 0.0, sum2 = 0.0, top = 0.0;
  for (double v : log_w) {
    if (v == kNegInf) continue;
    const double w = std::exp(v - mx);
    sum += w;
    sum2 += w * w;
    top = std::max(top, w);
  }
  s.ess = sum * sum / sum2;
  s.max_share = top / sum;
  return s;
}

namespace detail {

// Fenwick tree over non-negative weights supporting removal and
// prefix-sum search.
class SumTree {
 public:
  explicit SumTree(std::span<const double> w) : n_(w.size()), tree_(w.size() + 1, 0.0), w_(w.begin(), w.end()) {
    for (std::size_t k = 0; k < n_; ++k) {
      tree_[k + 1] += w_[k];
      const std::size_t parent = (k + 1) + ((k + 1) & (~(k + 1) + 1));
      if (parent <= n_) tree_[parent] += tree_[k + 1];
    }
    for (double v : w_) total_ += v;
  }
  double total() const noexcept { return total_; }
  double weight(std::size_t k) const noexcept { return w_[k]; }

  void remove(std::size_t k) {
    const double v = w_[k];
    w_[k] = 0.0;
    total_ -= v;
    for (std::size_t j = k + 1; j <= n_; j += j & (~j + 1)) tree_[j] -= v;
  }

  // Smallest k with prefix(k + 1) > target.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 <= n_) step *= 2;
    for (; step > 0; step /= 2) {
      if (pos + step <= n_ && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    return std::min(pos, n_ - 1);
  }

 private:
  std::size_t n_;
  std::vector<double> tree_;
  std::vector<double> w_;
  double total_ = 0.0;
};

}  // namespace detail

/// K indices drawn proportionally to exp(log_weights). Without replacement,
/// each pick is removed and the rest renormalized before the next pick.
inline std::vector<std::size_t> resample_indices(std::span<const double> log_weights, std::size_t K,
                                                 bool with_replacement, RngStream& rng,
                                                 std::size_t case_index = 0) {
  if (K == 0) throw ConfigError("K must be positive");
  const auto summary = summarize_log_weights(log_weights);
  if (summary.finite == 0)
    throw DegeneracyError(case_index, 0.0, "all importance weights vanish for case " + std::to_string(case_index));
  if (!with_replacement && summary.finite < K)
    throw DegeneracyError(case_index, summary.ess,
                          "only " + std::to_string(summary.finite) + " finite importance weights for case " +
                              std::to_string(case_index) + ", K = " + std::to_string(K));
  double mx = kNegInf;
  for (double v : log_weights) mx = std::max(mx, v);
  std::vector<double> w(log_weights.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = log_weights[k] == kNegInf ? 0.0 : std::exp(log_weights[k] - mx);

  std::vector<std::size_t> out;
  out.reserve(K);
  detail::SumTree tree(w);
  if (with_replacement) {
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t idx = tree.find(rng.uniform() * tree.total());
      while (tree.weight(idx) == 0.0) idx = (idx + 1) % w.size();
      out.push_back(idx);
    }
    return out;
  }
  std::vector<bool> taken(w.size(), false);
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t idx = w.size();
    if (tree.total() > 0.0) {
      idx = tree.find(rng.uniform() * tree.total());
      if (taken[idx] || tree.weight(idx) == 0.0) idx = w.size();
    }
    if (idx == w.size()) {
      // Remaining mass lost to rounding or underflow: take the heaviest
      // remaining finite weight.
      double best = kNegInf;
      for (std::size_t j = 0; j < w.size(); ++j)
        if (!taken[j] && log_weights[j] != kNegInf && (idx == w.size() || log_weights[j] > best)) {
          best = log_weights[j];
          idx = j;
        }
    }
    taken[idx] = true;
    tree.remove(idx);
    out.push_back(idx);
  }
  return out;
}

namespace detail {

template <InverseModel M>
void require_proper(const M& model, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!xval_posterior_proper(model, data, i))
      throw ImproperPosteriorError(i, "leave-one-out posterior of case " + std::to_string(i) +
                                          " is improper under model " + std::string(model.name()));
}

}  // namespace detail

/// Importance-resampling MCMC: one pilot chain at i*, then for each other
/// case K reweighted pilot thetas with M conditional x_tilde draws each.
/// Case i uses the stream rng.derive(i); the pilot uses rng.derive(n).
template <InverseModel M>
XValDraws run_irmcmc(const M& model, const Dataset& data, const IRMCMCConfig& config, const RngStream& rng) {
  config.validate();
  detail::check_response_dim(model, data);
  const std::size_t n = data.size();
  if (n < 2) throw DimensionError("IRMCMC needs n >= 2");
  const std::size_t i_star = config.i_star.value_or(select_pilot_case(data));
  if (i_star >= n) throw DimensionError("i_star out of range");
  detail::require_proper(model, data);

  RngStream pilot_rng = rng.derive(n);
  XValDraws out;
  out.theta_dim = model.theta_dim();
  out.pilot_case = i_star;
  out.pilot = run_pilot_chain(model, data, i_star, config.pilot, pilot_rng);
  out.per_case.resize(n);
  out.per_case_theta.resize(n);
  out.weight_ess.assign(n, 0.0);
  out.max_weight_share.assign(n, 0.0);

  const Chain& pilot = out.pilot;
  const std::size_t N = pilot.size();
  const std::size_t p = out.theta_dim;
  const std::size_t KM = config.K * config.M;

  // The pilot case reads its draws straight off the chain, evenly spaced.
  out.weight_ess[i_star] = static_cast<double>(N);
  out.max_weight_share[i_star] = 1.0 / static_cast<double>(N);
  out.per_case[i_star].resize(KM);
  for (std::size_t k = 0; k < KM; ++k) out.per_case[i_star][k] = pilot.x_tilde[k * N / KM];
  for (std::size_t k = 0; k < config.K; ++k) {
    const auto th = pilot.theta_at(k * N / config.K);
    out.per_case_theta[i_star].insert(out.per_case_theta[i_star].end(), th.begin(), th.end());
  }

  parallel_for(n, config.jobs, [&](std::size_t i) {
    if (i == i_star) return;
    RngStream case_rng = rng.derive(i);
    std::vector<double> log_w(N);
    for (std::size_t s = 0; s < N; ++s)
      log_w[s] = importance_log_weight(model, data, i_star, i, pilot.x_tilde[s], pilot.theta_at(s));
    const auto summary = summarize_log_weights(log_w);
    out.weight_ess[i] = summary.ess;
    out.max_weight_share[i] = summary.max_share;
    const auto picks = resample_indices(log_w, config.K, config.with_replacement, case_rng, i);

    ConditionalXSampler<M> sampler(model, data.response(i), config.conditional, data.covariate(i));
    auto& xs = out.per_case[i];
    auto& ths = out.per_case_theta[i];
    xs.reserve(KM);
    ths.reserve(config.K * p);
    for (std::size_t idx : picks) {
      const auto th = pilot.theta_at(idx);
      ths.insert(ths.end(), th.begin(), th.end());
      const auto draws = sampler.draw(th, config.M, case_rng);
      xs.insert(xs.end(), draws.begin(), draws.end());
    }
  });
  return out;
}

/// n independent leave-one-out chains, one per case (stream rng.derive(i)).
template <InverseModel M>
XValDraws brute_force_xval(const M& model, const Dataset& data, const MCMCConfig& config, const RngStream& rng,
                           std::size_t jobs = 1) {
  config.validate();
  detail::check_response_dim(model, data);
  detail::require_proper(model, data);
  const std::size_t n = data.size();
  XValDraws out;
  out.theta_dim = model.theta_dim();
  out.per_case.resize(n);
  out.per_case_theta.resize(n);
  out.weight_ess.assign(n, static_cast<double>(config.retained()));
  out.max_weight_share.assign(n, 1.0 / static_cast<double>(config.retained()));
  parallel_for(n, jobs, [&](std::size_t i) {
    RngStream case_rng = rng.derive(i);
    Chain c = run_pilot_chain(model, data, i, config, case_rng);
    out.per_case[i] = std::move(c.x_tilde);
    out.per_case_theta[i] = std::move(c.theta);
  });
  return out;
}

/// CSV `case,draw_index,x_tilde`.
inline void write_xval_csv(const XValDraws& d, std::ostream& out) {
  out << "case,draw_index,x_tilde\n" << std::setprecision(17);
  for (std::size_t i = 0; i < d.cases(); ++i)
    for (std::size_t k = 0; k < d.per_case[i].size(); ++k) out << i << ',' << k << ',' << d.per_case[i][k] << '\n';
}

/// CSV `case,weight_ess,max_weight_share`.
inline void write_weight_csv(const XValDraws& d, std::ostream& out) {
  out << "case,weight_ess,max_weight_share\n" << std::setprecision(17);
  for (std::size_t i = 0; i < d.cases(); ++i)
    out << i << ',' << d.weight_ess[i] << ',' << d.max_weight_share[i] << '\n';
}

}  // namespace ird
