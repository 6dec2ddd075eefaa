#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ird/errors.hpp"
#include "ird/model.hpp"
#include "ird/rng.hpp"
#include "ird/stats.hpp"

namespace ird {

/// Random-walk Metropolis-Hastings settings.
///
/// Retained draws are iterations t in [burn_in, n_iterations) with
/// (t - burn_in + 1) divisible by thin. `proposal_scales`, when given, lists
/// x_tilde first and then each theta coordinate (transformed scale). Proposal
/// scales adapt toward `adapt_target_acceptance` during burn-in only.
struct MCMCConfig {
  std::size_t n_iterations = 10000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::vector<double> proposal_scales;
  bool adapt = true;
  double adapt_target_acceptance = 0.44;

  std::size_t retained() const noexcept {
    return n_iterations > burn_in && thin > 0 ? (n_iterations - burn_in) / thin : 0;
  }

  void validate() const {
    if (n_iterations == 0) throw ConfigError("n_iterations must be positive");
    if (burn_in >= n_iterations) throw ConfigError("burn_in must be smaller than n_iterations");
    if (thin == 0) throw ConfigError("thin must be positive");
    if (retained() < 1) throw ConfigError("configuration retains no draws");
    if (!(adapt_target_acceptance > 0.0 && adapt_target_acceptance < 1.0))
      throw ConfigError("adapt_target_acceptance must lie in (0, 1)");
    for (double s : proposal_scales)
      if (!(s > 0.0)) throw ConfigError("proposal scales must be positive");
  }
};

/// Retained draws of (x_tilde, theta) from one chain.
struct Chain {
  std::size_t theta_dim = 0;
  std::vector<std::size_t> iterations;
  std::vector<double> x_tilde;
  std::vector<double> theta;  // row-major, size() x theta_dim
  std::vector<double> acceptance_rates;  // x_tilde first, then theta
  std::vector<double> log_kernel_trace;

  std::size_t size() const noexcept { return x_tilde.size(); }
  std::span<const double> theta_at(std::size_t k) const {
    return std::span<const double>(theta).subspan(k * theta_dim, theta_dim);
  }
  /// Column of coordinate c (0 = x_tilde, 1.. = theta).
  std::vector<double> coordinate(std::size_t c) const {
    if (c == 0) return x_tilde;
    std::vector<double> out(size());
    for (std::size_t k = 0; k < size(); ++k) out[k] = theta[k * theta_dim + c - 1];
    return out;
  }
};

namespace detail {

struct RunPlan {
  std::size_t iterations;
  std::size_t burn_in;
  std::size_t thin;
};

inline double default_scale(const Interval& support) {
  if (support.is_positive_half_line()) return 0.5;
  if (support.bounded()) return 0.25 * (support.upper - support.lower);
  return 1.0;
}

struct MHOutput {
  std::vector<std::size_t> iterations;
  std::vector<double> draws;  // row-major, retained x dim
  std::vector<double> log_kernel;
  std::vector<double> acceptance;  // over retained iterations
  std::vector<double> scales;  // after adaptation
  std::vector<double> final_state;
  double final_log_kernel = kNegInf;
};

/// Coordinate-wise Gaussian random walk. Positive half-line coordinates move
/// on the log scale with the Jacobian term; other coordinates move directly
/// and out-of-support proposals are rejected through the target.
///
/// Target must provide `double propose(std::span<const double> state,
/// std::size_t changed)` returning the full log density and caching whatever
/// it needs, and `void accept()` committing that cache. `changed` is npos for
/// a full evaluation.
template <class Target>
MHOutput run_mh(Target& target, std::vector<double> state, double log_kernel, std::span<const Interval> supports,
                std::vector<double> scales, const RunPlan& plan, bool adapt, double target_rate, RngStream& rng,
                std::size_t adapt_clock_start = 0) {
  const std::size_t dim = state.size();
  std::vector<bool> log_scale(dim);
  for (std::size_t c = 0; c < dim; ++c) log_scale[c] = supports[c].is_positive_half_line();
  std::vector<double> log_s(dim);
  for (std::size_t c = 0; c < dim; ++c) log_s[c] = std::log(scales[c]);

  MHOutput out;
  const std::size_t keep = plan.iterations > plan.burn_in ? (plan.iterations - plan.burn_in) / plan.thin : 0;
  out.draws.reserve(keep * dim);
  out.log_kernel.reserve(keep);
  out.iterations.reserve(keep);
  std::vector<std::size_t> accepted(dim, 0);
  std::size_t post_burn = 0;

  for (std::size_t t = 0; t < plan.iterations; ++t) {
    const bool burning = t < plan.burn_in;
    for (std::size_t c = 0; c < dim; ++c) {
      const double old = state[c];
      const double step = std::exp(log_s[c]) * rng.normal();
      double jacobian = 0.0;
      if (log_scale[c]) {
        state[c] = old * std::exp(step);
        jacobian = step;
      } else {
        state[c] = old + step;
      }
      bool ok = false;
      if (supports[c].contains(state[c])) {
        const double prop = target.propose(state, c);
        if (prop != kNegInf && std::log(rng.uniform()) < prop - log_kernel + jacobian) {
          target.accept();
          log_kernel = prop;
          ok = true;
        }
      }
      if (!ok) state[c] = old;
      if (burning) {
        if (adapt) {
          const double gain = std::pow(static_cast<double>(adapt_clock_start + t + 1), -0.6);
          log_s[c] += gain * ((ok ? 1.0 : 0.0) - target_rate);
          log_s[c] = std::clamp(log_s[c], -30.0, 10.0);
        }
      } else if (ok) {
        ++accepted[c];
      }
    }
    if (!burning) {
      ++post_burn;
      if ((t - plan.burn_in + 1) % plan.thin == 0) {
        out.iterations.push_back(t);
        out.draws.insert(out.draws.end(), state.begin(), state.end());
        out.log_kernel.push_back(log_kernel);
      }
    }
  }
  out.acceptance.resize(dim);
  for (std::size_t c = 0; c < dim; ++c)
    out.acceptance[c] = post_burn > 0 ? static_cast<double>(accepted[c]) / static_cast<double>(post_burn) : 0.0;
  out.scales.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) out.scales[c] = std::exp(log_s[c]);
  out.final_state = std::move(state);
  out.final_log_kernel = log_kernel;
  return out;
}

inline std::string coordinate_name(std::size_t c) {
  return c == 0 ? std::string("x_tilde") : "theta[" + std::to_string(c - 1) + "]";
}

/// Leave-one-out target over (x_tilde_i, theta). Updating x_tilde leaves the
/// retained-case sum untouched.
template <InverseModel M>
class XValTarget {
 public:
  XValTarget(const M& model, const Dataset& data, std::size_t i) : model_(model), data_(data), i_(i) {}

  double propose(std::span<const double> s, std::size_t changed) {
    const auto theta = s.subspan(1);
    prop_case_ = log_case_kernel(model_, data_.response(i_), s[0], theta);
    prop_retained_ = changed == 0 ? cur_retained_ : log_retained_kernel(model_, data_, i_, theta);
    if (prop_case_ == kNegInf || prop_retained_ == kNegInf) return kNegInf;
    return prop_case_ + prop_retained_;
  }
  void accept() {
    cur_case_ = prop_case_;
    cur_retained_ = prop_retained_;
  }

  // Name the first coordinate that makes the kernel vanish.
  std::string diagnose(std::span<const double> s) const {
    const auto theta = s.subspan(1);
    for (std::size_t k = 0; k < theta.size(); ++k)
      if (!model_.theta_support(k).contains(theta[k])) return coordinate_name(k + 1);
    if (log_retained_kernel(model_, data_, i_, theta) == kNegInf) return "theta";
    return coordinate_name(0);
  }

 private:
  const M& model_;
  const Dataset& data_;
  std::size_t i_;
  double cur_case_ = 0.0, cur_retained_ = 0.0, prop_case_ = 0.0, prop_retained_ = 0.0;
};

/// pi(x_tilde) f(y | x_tilde, theta) at fixed theta.
template <InverseModel M>
class ConditionalTarget {
 public:
  ConditionalTarget(const M& model, std::span<const std::int64_t> y, std::span<const double> theta)
      : model_(model), y_(y), theta_(theta) {}
  double propose(std::span<const double> s, std::size_t) { return log_case_kernel(model_, y_, s[0], theta_); }
  void accept() {}

 private:
  const M& model_;
  std::span<const std::int64_t> y_;
  std::span<const double> theta_;
};

/// Starting point search: the model's guess, then support repairs, then
/// bounded random jitter around it.
template <class Target>
std::pair<std::vector<double>, double> find_initial_state(Target& target, std::vector<double> state,
                                                          std::span<const Interval> supports, RngStream& rng,
                                                          const std::function<std::string(std::span<const double>)>& diagnose) {
  auto eval = [&](const std::vector<double>& s) {
    for (std::size_t c = 0; c < s.size(); ++c)
      if (!supports[c].contains(s[c])) return kNegInf;
    const double v = target.propose(s, std::numeric_limits<std::size_t>::max());
    if (v != kNegInf) target.accept();
    return v;
  };
  double lk = eval(state);
  if (lk != kNegInf) return {state, lk};
  for (std::size_t c = 0; c < state.size(); ++c) {
    if (supports[c].contains(state[c])) continue;
    if (supports[c].bounded()) state[c] = 0.5 * (supports[c].lower + supports[c].upper);
    else if (supports[c].is_positive_half_line()) state[c] = 1.0;
    else state[c] = 0.0;
  }
  lk = eval(state);
  if (lk != kNegInf) return {state, lk};
  const std::vector<double> base = state;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double spread = 0.1 * (1 + attempt / 20);
    for (std::size_t c = 0; c < state.size(); ++c) {
      if (supports[c].is_positive_half_line()) state[c] = base[c] * std::exp(spread * 3.0 * rng.normal());
      else if (supports[c].bounded())
        state[c] = supports[c].lower + (supports[c].upper - supports[c].lower) * rng.uniform();
      else state[c] = base[c] + spread * 10.0 * rng.normal();
    }
    lk = eval(state);
    if (lk != kNegInf) return {state, lk};
  }
  const std::string coord = diagnose(base);
  throw InitializationError(coord, "no finite-kernel initial state found; offending coordinate " + coord);
}

template <InverseModel M>
std::vector<double> initial_scales(const M& model, const MCMCConfig& config, std::span<const Interval> supports) {
  const std::size_t dim = supports.size();
  if (!config.proposal_scales.empty()) {
    if (config.proposal_scales.size() != dim)
      throw DimensionError("proposal_scales has " + std::to_string(config.proposal_scales.size()) +
                           " entries, the chain has " + std::to_string(dim) + " coordinates");
    return config.proposal_scales;
  }
  std::vector<double> s(dim);
  for (std::size_t c = 0; c < dim; ++c) s[c] = default_scale(supports[c]);
  if constexpr (HasSamplerHints<M>) {
    s[0] = model.x_proposal_scale();
    for (std::size_t c = 1; c < dim; ++c) s[c] = model.theta_proposal_scale(c - 1);
  }
  return s;
}

template <InverseModel M>
std::vector<Interval> xval_supports(const M& model) {
  std::vector<Interval> sup;
  sup.push_back(model.covariate_support());
  for (std::size_t k = 0; k < model.theta_dim(); ++k) sup.push_back(model.theta_support(k));
  return sup;
}

}  // namespace detail

/// Samples (x_tilde_{i*}, theta) from the leave-one-out posterior of case
/// `i_star`. Deterministic given `rng`.
template <InverseModel M>
Chain run_pilot_chain(const M& model, const Dataset& data, std::size_t i_star, const MCMCConfig& config,
                      RngStream& rng) {
  config.validate();
  detail::check_response_dim(model, data);
  if (i_star >= data.size()) throw DimensionError("pilot case index out of range");
  const auto supports = detail::xval_supports(model);
  detail::XValTarget<M> target(model, data, i_star);

  std::vector<double> init;
  init.push_back(model.initial_x(data, i_star));
  const auto th0 = model.initial_theta(data, i_star);
  if (th0.size() != model.theta_dim()) throw DimensionError("initial theta has the wrong length");
  init.insert(init.end(), th0.begin(), th0.end());

  auto [state, lk] = detail::find_initial_state(target, init, supports, rng,
                                                [&](std::span<const double> s) { return target.diagnose(s); });
  auto out = detail::run_mh(target, std::move(state), lk, supports, detail::initial_scales(model, config, supports),
                            {config.n_iterations, config.burn_in, config.thin}, config.adapt,
                            config.adapt_target_acceptance, rng);

  Chain chain;
  chain.theta_dim = model.theta_dim();
  const std::size_t dim = supports.size();
  const std::size_t n = out.log_kernel.size();
  chain.iterations = std::move(out.iterations);
  chain.x_tilde.resize(n);
  chain.theta.resize(n * chain.theta_dim);
  for (std::size_t k = 0; k < n; ++k) {
    chain.x_tilde[k] = out.draws[k * dim];
    std::copy_n(out.draws.begin() + static_cast<std::ptrdiff_t>(k * dim + 1), chain.theta_dim,
                chain.theta.begin() + static_cast<std::ptrdiff_t>(k * chain.theta_dim));
  }
  chain.acceptance_rates = std::move(out.acceptance);
  chain.log_kernel_trace = std::move(out.log_kernel);
  return chain;
}

/// Stateful sampler for pi(x_tilde | y_i, theta) that carries its position
/// and tuned step across successive values of theta.
template <InverseModel M>
class ConditionalXSampler {
 public:
  ConditionalXSampler(const M& model, std::span<const std::int64_t> y, const MCMCConfig& config,
                      std::optional<double> x_init = std::nullopt)
      : model_(model), y_(y), config_(config), supports_{model.covariate_support()} {
    if (config_.thin == 0) throw ConfigError("thin must be positive");
    x_ = x_init.value_or(std::numeric_limits<double>::quiet_NaN());
    if (!config_.proposal_scales.empty()) scale_ = config_.proposal_scales.front();
    else if constexpr (HasSamplerHints<M>) scale_ = model.x_proposal_scale();
    else scale_ = detail::default_scale(supports_[0]);
  }

  /// `count` retained draws at fixed theta after `config.burn_in` warm-up
  /// iterations.
  std::vector<double> draw(std::span<const double> theta, std::size_t count, RngStream& rng) {
    detail::ConditionalTarget<M> target(model_, y_, theta);
    std::vector<double> start{std::isnan(x_) ? start_point() : x_};
    auto [state, lk] = detail::find_initial_state(target, start, supports_, rng,
                                                  [](std::span<const double>) { return std::string("x_tilde"); });
    const detail::RunPlan plan{config_.burn_in + count * config_.thin, config_.burn_in, config_.thin};
    auto out = detail::run_mh(target, std::move(state), lk, supports_, std::vector<double>{scale_}, plan,
                              config_.adapt, config_.adapt_target_acceptance, rng, clock_);
    clock_ += config_.burn_in;
    scale_ = out.scales[0];
    x_ = out.final_state[0];
    return std::move(out.draws);
  }

 private:
  double start_point() const {
    const auto prior_median = [&] {
      if constexpr (requires { model_.x_prior(); }) return model_.x_prior().median();
      else return std::numeric_limits<double>::quiet_NaN();
    }();
    if (std::isfinite(prior_median)) return prior_median;
    if (supports_[0].bounded()) return 0.5 * (supports_[0].lower + supports_[0].upper);
    if (supports_[0].is_positive_half_line()) return 1.0;
    return 0.0;
  }

  const M& model_;
  std::span<const std::int64_t> y_;
  MCMCConfig config_;
  std::vector<Interval> supports_;
  double x_;
  double scale_;
  std::size_t clock_ = 0;
};

/// M draws from pi(x_tilde | y_i, theta) by random-walk MH at fixed theta.
/// Runs config.burn_in + M * config.thin iterations; n_iterations is unused.
template <InverseModel M>
std::vector<double> sample_conditional_x(const M& model, std::span<const std::int64_t> y_i,
                                         std::span<const double> theta, std::size_t count, const MCMCConfig& config,
                                         RngStream& rng, std::optional<double> x_init = std::nullopt) {
  detail::check_theta(model, theta);
  if (count == 0) throw ConfigError("M must be positive");
  if (!detail::theta_in_support(model, theta)) throw DimensionError("theta lies outside the model support");
  ConditionalXSampler<M> sampler(model, y_i, config, x_init);
  return sampler.draw(theta, count, rng);
}

struct CoordinateDiagnostics {
  std::string name;
  double ess = 0.0;
  double split_rhat = 1.0;
  double acceptance = 0.0;
  bool degenerate = false;  // zero variance: ESS and R-hat undefined
  bool antithetic = false;  // ESS exceeds the draw count
};

struct ChainDiagnostics {
  std::size_t draws = 0;
  std::vector<CoordinateDiagnostics> coordinates;
};

/// Effective sample size with Geyer's initial monotone positive sequence.
/// Negative-correlation chains may report ESS above N, capped at N log10 N.
/// Returns NaN for a constant series.
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) throw DimensionError("effective sample size needs at least 4 draws");
  const double m = stats::mean(x);
  double var0 = 0.0;
  for (double v : x) var0 += (v - m) * (v - m);
  var0 /= static_cast<double>(n);
  if (!(var0 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - m) * (x[t + lag] - m);
    return s / static_cast<double>(n) / var0;
  };
  double sum = rho(0) + rho(1);
  double prev = sum;
  for (std::size_t k = 2; k + 1 < n; k += 2) {
    double pair = rho(k) + rho(k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  double tau = -1.0 + 2.0 * sum;
  const double nd = static_cast<double>(n);
  tau = std::max(tau, 1.0 / std::log10(nd));
  return nd / tau;
}

/// Split-R-hat over the two halves of a single chain; NaN when constant.
inline double split_rhat(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) throw DimensionError("split R-hat needs at least 4 draws");
  const std::size_t h = n / 2;
  const auto a = x.subspan(0, h), b = x.subspan(n - h, h);
  const double ma = stats::mean(a), mb = stats::mean(b);
  const double w = 0.5 * (stats::variance(a) + stats::variance(b));
  if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double grand = 0.5 * (ma + mb);
  const double bvar = static_cast<double>(h) * ((ma - grand) * (ma - grand) + (mb - grand) * (mb - grand));
  const double hd = static_cast<double>(h);
  return std::sqrt(((hd - 1.0) / hd * w + bvar / hd) / w);
}

inline ChainDiagnostics diagnostics(const Chain& chain) {
  if (chain.size() < 4) throw DimensionError("diagnostics need at least 4 retained states");
  ChainDiagnostics d;
  d.draws = chain.size();
  for (std::size_t c = 0; c <= chain.theta_dim; ++c) {
    const auto col = chain.coordinate(c);
    CoordinateDiagnostics cd;
    cd.name = detail::coordinate_name(c);
    cd.acceptance = c < chain.acceptance_rates.size() ? chain.acceptance_rates[c] : 0.0;
    const double ess = effective_sample_size(col);
    if (std::isnan(ess)) {
      cd.degenerate = true;
      cd.ess = 0.0;
      cd.split_rhat = 1.0;
    } else {
      cd.ess = ess;
      cd.antithetic = ess > static_cast<double>(chain.size());
      cd.split_rhat = split_rhat(col);
    }
    d.coordinates.push_back(cd);
  }
  return d;
}

/// CSV `iter,x_tilde,theta_1,...,theta_p,log_kernel`.
inline void write_chain_csv(const Chain& chain, std::ostream& out) {
  out << "iter,x_tilde";
  for (std::size_t k = 1; k <= chain.theta_dim; ++k) out << ",theta_" << k;
  out << ",log_kernel\n" << std::setprecision(17);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    out << chain.iterations[k] << ',' << chain.x_tilde[k];
    for (double t : chain.theta_at(k)) out << ',' << t;
    out << ',' << chain.log_kernel_trace[k] << '\n';
  }
}

}  // namespace ird
