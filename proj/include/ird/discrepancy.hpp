#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ird/errors.hpp"
#include "ird/irmcmc.hpp"
#include "ird/model.hpp"
#include "ird/stats.hpp"

namespace ird {

enum class Measure { T1, T2, T3 };

inline std::string to_string(Measure m) {
  switch (m) {
    case Measure::T1: return "T1";
    case Measure::T2: return "T2";
    case Measure::T3: return "T3";
  }
  return "?";
}

inline Measure parse_measure(const std::string& s) {
  if (s == "T1" || s == "t1") return Measure::T1;
  if (s == "T2" || s == "t2") return Measure::T2;
  if (s == "T3" || s == "t3") return Measure::T3;
  throw ConfigError("unknown discrepancy measure '" + s + "'");
}

namespace detail {

inline void check_measure_inputs(std::span<const double> x, std::span<const double> mean,
                                 std::span<const double> var) {
  if (x.size() != mean.size() || x.size() != var.size())
    throw DimensionError("x_obs, case_means and case_variances must have equal lengths");
  if (x.empty()) throw DimensionError("discrepancy of zero cases");
  for (std::size_t i = 0; i < var.size(); ++i)
    if (!(var[i] > 0.0))
      throw DegenerateCaseError(i, "cross-validation draws of case " + std::to_string(i) + " have zero variance");
}

}  // namespace detail

/// sum_i (x_i - E_i)^2 / V_i
inline double t1(std::span<const double> x, std::span<const double> mean, std::span<const double> var) {
  detail::check_measure_inputs(x, mean, var);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mean[i]) * (x[i] - mean[i]) / var[i];
  return s;
}

/// sum_i |x_i - E_i| / sd_i
inline double t2(std::span<const double> x, std::span<const double> mean, std::span<const double> var) {
  detail::check_measure_inputs(x, mean, var);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - mean[i]) / std::sqrt(var[i]);
  return s;
}

/// max_i |x_i - E_i| / sd_i
inline double t3(std::span<const double> x, std::span<const double> mean, std::span<const double> var) {
  detail::check_measure_inputs(x, mean, var);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s = std::max(s, std::abs(x[i] - mean[i]) / std::sqrt(var[i]));
  return s;
}

inline double evaluate(Measure m, std::span<const double> x, std::span<const double> mean,
                       std::span<const double> var) {
  switch (m) {
    case Measure::T1: return t1(x, mean, var);
    case Measure::T2: return t2(x, mean, var);
    case Measure::T3: return t3(x, mean, var);
  }
  return 0.0;
}

struct OutlierCheck {
  std::vector<stats::Interval1D> regions;
  bool inside = false;
};

/// Sorted-window HPD region of one case's draws and whether x_i falls in it.
///
/// A single shortest window is used unless it straddles an empty stretch
/// (a spacing far above what its point density predicts and at least a
/// tenth of the window); then the draws
/// are split at such stretches and each cluster gets its own window at the
/// same level.
inline OutlierCheck case_outlier_check(double x_i, std::span<const double> draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (draws.size() < 100) throw DimensionError("case outlier check needs at least 100 draws");
  std::vector<double> s(draws.begin(), draws.end());
  std::sort(s.begin(), s.end());
  const auto w = stats::shortest_window_sorted(s, level);
  const double J = static_cast<double>(s.size());
  const auto lo = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), w.lower) - s.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), w.upper) - s.begin());
  const double spacing = w.length() / static_cast<double>(std::max<std::size_t>(hi - lo, 2) - 1);
  const double threshold = std::max(4.0 * std::log(J) * spacing, 0.1 * w.length());

  std::vector<std::size_t> cuts;  // split after these sorted positions
  for (std::size_t k = lo; k + 1 < hi; ++k)
    if (s[k + 1] - s[k] > threshold && threshold > 0.0) cuts.push_back(k);

  OutlierCheck out;
  if (cuts.empty()) {
    out.regions.push_back(w);
  } else {
    // Cluster boundaries over the whole sample: cut at the wide gaps found
    // inside the window, extend the outer clusters to the sample ends.
    std::size_t start = 0;
    cuts.push_back(s.size() - 1);
    for (std::size_t c : cuts) {
      const std::span<const double> cluster(s.data() + start, c + 1 - start);
      out.regions.push_back(stats::shortest_window_sorted(cluster, level));
      start = c + 1;
    }
  }
  for (const auto& r : out.regions)
    if (r.contains(x_i)) out.inside = true;
  return out;
}

/// Reference distribution of T(X_tilde), j-th joint draw taking the j-th
/// draw of every case.
struct ReferenceDistribution {
  Measure measure = Measure::T1;
  std::vector<double> t_draws;
  double t_observed = 0.0;
  double t_mean = 0.0;
  double t_variance = 0.0;
  std::vector<double> case_means;
  std::vector<double> case_variances;

  std::size_t size() const noexcept { return t_draws.size(); }
};

/// Builds the reference from per-case draw sequences. Per-case moments use
/// every draw; joint draws stop at the shortest sequence (with a warning when
/// lengths differ).
inline ReferenceDistribution assemble_reference(const std::vector<std::vector<double>>& per_case,
                                                std::span<const double> x_obs, Measure measure) {
  const std::size_t n = per_case.size();
  if (n == 0) throw DimensionError("no cases to assemble");
  if (x_obs.size() != n)
    throw DimensionError("x_obs has " + std::to_string(x_obs.size()) + " entries for " + std::to_string(n) +
                         " cases");
  std::size_t J = per_case[0].size();
  bool unequal = false;
  for (const auto& d : per_case) {
    if (d.size() != J) unequal = true;
    J = std::min(J, d.size());
  }
  if (J == 0) throw DimensionError("a case has no cross-validation draws");
  if (unequal) warn("cross-validation draw counts differ across cases; truncating to " + std::to_string(J));

  ReferenceDistribution ref;
  ref.measure = measure;
  ref.case_means.resize(n);
  ref.case_variances.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref.case_means[i] = stats::mean(per_case[i]);
    ref.case_variances[i] = stats::variance(per_case[i]);
    if (!(ref.case_variances[i] > 0.0))
      throw DegenerateCaseError(i, "cross-validation draws of case " + std::to_string(i) + " have zero variance");
  }
  ref.t_observed = evaluate(measure, x_obs, ref.case_means, ref.case_variances);
  ref.t_draws.resize(J);
  std::vector<double> joint(n);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < n; ++i) joint[i] = per_case[i][j];
    ref.t_draws[j] = evaluate(measure, joint, ref.case_means, ref.case_variances);
  }
  ref.t_mean = stats::mean(ref.t_draws);
  ref.t_variance = J > 1 ? stats::variance(ref.t_draws) : 0.0;
  return ref;
}

inline ReferenceDistribution assemble_reference(const XValDraws& xval, std::span<const double> x_obs,
                                                Measure measure) {
  return assemble_reference(xval.per_case, x_obs, measure);
}

namespace detail {

inline double reference_sd(const ReferenceDistribution& ref) {
  if (ref.t_draws.empty()) throw DimensionError("empty reference distribution");
  if (!(ref.t_variance > 0.0)) throw DegenerateReferenceError("reference draws of T have zero variance");
  return std::sqrt(ref.t_variance);
}

}  // namespace detail

/// (1 - alpha) type-7 percentile of |T(X_tilde_j)| / sd(T(X_tilde)).
inline double choose_epsilon(const ReferenceDistribution& ref, double alpha = 0.03) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const double sd = detail::reference_sd(ref);
  std::vector<double> z(ref.t_draws.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = std::abs(ref.t_draws[j]) / sd;
  return stats::quantile(std::move(z), 1.0 - alpha);
}

/// Fraction of reference draws within epsilon standardized units of T(X).
inline double posterior_probability(const ReferenceDistribution& ref, double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  const double sd = detail::reference_sd(ref);
  std::size_t hits = 0;
  for (double t : ref.t_draws)
    if (std::abs(t - ref.t_observed) / sd <= epsilon) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ref.t_draws.size());
}

enum class Decision { accept, reject };

inline std::string to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

/// Accept iff p > 1/2; p = 1/2 rejects.
inline Decision decide(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  return p > 0.5 ? Decision::accept : Decision::reject;
}

inline stats::Interval1D credible_interval(const ReferenceDistribution& ref, double level = 0.97) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  std::vector<double> s = ref.t_draws;
  std::sort(s.begin(), s.end());
  return stats::shortest_window_sorted(s, level);
}

/// Whether T(X) lies in the shortest level-credible window of the reference.
inline bool credible_region_check(const ReferenceDistribution& ref, double level = 0.97) {
  return credible_interval(ref, level).contains(ref.t_observed);
}

/// Pr(T(X_tilde) > T(X) | Y), strict inequality.
inline double p_ird(const ReferenceDistribution& ref) {
  if (ref.t_draws.empty()) throw DimensionError("empty reference distribution");
  std::size_t above = 0;
  for (double t : ref.t_draws)
    if (t > ref.t_observed) ++above;
  return static_cast<double>(above) / static_cast<double>(ref.t_draws.size());
}

/// Percentile rank of T(X) within the reference, in [0, 1].
inline double observed_percentile(const ReferenceDistribution& ref) {
  if (ref.t_draws.empty()) throw DimensionError("empty reference distribution");
  std::size_t below = 0;
  for (double t : ref.t_draws)
    if (t < ref.t_observed) ++below;
  return static_cast<double>(below) / static_cast<double>(ref.t_draws.size());
}

struct DiscrepancyReport {
  std::string measure_name;
  double t_observed = 0.0;
  ReferenceDistribution reference;
  double alpha = 0.03;
  double epsilon = 0.0;
  double p = 0.0;
  Decision decision = Decision::reject;
  double credible_level = 0.97;
  stats::Interval1D credible_bounds{0.0, 0.0};
  bool in_credible_region = false;
  double p_ird = 0.0;
};

inline DiscrepancyReport make_report(ReferenceDistribution ref, double alpha = 0.03, double credible_level = 0.97) {
  DiscrepancyReport r;
  r.measure_name = to_string(ref.measure);
  r.t_observed = ref.t_observed;
  r.alpha = alpha;
  r.epsilon = choose_epsilon(ref, alpha);
  r.p = posterior_probability(ref, r.epsilon);
  r.decision = decide(r.p);
  r.credible_level = credible_level;
  r.credible_bounds = credible_interval(ref, credible_level);
  r.in_credible_region = r.credible_bounds.contains(ref.t_observed);
  r.p_ird = p_ird(ref);
  r.reference = std::move(ref);
  return r;
}

inline nlohmann::json to_json(const DiscrepancyReport& r) {
  return {{"measure", r.measure_name},
          {"t_observed", r.t_observed},
          {"p", r.p},
          {"epsilon", r.epsilon},
          {"alpha", r.alpha},
          {"decision", to_string(r.decision)},
          {"credible_level", r.credible_level},
          {"credible_lower", r.credible_bounds.lower},
          {"credible_upper", r.credible_bounds.upper},
          {"in_credible_region", r.in_credible_region},
          {"p_ird", r.p_ird},
          {"reference_size", r.reference.size()},
          {"t_mean", r.reference.t_mean},
          {"t_variance", r.reference.t_variance}};
}

/// CSV `j,t_value`.
inline void write_reference_csv(const ReferenceDistribution& ref, std::ostream& out) {
  out << "j,t_value\n" << std::setprecision(17);
  for (std::size_t j = 0; j < ref.t_draws.size(); ++j) out << j << ',' << ref.t_draws[j] << '\n';
}

}  // namespace ird
