#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ird/discrepancy.hpp"
#include "ird/errors.hpp"
#include "ird/forward.hpp"
#include "ird/irmcmc.hpp"
#include "ird/models/zoo.hpp"
#include "ird/parallel.hpp"
#include "ird/stats.hpp"

namespace ird {

enum class Direction { inverse, forward };

inline std::string to_string(Direction d) { return d == Direction::inverse ? "inverse" : "forward"; }

/// Sampler settings used by the replication studies: a 5000-draw pilot after
/// 2000 burn-in, K = 100, M = 10.
inline IRMCMCConfig study_irmcmc_defaults() {
  IRMCMCConfig c;
  c.pilot = MCMCConfig{7000, 2000, 1, {}, true, 0.44};
  c.conditional = MCMCConfig{100, 20, 3, {}, true, 0.44};
  return c;
}

struct StudyScenario {
  std::string name = "study";
  GeneratorSpec generator{};
  std::vector<FittedModelSpec> fitted_models{FittedModelSpec{}};
  Direction direction = Direction::inverse;
  std::size_t replicates = 500;
  double credible_level = 0.97;
  double alpha = 0.03;
  Measure measure = Measure::T1;
  IRMCMCConfig irmcmc = study_irmcmc_defaults();
  // Forward legs without a closed-form predictive: theta chain settings.
  MCMCConfig forward_mcmc{3000, 1000, 2, {}, true, 0.44};
  std::size_t forward_draws = 1000;  // closed-form forward legs
  std::uint64_t base_seed = 1;
  std::size_t jobs = 1;
  double max_failure_fraction = 0.02;

  void validate() const {
    generator.validate();
    if (replicates < 1) throw ConfigError("replicates must be at least 1");
    if (fitted_models.empty()) throw ConfigError("no fitted models");
    if (!(credible_level > 0.0 && credible_level < 1.0)) throw ConfigError("credible_level must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0))
      throw ConfigError("max_failure_fraction must lie in [0, 1)");
    for (const auto& f : fitted_models) {
      if (f.name == "chironomid") throw ConfigError("replication studies take scalar-count models only");
      (void)make_model(f, generator.covariate_law);
    }
    if (direction == Direction::inverse) irmcmc.validate();
    else forward_mcmc.validate();
  }
};

enum class OutcomeStatus { ok, improper, failed };

inline std::string to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::ok: return "ok";
    case OutcomeStatus::improper: return "improper";
    case OutcomeStatus::failed: return "failed";
  }
  return "?";
}

struct ModelOutcome {
  OutcomeStatus status = OutcomeStatus::ok;
  std::string message;
  double t_observed = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  double p_ird = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  Decision decision = Decision::reject;
  bool in_credible_region = false;
  double min_weight_ess = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<ModelOutcome> models;
};

struct ModelAggregate {
  std::string label;
  std::size_t counted = 0;   // replicates in the denominator
  std::size_t agree = 0;     // in_credible_region true
  std::size_t improper = 0;  // counted, never in the region
  std::size_t failed = 0;    // excluded from the denominator
  double agreement_pct = 0.0;
};

struct StudyResult {
  std::string name;
  Direction direction = Direction::inverse;
  std::size_t replicates = 0;
  std::uint64_t base_seed = 0;
  std::vector<ReplicateRecord> records;
  std::vector<ModelAggregate> aggregates;
  std::vector<std::optional<ReferenceDistribution>> first_references;  // per model, first ok replicate
  double wall_seconds = 0.0;

  const ModelAggregate& aggregate(const std::string& label) const {
    for (const auto& a : aggregates)
      if (a.label == label) return a;
    throw ConfigError("no fitted model labelled '" + label + "'");
  }
};

namespace detail {

inline std::vector<std::vector<double>> study_draws(const AnyModel& model, const Dataset& data,
                                                    const StudyScenario& sc, const RngStream& rng,
                                                    double& min_weight_ess) {
  return std::visit(
      [&](const auto& m) -> std::vector<std::vector<double>> {
        using Mt = std::decay_t<decltype(m)>;
        if (sc.direction == Direction::inverse) {
          auto cfg = sc.irmcmc;
          cfg.jobs = 1;
          auto xval = run_irmcmc(m, data, cfg, rng);
          min_weight_ess = *std::min_element(xval.weight_ess.begin(), xval.weight_ess.end());
          return std::move(xval.per_case);
        }
        if constexpr (std::is_same_v<Mt, PoissonModel>) {
          return forward_xval_poisson_exact(data, sc.forward_draws, rng);
        } else if constexpr (ResponseSampler<Mt>) {
          if (data.response_dim() != 1) throw DimensionError("forward legs need scalar responses");
          return forward_xval_mcmc(m, data, sc.forward_mcmc, rng);
        } else {
          throw ConfigError("model cannot simulate responses for a forward check");
        }
      },
      model);
}

}  // namespace detail

/// Fits one dataset with one model and scores it.
inline ModelOutcome assess_replicate(const AnyModel& model, const Dataset& data, const StudyScenario& sc,
                                     const RngStream& rng, std::optional<ReferenceDistribution>* keep = nullptr) {
  ModelOutcome o;
  try {
    auto draws = detail::study_draws(model, data, sc, rng, o.min_weight_ess);
    const std::vector<double> observed = sc.direction == Direction::inverse
                                             ? std::vector<double>(data.covariates().begin(), data.covariates().end())
                                             : data.responses_as_real();
    auto report = make_report(assemble_reference(draws, observed, sc.measure), sc.alpha, sc.credible_level);
    o.t_observed = report.t_observed;
    o.p = report.p;
    o.p_ird = report.p_ird;
    o.epsilon = report.epsilon;
    o.decision = report.decision;
    o.in_credible_region = report.in_credible_region;
    if (keep) *keep = std::move(report.reference);
  } catch (const ImproperPosteriorError& e) {
    o.status = OutcomeStatus::improper;
    o.message = e.what();
  } catch (const Error& e) {
    o.status = OutcomeStatus::failed;
    o.message = e.what();
  }
  return o;
}

/// Agreement per model: failed replicates leave the denominator (with a
/// warning), improper ones stay in it as disagreements. More than
/// floor(max_failure_fraction * R) failures for any model aborts.
inline std::vector<ModelAggregate> aggregate_outcomes(const std::vector<ReplicateRecord>& records,
                                                      const std::vector<std::string>& labels,
                                                      double max_failure_fraction, const std::string& study_name) {
  const std::size_t R = records.size();
  std::vector<ModelAggregate> out;
  for (std::size_t m = 0; m < labels.size(); ++m) {
    ModelAggregate a;
    a.label = labels[m];
    std::string first_failure;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& o = records[r].models.at(m);
      if (o.status == OutcomeStatus::failed) {
        ++a.failed;
        if (first_failure.empty()) first_failure = "replicate " + std::to_string(records[r].replicate) + ": " + o.message;
        continue;
      }
      ++a.counted;
      if (o.status == OutcomeStatus::improper) ++a.improper;
      else if (o.in_credible_region) ++a.agree;
    }
    const auto cap = static_cast<std::size_t>(std::floor(max_failure_fraction * static_cast<double>(R)));
    if (a.failed > cap)
      throw StudyAbortError("study '" + study_name + "', model " + a.label + ": " + std::to_string(a.failed) +
                            " of " + std::to_string(R) + " replicates failed (cap " + std::to_string(cap) +
                            "); first failure at " + first_failure);
    if (a.failed > 0)
      warn("study '" + study_name + "', model " + a.label + ": " + std::to_string(a.failed) +
           " failed replicates excluded; first failure at " + first_failure);
    a.agreement_pct = a.counted > 0 ? 100.0 * static_cast<double>(a.agree) / static_cast<double>(a.counted) : 0.0;
    out.push_back(a);
  }
  return out;
}

/// Replicate r simulates from RngStream(base_seed, r) and fits model m with
/// that stream's child m. Records are merged by replicate index.
inline StudyResult run_study(const StudyScenario& sc) {
  sc.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<AnyModel> models;
  std::vector<std::string> labels;
  for (const auto& f : sc.fitted_models) {
    models.push_back(make_model(f, sc.generator.covariate_law));
    labels.push_back(f.label());
  }
  const std::size_t R = sc.replicates, nm = models.size();

  StudyResult res;
  res.name = sc.name;
  res.direction = sc.direction;
  res.replicates = R;
  res.base_seed = sc.base_seed;
  res.records.resize(R);
  std::vector<std::vector<std::optional<ReferenceDistribution>>> refs(R);

  parallel_for(R, sc.jobs, [&](std::size_t r) {
    RngStream rep(sc.base_seed, r);
    ReplicateRecord rec;
    rec.replicate = r;
    rec.seed = sc.base_seed;
    rec.stream_id = r;
    const Dataset data = simulate_dataset(sc.generator, rep);
    refs[r].resize(nm);
    for (std::size_t m = 0; m < nm; ++m)
      rec.models.push_back(assess_replicate(models[m], data, sc, rep.derive(m), &refs[r][m]));
    res.records[r] = std::move(rec);
  });

  res.aggregates = aggregate_outcomes(res.records, labels, sc.max_failure_fraction, sc.name);
  res.first_references.resize(nm);
  for (std::size_t m = 0; m < nm; ++m)
    for (std::size_t r = 0; r < R && !res.first_references[m]; ++r)
      if (refs[r][m]) res.first_references[m] = refs[r][m];
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct FlatnessPoint {
  double lambda;
  StudyResult result;
};

/// Poisson truth with theta ~ Uniform(0, 1) per dataset, exponential(lambda)
/// covariates, Poisson fit under the flat covariate prior.
inline std::vector<FlatnessPoint> run_prior_flatness_study(const std::vector<double>& lambdas, std::size_t R,
                                                           std::uint64_t base_seed = 1, std::size_t jobs = 1,
                                                           const IRMCMCConfig& irmcmc = study_irmcmc_defaults()) {
  std::vector<FlatnessPoint> out;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    StudyScenario sc;
    sc.name = "prior_flatness_lambda_" + std::to_string(lambdas[k]);
    sc.generator.true_model = GeneratorSpec::TrueModel::poisson;
    sc.generator.theta_range = Interval{0.0, 1.0};
    sc.generator.covariate_law = CovariatePrior::exponential(lambdas[k]);
    FittedModelSpec f;
    f.name = "poisson";
    f.x_prior = CovariatePrior::flat_improper();
    sc.fitted_models = {f};
    sc.replicates = R;
    sc.irmcmc = irmcmc;
    sc.base_seed = base_seed + k;
    sc.jobs = jobs;
    out.push_back({lambdas[k], run_study(sc)});
  }
  return out;
}

/// Quadratic Poisson truth (0.5 x + 0.5 x^2), Uniform(0, 10) covariates,
/// polynomial fits of degree 1, 2, 3 under the flat covariate prior.
inline StudyResult run_variable_selection_study(std::size_t R, std::uint64_t base_seed = 1, std::size_t jobs = 1,
                                                const IRMCMCConfig& irmcmc = study_irmcmc_defaults()) {
  StudyScenario sc;
  sc.name = "variable_selection";
  sc.generator.true_model = GeneratorSpec::TrueModel::polynomial_poisson;
  sc.generator.theta_true = {0.5, 0.5};
  sc.generator.covariate_law = CovariatePrior::uniform(0.0, 10.0);
  sc.fitted_models.clear();
  for (int d = 1; d <= 3; ++d) {
    FittedModelSpec f;
    f.name = "polynomial_poisson";
    f.degree = d;
    f.x_prior = CovariatePrior::flat_improper();
    sc.fitted_models.push_back(f);
  }
  sc.replicates = R;
  sc.irmcmc = irmcmc;
  sc.base_seed = base_seed;
  sc.jobs = jobs;
  return run_study(sc);
}

struct OverfitDemoResult {
  DiscrepancyReport report;
  double observed_percentile = 0.0;  // fraction of reference draws below T(X)
  double reference_median = 0.0;
  // Accept iff T(X) lies inside the credible window; the p > 1/2 rule is in
  // report.decision.
  Decision decision = Decision::reject;
  Dataset data;
};

/// Poisson truth at `theta`, Uniform(1, 2) covariates, n = 10; fit `fitted`
/// (geometric by default). The x_tilde prior defaults to Uniform(0.5, 2.5):
/// with the exact covariate law as prior the Geometric leave-one-out
/// posteriors collapse onto that prior and observed X is indistinguishable
/// from reference draws, so an overdispersed fit only shows once the prior
/// is wider than the law.
inline OverfitDemoResult run_overfit_demo(double theta = 15.0, std::uint64_t seed = 1,
                                          const std::string& fitted = "geometric",
                                          const CovariatePrior& x_prior = CovariatePrior::uniform(0.5, 2.5),
                                          const IRMCMCConfig& irmcmc = study_irmcmc_defaults(),
                                          double credible_level = 0.97) {
  GeneratorSpec g;
  g.true_model = GeneratorSpec::TrueModel::poisson;
  g.theta_true = {theta};
  g.covariate_law = CovariatePrior::uniform(1.0, 2.0);
  RngStream rng(seed, 0);
  Dataset data = simulate_dataset(g, rng);
  FittedModelSpec f;
  f.name = fitted;
  f.x_prior = x_prior;
  const AnyModel model = make_model(f, g.covariate_law);
  auto xval = std::visit([&](const auto& m) { return run_irmcmc(m, data, irmcmc, rng.derive(1)); }, model);
  auto report = make_report(assemble_reference(xval, data.covariates(), Measure::T1), 0.03, credible_level);
  OverfitDemoResult out{std::move(report), 0.0, 0.0, Decision::reject, std::move(data)};
  out.observed_percentile = observed_percentile(out.report.reference);
  out.reference_median = stats::quantile(out.report.reference.t_draws, 0.5);
  out.decision = out.report.in_credible_region ? Decision::accept : Decision::reject;
  return out;
}

struct CalibrationResult {
  std::vector<double> p_ird;
  stats::KSResult ks{0.0, 0.0};
  bool passes = false;  // KS against Uniform(0, 1) at level 0.01
  StudyResult study;
};

/// p_ird of the first fitted model across replicates, tested against
/// Uniform(0, 1).
inline CalibrationResult run_calibration_study(StudyScenario sc, std::size_t R) {
  if (R < 2) throw ConfigError("calibration needs at least 2 replicates; the KS statistic is undefined for one");
  sc.replicates = R;
  CalibrationResult out;
  out.study = run_study(sc);
  for (const auto& rec : out.study.records)
    if (rec.models[0].status == OutcomeStatus::ok) out.p_ird.push_back(rec.models[0].p_ird);
  if (out.p_ird.size() < 2) throw StudyAbortError("fewer than 2 usable replicates for calibration");
  out.ks = stats::ks_test(out.p_ird, [](double u) { return std::clamp(u, 0.0, 1.0); });
  out.passes = out.ks.passes(0.01);
  return out;
}

/// Calibration scenario: Poisson truth theta = 5, Uniform(1, 2) covariates,
/// n = 10, Poisson fit under the same covariate prior.
inline StudyScenario calibration_scenario(std::uint64_t base_seed = 1, std::size_t jobs = 1) {
  StudyScenario sc;
  sc.name = "calibration";
  sc.generator.true_model = GeneratorSpec::TrueModel::poisson;
  sc.generator.theta_true = {5.0};
  sc.generator.covariate_law = CovariatePrior::uniform(1.0, 2.0);
  sc.fitted_models = {FittedModelSpec{}};
  sc.base_seed = base_seed;
  sc.jobs = jobs;
  return sc;
}

struct TimingResult {
  double brute_force_seconds = 0.0;
  double irmcmc_seconds = 0.0;
  double speedup = 0.0;
  std::vector<double> per_case_w1;
  double max_w1 = 0.0;
  double min_weight_ess = 0.0;
  DiscrepancyReport report;
  ChainDiagnostics pilot_diagnostics;
  Dataset data;
};

struct TimingConfig {
  ChironomidSpec chironomid{62, 10, 100};
  MCMCConfig chain{3000, 1000, 1, {}, true, 0.44};  // pilot and every brute-force chain
  std::size_t K = 100;
  std::size_t M = 10;
  MCMCConfig conditional{100, 20, 3, {}, true, 0.44};
  std::uint64_t seed = 1;
};

/// Brute-force n-fold MCMC against IRMCMC on one synthetic chironomid dataset.
inline TimingResult run_timing_comparison(const TimingConfig& cfg) {
  cfg.chironomid.validate();
  RngStream rng(cfg.seed, 0);
  Dataset data = simulate_chironomid(cfg.chironomid, rng);
  const ChironomidModel model(cfg.chironomid);
  IRMCMCConfig ir;
  ir.pilot = cfg.chain;
  ir.K = cfg.K;
  ir.M = cfg.M;
  ir.conditional = cfg.conditional;

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  const XValDraws brute = brute_force_xval(model, data, cfg.chain, rng.derive(1));
  auto t1 = clock::now();
  const XValDraws fast = run_irmcmc(model, data, ir, rng.derive(2));
  auto t2 = clock::now();

  TimingResult out;
  out.brute_force_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.irmcmc_seconds = std::chrono::duration<double>(t2 - t1).count();
  out.speedup = out.brute_force_seconds / out.irmcmc_seconds;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.per_case_w1.push_back(stats::wasserstein1(brute.per_case[i], fast.per_case[i]));
    out.max_w1 = std::max(out.max_w1, out.per_case_w1.back());
  }
  out.min_weight_ess = *std::min_element(fast.weight_ess.begin(), fast.weight_ess.end());
  out.report = make_report(assemble_reference(fast, data.covariates(), Measure::T1));
  out.pilot_diagnostics = diagnostics(fast.pilot);
  out.data = std::move(data);
  return out;
}

// Persistence.

inline nlohmann::json to_json(const StudyResult& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& a : r.aggregates)
    models.push_back({{"model", a.label},
                      {"agreement_pct", a.agreement_pct},
                      {"agree", a.agree},
                      {"counted", a.counted},
                      {"improper", a.improper},
                      {"failed", a.failed}});
  return {{"name", r.name},
          {"direction", to_string(r.direction)},
          {"replicates", r.replicates},
          {"base_seed", r.base_seed},
          {"wall_seconds", r.wall_seconds},
          {"models", models}};
}

inline void write_replicates_csv(const StudyResult& r, std::ostream& out) {
  out << "replicate,seed,stream_id,model,status,t_observed,p,p_ird,epsilon,decision,in_credible_region,"
         "min_weight_ess\n"
      << std::setprecision(17);
  for (const auto& rec : r.records)
    for (std::size_t m = 0; m < rec.models.size(); ++m) {
      const auto& o = rec.models[m];
      out << rec.replicate << ',' << rec.seed << ',' << rec.stream_id << ',' << r.aggregates[m].label << ','
          << to_string(o.status) << ',' << o.t_observed << ',' << o.p << ',' << o.p_ird << ',' << o.epsilon << ','
          << to_string(o.decision) << ',' << (o.in_credible_region ? 1 : 0) << ',' << o.min_weight_ess << '\n';
    }
}

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

/// result.json, replicates.csv, and reference.csv (first fitted model, first
/// usable replicate; further models go to reference_<label>.csv).
inline void write_study_outputs(const StudyResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "result.json", to_json(r));
  {
    std::ofstream f(dir / "replicates.csv");
    write_replicates_csv(r, f);
  }
  for (std::size_t m = 0; m < r.first_references.size(); ++m) {
    if (!r.first_references[m]) continue;
    std::ofstream f(dir / (m == 0 ? std::string("reference.csv") : "reference_" + r.aggregates[m].label + ".csv"));
    write_reference_csv(*r.first_references[m], f);
  }
}

}  // namespace ird
