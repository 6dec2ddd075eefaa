#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "ird/study.hpp"

// JSON config reading for the CLI. Unknown keys are rejected so typos fail
// loudly; every field is optional and falls back to the struct default.

namespace ird {

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline CovariatePrior prior_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "flat") return CovariatePrior::flat_improper();
    throw ConfigError("prior string must be \"flat\"");
  }
  detail::check_keys(j, {"kind", "a", "b", "lower", "upper", "mean", "sd"}, "prior");
  std::string kind;
  detail::read(j, "kind", kind);
  double a = 0.0, b = 0.0;
  if (kind == "uniform") {
    detail::read(j, "a", a), detail::read(j, "lower", a);
    detail::read(j, "b", b), detail::read(j, "upper", b);
    return CovariatePrior::uniform(a, b);
  }
  if (kind == "exponential") {
    detail::read(j, "mean", a);
    return CovariatePrior::exponential(a);
  }
  if (kind == "flat") return CovariatePrior::flat_improper();
  if (kind == "normal") {
    detail::read(j, "mean", a);
    detail::read(j, "sd", b);
    return CovariatePrior::normal(a, b);
  }
  throw ConfigError("unknown prior kind '" + kind + "'");
}

inline nlohmann::json to_json(const CovariatePrior& p) {
  switch (p.kind) {
    case CovariatePrior::Kind::uniform: return {{"kind", "uniform"}, {"a", p.a}, {"b", p.b}};
    case CovariatePrior::Kind::exponential: return {{"kind", "exponential"}, {"mean", p.a}};
    case CovariatePrior::Kind::normal: return {{"kind", "normal"}, {"mean", p.a}, {"sd", p.b}};
    case CovariatePrior::Kind::flat: return {{"kind", "flat"}};
  }
  return {};
}

inline MCMCConfig mcmc_from_json(const nlohmann::json& j, MCMCConfig c) {
  detail::check_keys(j, {"n_iterations", "burn_in", "thin", "proposal_scales", "adapt", "adapt_target_acceptance"},
                     "mcmc config");
  detail::read(j, "n_iterations", c.n_iterations);
  detail::read(j, "burn_in", c.burn_in);
  detail::read(j, "thin", c.thin);
  detail::read(j, "proposal_scales", c.proposal_scales);
  detail::read(j, "adapt", c.adapt);
  detail::read(j, "adapt_target_acceptance", c.adapt_target_acceptance);
  return c;
}

inline IRMCMCConfig irmcmc_from_json(const nlohmann::json& j, IRMCMCConfig c) {
  detail::check_keys(j, {"i_star", "K", "M", "with_replacement", "pilot", "conditional", "jobs"}, "irmcmc config");
  if (j.contains("i_star")) {
    const auto& v = j.at("i_star");
    if (v.is_string() && v.get<std::string>() == "auto") c.i_star.reset();
    else if (v.is_number_unsigned()) c.i_star = v.get<std::size_t>();
    else throw ConfigError("i_star must be \"auto\" or a non-negative integer");
  }
  detail::read(j, "K", c.K);
  detail::read(j, "M", c.M);
  detail::read(j, "with_replacement", c.with_replacement);
  detail::read(j, "jobs", c.jobs);
  if (j.contains("pilot")) c.pilot = mcmc_from_json(j.at("pilot"), c.pilot);
  if (j.contains("conditional")) c.conditional = mcmc_from_json(j.at("conditional"), c.conditional);
  return c;
}

inline ChironomidSpec chironomid_from_json(const nlohmann::json& j, ChironomidSpec s = {}) {
  detail::check_keys(j, {"n_sites", "m_species", "site_total", "alpha_lower", "alpha_upper", "beta_mean", "beta_sd",
                         "gamma_shape", "gamma_rate", "x_mean", "x_sd"},
                     "chironomid spec");
  detail::read(j, "n_sites", s.n_sites);
  detail::read(j, "m_species", s.m_species);
  detail::read(j, "site_total", s.site_total);
  detail::read(j, "alpha_lower", s.alpha_lower);
  detail::read(j, "alpha_upper", s.alpha_upper);
  detail::read(j, "beta_mean", s.beta_mean);
  detail::read(j, "beta_sd", s.beta_sd);
  detail::read(j, "gamma_shape", s.gamma_shape);
  detail::read(j, "gamma_rate", s.gamma_rate);
  detail::read(j, "x_mean", s.x_mean);
  detail::read(j, "x_sd", s.x_sd);
  s.validate();
  return s;
}

inline GeneratorSpec generator_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"true_model", "theta_true", "theta_range", "covariate_law", "n"}, "generator");
  GeneratorSpec g;
  std::string tm = "poisson";
  detail::read(j, "true_model", tm);
  if (tm == "poisson") g.true_model = GeneratorSpec::TrueModel::poisson;
  else if (tm == "geometric") g.true_model = GeneratorSpec::TrueModel::geometric;
  else if (tm == "polynomial_poisson") g.true_model = GeneratorSpec::TrueModel::polynomial_poisson;
  else throw ConfigError("unknown true_model '" + tm + "'");
  if (j.contains("theta_true")) {
    if (j.at("theta_true").is_number()) g.theta_true = {j.at("theta_true").get<double>()};
    else detail::read(j, "theta_true", g.theta_true);
  }
  if (j.contains("theta_range")) {
    std::vector<double> r;
    detail::read(j, "theta_range", r);
    if (r.size() != 2) throw ConfigError("theta_range must be [lower, upper]");
    g.theta_range = Interval{r[0], r[1]};
  }
  if (j.contains("covariate_law")) g.covariate_law = prior_from_json(j.at("covariate_law"));
  detail::read(j, "n", g.n);
  g.validate();
  return g;
}

inline FittedModelSpec fitted_from_json(const nlohmann::json& j) {
  FittedModelSpec f;
  if (j.is_string()) {
    f.name = j.get<std::string>();
    return f;
  }
  detail::check_keys(j, {"name", "x_prior", "degree", "chironomid"}, "fitted model");
  detail::read(j, "name", f.name);
  detail::read(j, "degree", f.degree);
  if (j.contains("x_prior")) f.x_prior = prior_from_json(j.at("x_prior"));
  if (j.contains("chironomid")) f.chironomid = chironomid_from_json(j.at("chironomid"));
  return f;
}

inline StudyScenario scenario_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"name", "generator", "fitted_models", "direction", "replicates", "credible_level", "alpha",
                         "measure", "irmcmc", "forward_mcmc", "forward_draws", "base_seed", "jobs",
                         "max_failure_fraction"},
                     "scenario");
  StudyScenario sc;
  detail::read(j, "name", sc.name);
  if (j.contains("generator")) sc.generator = generator_from_json(j.at("generator"));
  if (j.contains("fitted_models")) {
    sc.fitted_models.clear();
    for (const auto& f : j.at("fitted_models")) sc.fitted_models.push_back(fitted_from_json(f));
  }
  if (j.contains("direction")) {
    const auto d = j.at("direction").get<std::string>();
    if (d == "inverse") sc.direction = Direction::inverse;
    else if (d == "forward") sc.direction = Direction::forward;
    else throw ConfigError("direction must be inverse or forward");
  }
  detail::read(j, "replicates", sc.replicates);
  detail::read(j, "credible_level", sc.credible_level);
  detail::read(j, "alpha", sc.alpha);
  if (j.contains("measure")) sc.measure = parse_measure(j.at("measure").get<std::string>());
  if (j.contains("irmcmc")) sc.irmcmc = irmcmc_from_json(j.at("irmcmc"), sc.irmcmc);
  if (j.contains("forward_mcmc")) sc.forward_mcmc = mcmc_from_json(j.at("forward_mcmc"), sc.forward_mcmc);
  detail::read(j, "forward_draws", sc.forward_draws);
  detail::read(j, "base_seed", sc.base_seed);
  detail::read(j, "jobs", sc.jobs);
  detail::read(j, "max_failure_fraction", sc.max_failure_fraction);
  sc.validate();
  return sc;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(f, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

}  // namespace ird
