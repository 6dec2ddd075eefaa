#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ird/config.hpp"
#include "ird/dataset.hpp"
#include "ird/discrepancy.hpp"
#include "ird/irmcmc.hpp"
#include "ird/models/zoo.hpp"
#include "ird/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* app, Common& c, bool config_required = true) {
  app->add_option("--config", c.config, "JSON config file")->required(config_required);
  app->add_option("--seed", c.seed, "base seed (overrides the config)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "worker threads");
}

json load(const Common& c) { return c.config.empty() ? json::object() : ird::load_json_file(c.config); }

json take(json& j, const char* key) {
  if (!j.contains(key)) return json();
  json v = j.at(key);
  j.erase(key);
  return v;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw ird::Error("cannot write " + (dir / name).string());
  return f;
}

ird::Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ird::ConfigError("cannot open dataset " + path);
  return ird::read_csv(f);
}

// {"model": ..., "irmcmc": {...}, "measure", "alpha", "credible_level"}
struct AssessConfig {
  ird::FittedModelSpec model;
  ird::IRMCMCConfig irmcmc;
  ird::Measure measure = ird::Measure::T1;
  double alpha = 0.03;
  double credible_level = 0.97;
};

AssessConfig assess_config(json j) {
  ird::detail::check_keys(j, {"model", "irmcmc", "measure", "alpha", "credible_level"}, "xval/assess config");
  AssessConfig a;
  if (j.contains("model")) a.model = ird::fitted_from_json(j.at("model"));
  if (j.contains("irmcmc")) a.irmcmc = ird::irmcmc_from_json(j.at("irmcmc"), a.irmcmc);
  if (j.contains("measure")) a.measure = ird::parse_measure(j.at("measure").get<std::string>());
  ird::detail::read(j, "alpha", a.alpha);
  ird::detail::read(j, "credible_level", a.credible_level);
  a.irmcmc.validate();
  return a;
}

ird::XValDraws run_xval(const AssessConfig& a, const ird::Dataset& data, std::uint64_t seed) {
  // The covariate prior defaults to flat when the config gives none.
  const auto model = ird::make_model(a.model, ird::CovariatePrior::flat_improper());
  return std::visit([&](const auto& m) { return ird::run_irmcmc(m, data, a.irmcmc, ird::RngStream(seed, 0)); },
                    model);
}

int cmd_simulate(const Common& c) {
  json j = load(c);
  const std::uint64_t seed = c.seed.value_or(j.value("seed", 1ULL));
  j.erase("seed");
  ird::RngStream rng(seed, 0);
  ird::Dataset data = [&] {
    if (j.contains("chironomid")) {
      ird::detail::check_keys(j, {"chironomid"}, "simulate config");
      return ird::simulate_chironomid(ird::chironomid_from_json(j.at("chironomid")), rng);
    }
    ird::detail::check_keys(j, {"generator"}, "simulate config");
    return ird::simulate_dataset(ird::generator_from_json(j.value("generator", json::object())), rng);
  }();
  auto f = open_out(c.out, "dataset.csv");
  ird::write_csv(data, f);
  std::cout << "wrote " << (fs::path(c.out) / "dataset.csv").string() << " (" << data.size() << " cases)\n";
  return 0;
}

int cmd_xval(const Common& c, const std::string& data_path) {
  json j = load(c);
  const std::uint64_t seed = c.seed.value_or(j.value("seed", 1ULL));
  j.erase("seed");
  auto a = assess_config(j);
  if (c.jobs) a.irmcmc.jobs = *c.jobs;
  const auto data = load_dataset(data_path);
  const auto xval = run_xval(a, data, seed);
  {
    auto f = open_out(c.out, "xval.csv");
    ird::write_xval_csv(xval, f);
  }
  {
    auto f = open_out(c.out, "weights.csv");
    ird::write_weight_csv(xval, f);
  }
  {
    auto f = open_out(c.out, "pilot_chain.csv");
    ird::write_chain_csv(xval.pilot, f);
  }
  std::cout << "pilot case " << xval.pilot_case << ", " << xval.per_case[0].size() << " draws per case\n";
  return 0;
}

int cmd_assess(const Common& c, const std::string& data_path) {
  json j = load(c);
  const std::uint64_t seed = c.seed.value_or(j.value("seed", 1ULL));
  j.erase("seed");
  auto a = assess_config(j);
  if (c.jobs) a.irmcmc.jobs = *c.jobs;
  const auto data = load_dataset(data_path);
  const auto xval = run_xval(a, data, seed);
  const auto report =
      ird::make_report(ird::assemble_reference(xval, data.covariates(), a.measure), a.alpha, a.credible_level);
  json out = ird::to_json(report);
  out["model"] = a.model.label();
  out["pilot_case"] = xval.pilot_case;
  json cases = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    json ci = {{"case", i}, {"x", data.covariate(i)}, {"weight_ess", xval.weight_ess[i]}};
    if (xval.per_case[i].size() >= 100) {
      const auto chk = ird::case_outlier_check(data.covariate(i), xval.per_case[i], a.credible_level);
      ci["inside_hpd"] = chk.inside;
      json regions = json::array();
      for (const auto& r : chk.regions) regions.push_back({r.lower, r.upper});
      ci["hpd_regions"] = regions;
    }
    cases.push_back(ci);
  }
  out["cases"] = cases;
  const auto diag = ird::diagnostics(xval.pilot);
  json d = json::array();
  for (const auto& cd : diag.coordinates)
    d.push_back({{"coordinate", cd.name},
                 {"ess", cd.ess},
                 {"split_rhat", cd.split_rhat},
                 {"acceptance", cd.acceptance},
                 {"degenerate", cd.degenerate},
                 {"antithetic", cd.antithetic}});
  out["pilot_diagnostics"] = d;
  ird::write_json_file(fs::path(c.out) / "report.json", out);
  {
    auto f = open_out(c.out, "reference.csv");
    ird::write_reference_csv(report.reference, f);
  }
  std::cout << report.measure_name << " observed " << report.t_observed << ", p = " << report.p << " -> "
            << ird::to_string(report.decision) << "; in " << report.credible_level << " credible window: "
            << (report.in_credible_region ? "yes" : "no") << '\n';
  return 0;
}

ird::IRMCMCConfig study_irmcmc(json& j) {
  auto ir = ird::study_irmcmc_defaults();
  if (j.contains("irmcmc")) ir = ird::irmcmc_from_json(take(j, "irmcmc"), ir);
  return ir;
}

int cmd_study(const Common& c) {
  json j = load(c);
  const std::string kind = j.contains("kind") ? take(j, "kind").get<std::string>() : "scenario";
  const fs::path out(c.out);
  if (kind == "scenario") {
    if (c.seed) j["base_seed"] = *c.seed;
    if (c.jobs) j["jobs"] = *c.jobs;
    const auto res = ird::run_study(ird::scenario_from_json(j));
    ird::write_study_outputs(res, out);
    for (const auto& a : res.aggregates) std::cout << a.label << ": " << a.agreement_pct << "% agreement\n";
    return 0;
  }
  const std::uint64_t seed = c.seed.value_or(j.contains("base_seed") ? take(j, "base_seed").get<std::uint64_t>() : 1);
  const std::size_t jobs = c.jobs.value_or(j.contains("jobs") ? take(j, "jobs").get<std::size_t>() : 1);
  if (kind == "prior_flatness") {
    const auto lambdas = take(j, "lambdas");
    const auto R = j.contains("replicates") ? take(j, "replicates").get<std::size_t>() : 500;
    const auto ir = study_irmcmc(j);
    ird::detail::check_keys(j, {}, "prior_flatness config");
    const auto pts = ird::run_prior_flatness_study(
        lambdas.is_null() ? std::vector<double>{0.5, 1, 3, 10} : lambdas.get<std::vector<double>>(), R, seed, jobs, ir);
    json agg = json::array();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      agg.push_back({{"lambda", pts[k].lambda}, {"result", ird::to_json(pts[k].result)}});
      ird::write_study_outputs(pts[k].result, out / ("lambda_" + std::to_string(k)));
      std::cout << "lambda " << pts[k].lambda << ": " << pts[k].result.aggregates[0].agreement_pct << "%\n";
    }
    ird::write_json_file(out / "result.json", agg);
    return 0;
  }
  if (kind == "variable_selection") {
    const auto R = j.contains("replicates") ? take(j, "replicates").get<std::size_t>() : 500;
    const auto ir = study_irmcmc(j);
    ird::detail::check_keys(j, {}, "variable_selection config");
    const auto res = ird::run_variable_selection_study(R, seed, jobs, ir);
    ird::write_study_outputs(res, out);
    for (const auto& a : res.aggregates) std::cout << a.label << ": " << a.agreement_pct << "% agreement\n";
    return 0;
  }
  if (kind == "overfit") {
    const double theta = j.contains("theta") ? take(j, "theta").get<double>() : 15.0;
    const std::string fitted = j.contains("fitted") ? take(j, "fitted").get<std::string>() : "geometric";
    const auto prior =
        j.contains("x_prior") ? ird::prior_from_json(take(j, "x_prior")) : ird::CovariatePrior::uniform(0.5, 2.5);
    const auto ir = study_irmcmc(j);
    ird::detail::check_keys(j, {}, "overfit config");
    const auto res = ird::run_overfit_demo(theta, seed, fitted, prior, ir);
    json r = ird::to_json(res.report);
    r["observed_percentile"] = res.observed_percentile;
    r["reference_median"] = res.reference_median;
    r["credible_region_decision"] = ird::to_string(res.decision);
    ird::write_json_file(out / "result.json", r);
    auto f = open_out(out, "reference.csv");
    ird::write_reference_csv(res.report.reference, f);
    std::cout << "T1 observed " << res.report.t_observed << " at percentile " << res.observed_percentile << " -> "
              << ird::to_string(res.decision) << '\n';
    return 0;
  }
  throw ird::ConfigError("unknown study kind '" + kind + "'");
}

int cmd_calibrate(const Common& c) {
  json j = load(c);
  if (c.seed) j["base_seed"] = *c.seed;
  if (c.jobs) j["jobs"] = *c.jobs;
  ird::StudyScenario sc = ird::calibration_scenario();
  if (!j.empty()) {
    json base = {{"name", sc.name},
                 {"generator", {{"true_model", "poisson"}, {"theta_true", 5.0},
                                {"covariate_law", {{"kind", "uniform"}, {"a", 1.0}, {"b", 2.0}}}}}};
    base.update(j);
    sc = ird::scenario_from_json(base);
  }
  const auto res = ird::run_calibration_study(sc, sc.replicates);
  json r = ird::to_json(res.study);
  r["ks_statistic"] = res.ks.statistic;
  r["ks_p_value"] = res.ks.p_value;
  r["passes_at_0_01"] = res.passes;
  r["p_ird"] = res.p_ird;
  ird::write_study_outputs(res.study, c.out);
  ird::write_json_file(fs::path(c.out) / "result.json", r);
  std::cout << "KS D = " << res.ks.statistic << ", p = " << res.ks.p_value << (res.passes ? " (pass)" : " (fail)")
            << '\n';
  return 0;
}

int cmd_bench(const Common& c) {
  json j = load(c);
  ird::TimingConfig t;
  ird::detail::check_keys(j, {"chironomid", "chain", "K", "M", "conditional", "seed"}, "bench config");
  if (j.contains("chironomid")) t.chironomid = ird::chironomid_from_json(j.at("chironomid"), t.chironomid);
  if (j.contains("chain")) t.chain = ird::mcmc_from_json(j.at("chain"), t.chain);
  if (j.contains("conditional")) t.conditional = ird::mcmc_from_json(j.at("conditional"), t.conditional);
  ird::detail::read(j, "K", t.K);
  ird::detail::read(j, "M", t.M);
  ird::detail::read(j, "seed", t.seed);
  if (c.seed) t.seed = *c.seed;
  const auto r = ird::run_timing_comparison(t);
  json out = {{"brute_force_seconds", r.brute_force_seconds},
              {"irmcmc_seconds", r.irmcmc_seconds},
              {"speedup", r.speedup},
              {"max_w1", r.max_w1},
              {"per_case_w1", r.per_case_w1},
              {"min_weight_ess", r.min_weight_ess},
              {"report", ird::to_json(r.report)}};
  ird::write_json_file(fs::path(c.out) / "result.json", out);
  auto f = open_out(c.out, "reference.csv");
  ird::write_reference_csv(r.report.reference, f);
  std::cout << "brute force " << r.brute_force_seconds << " s, IRMCMC " << r.irmcmc_seconds << " s, speedup "
            << r.speedup << "x\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse reference distribution model checking"};
  app.require_subcommand(1);
  Common simulate, xval, assess, study, calibrate, bench;
  std::string xval_data, assess_data;
  auto* s_sim = app.add_subcommand("simulate", "simulate a dataset");
  add_common(s_sim, simulate, false);
  auto* s_xval = app.add_subcommand("xval", "leave-one-out covariate draws by IRMCMC");
  add_common(s_xval, xval, false);
  s_xval->add_option("--data", xval_data, "dataset CSV")->required();
  auto* s_assess = app.add_subcommand("assess", "discrepancy report for a dataset");
  add_common(s_assess, assess, false);
  s_assess->add_option("--data", assess_data, "dataset CSV")->required();
  auto* s_study = app.add_subcommand("study", "replication study");
  add_common(s_study, study);
  auto* s_cal = app.add_subcommand("calibrate", "p_ird calibration study");
  add_common(s_cal, calibrate, false);
  auto* s_bench = app.add_subcommand("bench", "IRMCMC vs brute-force timing");
  add_common(s_bench, bench, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  ird::warning_handler() = [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
  try {
    if (*s_sim) return cmd_simulate(simulate);
    if (*s_xval) return cmd_xval(xval, xval_data);
    if (*s_assess) return cmd_assess(assess, assess_data);
    if (*s_study) return cmd_study(study);
    if (*s_cal) return cmd_calibrate(calibrate);
    if (*s_bench) return cmd_bench(bench);
  } catch (const ird::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ird::StudyAbortError& e) {
    std::cerr << "study aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
