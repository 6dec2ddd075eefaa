#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ird/models/chironomid.hpp"
#include "ird/models/geometric.hpp"
#include "ird/models/poisson.hpp"
#include "ird/models/polynomial.hpp"

namespace ird {

using AnyModel = std::variant<PoissonModel, GeometricModel, PolynomialPoissonModel, ChironomidModel>;

inline std::string model_name(const AnyModel& m) {
  return std::visit([](const auto& v) { return std::string(v.name()); }, m);
}

/// Data-generating setup for the scalar-count simulation studies.
struct GeneratorSpec {
  enum class TrueModel { poisson, geometric, polynomial_poisson };

  TrueModel true_model = TrueModel::poisson;
  std::vector<double> theta_true{1.0};
  // When set, the scalar theta is redrawn uniformly from (lower, upper) for
  // every dataset instead of using theta_true.
  std::optional<Interval> theta_range;
  CovariatePrior covariate_law = CovariatePrior::uniform(1.0, 2.0);
  std::size_t n = 10;

  std::size_t theta_dim() const {
    return true_model == TrueModel::polynomial_poisson ? theta_true.size() : 1;
  }

  void validate() const {
    if (n < 2) throw ConfigError("generator needs n >= 2");
    if (!covariate_law.proper()) throw ConfigError("covariate law must be a proper distribution");
    if (covariate_law.kind == CovariatePrior::Kind::normal)
      throw ConfigError("covariate law must be uniform or exponential");
    if (theta_range) {
      if (theta_dim() != 1) throw ConfigError("theta_range applies to scalar theta only");
      if (!(theta_range->lower >= 0.0 && theta_range->lower < theta_range->upper))
        throw ConfigError("theta_range must be an ordered non-negative interval");
    } else {
      if (theta_true.empty()) throw ConfigError("theta_true is empty");
      for (double t : theta_true)
        if (!(t > 0.0)) throw ConfigError("theta_true must be positive");
    }
    if (true_model == TrueModel::polynomial_poisson && (theta_true.empty() || theta_true.size() > 3))
      throw ConfigError("polynomial truth needs 1 to 3 coefficients");
    if (true_model != TrueModel::polynomial_poisson && !theta_range && theta_true.size() != 1)
      throw ConfigError("scalar truth needs exactly one theta");
  }
};

inline std::string to_string(GeneratorSpec::TrueModel m) {
  switch (m) {
    case GeneratorSpec::TrueModel::poisson: return "poisson";
    case GeneratorSpec::TrueModel::geometric: return "geometric";
    case GeneratorSpec::TrueModel::polynomial_poisson: return "polynomial_poisson";
  }
  return "?";
}

/// Draws X from the covariate law, then Y from the true model.
inline Dataset simulate_dataset(const GeneratorSpec& spec, RngStream& rng) {
  spec.validate();
  std::vector<double> theta = spec.theta_true;
  if (spec.theta_range)
    theta = {spec.theta_range->lower + (spec.theta_range->upper - spec.theta_range->lower) * rng.uniform()};
  std::vector<double> xs(spec.n);
  for (auto& x : xs) x = spec.covariate_law.sample(rng);
  std::vector<std::int64_t> ys(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    switch (spec.true_model) {
      case GeneratorSpec::TrueModel::poisson:
        ys[i] = PoissonModel(spec.covariate_law).sample_response(xs[i], theta, rng)[0];
        break;
      case GeneratorSpec::TrueModel::geometric:
        ys[i] = GeometricModel(spec.covariate_law).sample_response(xs[i], theta, rng)[0];
        break;
      case GeneratorSpec::TrueModel::polynomial_poisson:
        ys[i] = PolynomialPoissonModel(static_cast<int>(theta.size()), spec.covariate_law)
                    .sample_response(xs[i], theta, rng)[0];
        break;
    }
  }
  return Dataset::scalar(std::move(ys), std::move(xs));
}

/// Fitted-model description as it appears in study configs.
struct FittedModelSpec {
  std::string name = "poisson";  // poisson | geometric | polynomial_poisson | chironomid
  std::optional<CovariatePrior> x_prior;  // defaults to the generator's covariate law
  int degree = 1;
  ChironomidSpec chironomid{};

  std::string label() const {
    return name == "polynomial_poisson" ? name + "_" + std::to_string(degree) : name;
  }
};

inline AnyModel make_model(const FittedModelSpec& spec, const CovariatePrior& default_prior) {
  const CovariatePrior prior = spec.x_prior.value_or(default_prior);
  if (spec.name == "poisson") return PoissonModel(prior);
  if (spec.name == "geometric") return GeometricModel(prior);
  if (spec.name == "polynomial_poisson") return PolynomialPoissonModel(spec.degree, prior);
  if (spec.name == "chironomid") return ChironomidModel(spec.chironomid);
  throw ConfigError("unknown model '" + spec.name + "'");
}

}  // namespace ird
