#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "ird/models/zoo.hpp"
#include "ird/stats.hpp"

using namespace ird;

namespace {

using V = std::vector<double>;

double geometric_log_pmf_direct(std::int64_t y, double mu) {
  const double p = 1.0 / (1.0 + mu);
  return std::log(p) + static_cast<double>(y) * std::log1p(-p);
}

FittedModelSpec fitted(std::string name) {
  FittedModelSpec f;
  f.name = std::move(name);
  return f;
}

}  // namespace

TEST(PoissonModelTest, LikelihoodAndPrior) {
  const PoissonModel m;
  const std::vector<std::int64_t> y0{0}, y3{3};
  EXPECT_NEAR(m.log_likelihood_case(y0, 1.7, V{2.0}), -3.4, 1e-14);
  EXPECT_NEAR(m.log_likelihood_case(y3, 2.0, V{1.5}), 3 * std::log(3.0) - 3.0 - std::log(6.0), 1e-12);
  EXPECT_EQ(m.log_prior_theta(V{0.0}), kNegInf);
  EXPECT_EQ(m.log_prior_theta(V{4.0}), 0.0);
  EXPECT_EQ(m.covariate_support(), Interval::positive());
  EXPECT_THROW(PoissonModel(CovariatePrior::normal(0, 1)), ConfigError);
}

TEST(PoissonModelTest, MeanEqualsVarianceBySimulation) {
  const PoissonModel m;
  RngStream rng(1, 0);
  V ys(200000);
  for (auto& y : ys) y = static_cast<double>(m.sample_response(1.5, V{2.0}, rng)[0]);
  const double se = std::sqrt(3.0 / static_cast<double>(ys.size()));
  EXPECT_NEAR(stats::mean(ys), 3.0, 3.0 * se);
  EXPECT_NEAR(stats::variance(ys), 3.0, 0.05);
}

TEST(GeometricModelTest, PmfAndSupportConvention) {
  const GeometricModel m;
  const std::vector<std::int64_t> y0{0};
  EXPECT_NEAR(m.log_likelihood_case(y0, 1.5, V{2.0}), std::log(1.0 / 4.0), 1e-14);
  for (std::int64_t y : {1, 4, 17}) {
    const std::vector<std::int64_t> yy{y};
    EXPECT_NEAR(m.log_likelihood_case(yy, 1.2, V{0.7}), geometric_log_pmf_direct(y, 0.84), 1e-12);
  }
  double total = 0;
  for (std::int64_t y = 0; y < 2000; ++y) {
    const std::vector<std::int64_t> yy{y};
    total += std::exp(m.log_likelihood_case(yy, 1.3, V{3.0}));
  }
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(GeometricModelTest, MeanBySimulation) {
  const GeometricModel m;
  RngStream rng(2, 0);
  const double mu = 1.5 * 2.0;
  double s = 0, s2 = 0;
  const int N = 1000000;
  for (int k = 0; k < N; ++k) {
    const double y = static_cast<double>(m.sample_response(1.5, V{2.0}, rng)[0]);
    s += y;
    s2 += y * y;
  }
  const double mean = s / N, var = s2 / N - mean * mean;
  EXPECT_NEAR(mean, mu, 3.0 * std::sqrt(mu * (1 + mu) / N));
  EXPECT_NEAR(var, mu * (1 + mu), 0.1);
}

TEST(GeometricModelTest, VarianceExceedsPoisson) {
  for (double t : {0.01, 0.1, 1.0, 15.0})
    for (double x : {0.1, 1.0, 2.0}) EXPECT_GT(t * x * (1 + t * x), t * x);
}

TEST(PolynomialModelTest, MeansAndNesting) {
  const PolynomialPoissonModel d1(1), d2(2), d3(3);
  EXPECT_DOUBLE_EQ(d1.mean(2.0, V{0.5}), 1.0);
  EXPECT_DOUBLE_EQ(d2.mean(3.0, V{0.5, 0.5}), 6.0);
  const std::vector<std::int64_t> y{7};
  EXPECT_NEAR(d3.log_likelihood_case(y, 2.5, V{0.5, 0.5, 1e-300}), d2.log_likelihood_case(y, 2.5, V{0.5, 0.5}), 1e-12);
  EXPECT_EQ(d2.log_prior_theta(V{1.0, 0.0}), kNegInf);
  EXPECT_THROW(PolynomialPoissonModel(4), ConfigError);
  EXPECT_THROW(PolynomialPoissonModel(0), ConfigError);
  EXPECT_EQ(d2.theta_dim(), 2u);
  EXPECT_EQ(d3.name(), "polynomial_poisson_3");
}

TEST(PolynomialModelTest, SimulatedMeanMatches) {
  GeneratorSpec g;
  g.true_model = GeneratorSpec::TrueModel::polynomial_poisson;
  g.theta_true = {0.5, 0.5};
  g.covariate_law = CovariatePrior::uniform(0.0, 10.0);
  g.n = 20000;
  RngStream rng(3, 0);
  const Dataset d = simulate_dataset(g, rng);
  V resid(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = d.covariate(i);
    resid[i] = static_cast<double>(d.response(i)[0]) - (0.5 * x + 0.5 * x * x);
  }
  EXPECT_NEAR(stats::mean(resid), 0.0, 3.0 * std::sqrt(stats::variance(resid) / static_cast<double>(d.size())));
}

TEST(PolynomialModelTest, FlatPriorProprietyNeedsPositiveCount) {
  const PolynomialPoissonModel m(2, CovariatePrior::flat_improper());
  EXPECT_FALSE(m.xval_proper(Dataset::scalar({5, 0, 0}, {1, 2, 3}), 0));
  EXPECT_TRUE(m.xval_proper(Dataset::scalar({5, 0, 0}, {1, 2, 3}), 1));
  EXPECT_TRUE(PolynomialPoissonModel(2).xval_proper(Dataset::scalar({5, 0, 0}, {1, 2, 3}), 0));
}

TEST(CvThetaExact, PlugInAndShapeSums) {
  const Dataset d = Dataset::scalar({3, 2}, {5.0, 1.0});
  const auto g0 = cv_theta_exact(d, 0);
  EXPECT_EQ(g0.shape, 2.0);
  EXPECT_EQ(g0.rate, 1.0);
  const auto g1 = cv_theta_exact(d, 1);
  EXPECT_EQ(g0.shape + g1.shape, 5.0);
  EXPECT_EQ(g1.rate, 5.0);
}

TEST(CvThetaExact, ZeroShapeWarns) {
  int warnings = 0;
  auto saved = warning_handler();
  warning_handler() = [&](std::string_view) { ++warnings; };
  const auto g = cv_theta_exact(Dataset::scalar({4, 0}, {1.0, 2.0}), 0);
  warning_handler() = saved;
  EXPECT_FALSE(g.proper());
  EXPECT_EQ(warnings, 1);
}

TEST(CvThetaExact, DensityIntegratesToOne) {
  const auto g = cv_theta_exact(Dataset::scalar({4, 9, 2}, {1.2, 2.3, 0.7}), 2);
  boost::math::quadrature::exp_sinh<double> q;
  EXPECT_NEAR(q.integrate([&](double t) { return std::exp(g.log_pdf(t)); }), 1.0, 1e-8);
}

TEST(CvXExact, IntegratesToOne) {
  boost::math::quadrature::exp_sinh<double> q;
  for (const auto& d : {Dataset::scalar({4, 9, 2}, {1.2, 2.3, 0.7}), Dataset::scalar({0, 1, 2}, {1.5, 0.9, 1.3}),
                        Dataset::scalar({12, 3, 7, 1}, {2.0, 0.6, 1.1, 1.9})})
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = q.integrate([&](double x) { return std::exp(cv_x_exact_logpdf(d, i, x)); });
      EXPECT_NEAR(v, 1.0, 1e-8) << "case " << i;
    }
}

TEST(CvXExact, ModeMatchesDerivative) {
  const Dataset d = Dataset::scalar({4, 9, 2}, {1.2, 2.3, 0.7});
  for (std::size_t i = 0; i < 3; ++i) {
    double a = 0, s = 0;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) {
        a += static_cast<double>(d.response(j)[0]);
        s += d.covariate(j);
      }
    const double yi = static_cast<double>(d.response(i)[0]);
    const double mode = yi * s / (a + 1.0);
    const double h = 1e-4 * mode;
    EXPECT_GT(cv_x_exact_logpdf(d, i, mode), cv_x_exact_logpdf(d, i, mode - h));
    EXPECT_GT(cv_x_exact_logpdf(d, i, mode), cv_x_exact_logpdf(d, i, mode + h));
    const double deriv = (cv_x_exact_logpdf(d, i, mode + h) - cv_x_exact_logpdf(d, i, mode - h)) / (2 * h);
    EXPECT_NEAR(deriv, 0.0, 1e-5);
  }
}

TEST(CvXExact, ZeroCountDensityDecreasing) {
  const Dataset d = Dataset::scalar({0, 5, 3}, {1.2, 2.3, 0.7});
  double prev = cv_x_exact_logpdf(d, 0, 1e-6);
  for (double x = 0.01; x < 50.0; x *= 1.3) {
    const double v = cv_x_exact_logpdf(d, 0, x);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_EQ(cv_x_exact_logpdf(d, 0, 0.0), kNegInf);
  EXPECT_EQ(cv_x_exact_logpdf(d, 0, -1.0), kNegInf);
}

TEST(ForwardPredictive, SumsToOneAndMoments) {
  const Dataset d = Dataset::scalar({4, 9, 2, 6}, {1.2, 2.3, 0.7, 1.5});
  for (std::size_t i = 0; i < d.size(); ++i) {
    double total = 0, mean = 0;
    for (std::int64_t y = 0; y < 400; ++y) {
      const double p = std::exp(forward_predictive_logpmf(d, i, y));
      total += p;
      mean += static_cast<double>(y) * p;
    }
    const auto g = forward_theta_posterior(d, i);
    EXPECT_NEAR(total, 1.0, 1e-8);
    EXPECT_NEAR(mean, d.covariate(i) * g.shape / g.rate, 1e-8);
    EXPECT_NEAR(std::exp(forward_predictive_logpmf(d, i, 0)), std::pow(g.rate / (g.rate + d.covariate(i)), g.shape),
                1e-12);
  }
  EXPECT_EQ(forward_predictive_logpmf(d, 0, -1), kNegInf);
}

// Mixing Poisson(theta x) over the theta posterior by simulation reproduces
// the predictive mass function.
TEST(ForwardPredictive, MatchesGammaPoissonSimulation) {
  const Dataset d = Dataset::scalar({4, 9, 2, 6}, {1.2, 2.3, 0.7, 1.5});
  const auto g = forward_theta_posterior(d, 1);
  RngStream rng(4, 0);
  std::gamma_distribution<double> th(g.shape, 1.0 / g.rate);
  const int N = 400000;
  std::vector<int> hist(60, 0);
  double s = 0;
  for (int k = 0; k < N; ++k) {
    const auto y = std::poisson_distribution<int>(th(rng) * d.covariate(1))(rng);
    s += y;
    if (y < 60) ++hist[static_cast<std::size_t>(y)];
  }
  const double mean = d.covariate(1) * g.shape / g.rate;
  EXPECT_NEAR(s / N, mean, 0.02 * mean);
  for (int y = 0; y < 15; ++y) {
    const double p = std::exp(forward_predictive_logpmf(d, 1, y));
    EXPECT_NEAR(hist[static_cast<std::size_t>(y)] / static_cast<double>(N), p, 4.0 * std::sqrt(p * (1 - p) / N) + 1e-4);
  }
}

// Exponentiating the generic kernel and normalizing by nested quadrature
// reproduces the closed-form x_tilde marginal.
TEST(NumericNormalization, XValKernelReproducesClosedForm) {
  const PoissonModel m;
  const Dataset d = Dataset::scalar({4, 9, 2}, {1.2, 2.3, 0.7});
  boost::math::quadrature::exp_sinh<double> q;
  for (std::size_t i = 0; i < 3; ++i) {
    auto marginal = [&](double x) {
      return q.integrate([&](double t) { return std::exp(log_xval_kernel(m, d, i, x, V{t})); });
    };
    const double z = q.integrate(marginal);
    for (double x : {0.3, 1.0, 2.5, 6.0})
      EXPECT_NEAR(std::log(marginal(x) / z), cv_x_exact_logpdf(d, i, x), 1e-6) << "case " << i << " x " << x;
  }
}

TEST(NumericNormalization, RetainedKernelReproducesGamma) {
  const PoissonModel m;
  const Dataset d = Dataset::scalar({4, 9, 2}, {1.2, 2.3, 0.7});
  boost::math::quadrature::exp_sinh<double> q;
  for (std::size_t i = 0; i < 3; ++i) {
    // x_tilde integrated out analytically leaves theta^{-1} times the retained
    // kernel under the flat prior; normalize it numerically.
    auto dens = [&](double t) { return std::exp(log_retained_kernel(m, d, i, V{t})) / t; };
    const double z = q.integrate(dens);
    const auto g = cv_theta_exact(d, i);
    for (double t : {0.5, 2.0, 4.0}) EXPECT_NEAR(std::log(dens(t) / z), g.log_pdf(t), 1e-7);
  }
}

TEST(Generators, UniformExponentialAndGeometricMoments) {
  RngStream rng(5, 0);
  GeneratorSpec u;
  u.n = 1000;
  const Dataset du = simulate_dataset(u, rng);
  for (double x : du.covariates()) {
    EXPECT_GT(x, 1.0);
    EXPECT_LT(x, 2.0);
  }
  GeneratorSpec e;
  e.covariate_law = CovariatePrior::exponential(3.0);
  e.n = 10000;
  const Dataset de = simulate_dataset(e, rng);
  const V xs(de.covariates().begin(), de.covariates().end());
  EXPECT_NEAR(stats::mean(xs), 3.0, 3.0 * 3.0 / 100.0);

  GeneratorSpec gm;
  gm.true_model = GeneratorSpec::TrueModel::geometric;
  gm.theta_true = {0.1};
  gm.n = 200000;
  gm.covariate_law = CovariatePrior::uniform(1.5, 1.5000001);
  const Dataset dg = simulate_dataset(gm, rng);
  const auto ys = dg.responses_as_real();
  EXPECT_NEAR(stats::variance(ys) / stats::mean(ys), 1.0 + 0.1 * 1.5, 0.02);
}

TEST(Generators, ThetaRangeAndValidation) {
  GeneratorSpec g;
  g.theta_range = Interval{0.0, 1.0};
  RngStream rng(6, 0);
  EXPECT_NO_THROW(simulate_dataset(g, rng));
  g.n = 1;
  EXPECT_THROW(g.validate(), ConfigError);
  GeneratorSpec bad;
  bad.theta_true = {-1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
  GeneratorSpec flat;
  flat.covariate_law = CovariatePrior::flat_improper();
  EXPECT_THROW(flat.validate(), ConfigError);
}

TEST(Generators, Reproducible) {
  GeneratorSpec g;
  g.true_model = GeneratorSpec::TrueModel::geometric;
  g.theta_true = {5.0};
  RngStream a(7, 3), b(7, 3);
  EXPECT_EQ(simulate_dataset(g, a), simulate_dataset(g, b));
  RngStream c1(7, 3), c2(7, 3);
  const ChironomidSpec spec{8, 5, 40};
  EXPECT_EQ(simulate_chironomid(spec, c1), simulate_chironomid(spec, c2));
}

TEST(MakeModel, NamesAndDefaults) {
  const auto prior = CovariatePrior::uniform(1.0, 2.0);
  EXPECT_EQ(model_name(make_model(fitted("geometric"), prior)), "geometric");
  FittedModelSpec poly = fitted("polynomial_poisson");
  poly.degree = 3;
  EXPECT_EQ(poly.label(), "polynomial_poisson_3");
  EXPECT_EQ(model_name(make_model(poly, prior)), "polynomial_poisson_3");
  EXPECT_THROW(make_model(fitted("nope"), prior), ConfigError);
  const auto pm = std::get<PoissonModel>(make_model(FittedModelSpec{}, prior));
  EXPECT_EQ(pm.x_prior().kind, CovariatePrior::Kind::uniform);
}

TEST(Chironomid, ResponseFunctionPeak) {
  EXPECT_DOUBLE_EQ(response_function(11.0, 7.5, 11.0, 2.0), 7.5);
  EXPECT_LT(response_function(13.0, 7.5, 11.0, 2.0), 7.5);
  EXPECT_NEAR(response_function(13.0, 7.5, 11.0, 2.0), 7.5 * std::exp(-1.0), 1e-14);
}

TEST(Chironomid, DirichletMomentsAndSimplex) {
  RngStream rng(8, 0);
  const V w{0.5, 2.0, 1.5, 4.0};
  const double W = 8.0;
  const int N = 100000;
  V s(4, 0.0), s2(4, 0.0);
  for (int k = 0; k < N; ++k) {
    const auto p = sample_dirichlet(w, rng);
    double tot = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      s[c] += p[c];
      s2[c] += p[c] * p[c];
      tot += p[c];
    }
    EXPECT_NEAR(tot, 1.0, 1e-12);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    const double mean = w[c] / W;
    const double var = mean * (1 - mean) / (W + 1);
    EXPECT_NEAR(s[c] / N, mean, 3.0 * std::sqrt(var / N));
  }
}

TEST(Chironomid, DirichletFloorWarns) {
  RngStream rng(9, 0);
  int warnings = 0;
  auto saved = warning_handler();
  warning_handler() = [&](std::string_view) { ++warnings; };
  const auto p = sample_dirichlet(V{0.0, 3.0, 1e-20}, rng);
  warning_handler() = saved;
  EXPECT_EQ(warnings, 1);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Chironomid, SimulatedDataShapeAndTotals) {
  RngStream rng(10, 0);
  const ChironomidSpec spec{12, 6, 100};
  auto saved = warning_handler();
  warning_handler() = nullptr;
  const auto s = simulate_chironomid_with_truth(spec, rng);
  warning_handler() = saved;
  EXPECT_EQ(s.data.size(), 12u);
  EXPECT_EQ(s.data.response_dim(), 6u);
  EXPECT_EQ(s.psi.size(), 18u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(s.data.response_total(i), 100);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_GT(s.psi[k], 0.1);
    EXPECT_LT(s.psi[k], 50.0);
    EXPECT_GT(s.psi[12 + k], 0.0);
  }
  const ChironomidModel m(spec);
  EXPECT_TRUE(std::isfinite(m.log_prior_theta(s.psi)));
  for (std::size_t i = 0; i < 12; ++i)
    EXPECT_TRUE(std::isfinite(m.log_likelihood_case(s.data.response(i), s.data.covariate(i), s.psi)));
}

TEST(Chironomid, LikelihoodIsDirichletMultinomial) {
  const ChironomidSpec spec{4, 2, 5};
  const ChironomidModel m(spec);
  // Two species: Dirichlet-multinomial reduces to beta-binomial.
  const V theta{3.0, 1.0, 10.0, 12.0, 2.0, 1.5};
  const double x = 11.0;
  const double a = response_function(x, 3.0, 10.0, 2.0), b = response_function(x, 1.0, 12.0, 1.5);
  double total = 0;
  for (std::int64_t k = 0; k <= 5; ++k) {
    const std::vector<std::int64_t> y{k, 5 - k};
    const double lbb = std::lgamma(6.0) - std::lgamma(k + 1.0) - std::lgamma(6.0 - k) +
                       std::lgamma(k + a) + std::lgamma(5 - k + b) - std::lgamma(5 + a + b) + std::lgamma(a + b) -
                       std::lgamma(a) - std::lgamma(b);
    EXPECT_NEAR(m.log_likelihood_case(y, x, theta), lbb, 1e-10);
    total += std::exp(lbb);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(m.log_prior_theta(V{60.0, 1.0, 10.0, 12.0, 2.0, 1.5}), kNegInf);
  EXPECT_EQ(m.log_prior_theta(V{3.0, 1.0, 10.0, 12.0, -2.0, 1.5}), kNegInf);
}
