#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "ird/discrepancy.hpp"
#include "ird/rng.hpp"

using namespace ird;

namespace {

using V = std::vector<double>;

ReferenceDistribution ref_from(V draws, double observed) {
  ReferenceDistribution r;
  r.t_draws = std::move(draws);
  r.t_observed = observed;
  r.t_mean = stats::mean(r.t_draws);
  r.t_variance = stats::variance(r.t_draws);
  return r;
}

V normal_draws(RngStream& rng, std::size_t n, double mu = 0.0, double sd = 1.0) {
  V v(n);
  for (auto& x : v) x = mu + sd * rng.normal();
  return v;
}

}  // namespace

TEST(Measures, T1Examples) {
  EXPECT_EQ(t1(V{1, 2, 3}, V{1, 2, 3}, V{1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(t1(V{2}, V{1}, V{1}), 1.0);
  EXPECT_DOUBLE_EQ(t1(V{2, 4, 6}, V{1, 2, 3}, V{1, 4, 9}), 3.0);
}

TEST(Measures, T2T3Examples) {
  EXPECT_EQ(t2(V{1, 2}, V{1, 2}, V{3, 3}), 0.0);
  EXPECT_EQ(t3(V{1, 2}, V{1, 2}, V{3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(t2(V{3.5}, V{1}, V{4}), t3(V{3.5}, V{1}, V{4}));
  // Deviations 1, 2 and 0.5 standard deviations.
  const V x{1, 4, 10.5}, m{0, 0, 10}, v{1, 4, 1};
  EXPECT_DOUBLE_EQ(t2(x, m, v), 3.5);
  EXPECT_DOUBLE_EQ(t3(x, m, v), 2.0);
}

TEST(Measures, ZeroVarianceNamesCase) {
  try {
    t1(V{1, 2, 3}, V{1, 2, 3}, V{1, 0, 1});
    FAIL();
  } catch (const DegenerateCaseError& e) {
    EXPECT_EQ(e.case_index(), 1u);
  }
  EXPECT_THROW(t2(V{1}, V{1}, V{0}), DegenerateCaseError);
  EXPECT_THROW(t3(V{1}, V{1}, V{-1}), DegenerateCaseError);
  EXPECT_THROW(t1(V{1, 2}, V{1}, V{1}), DimensionError);
}

TEST(Measures, PermutationInvariance) {
  RngStream rng(1, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(8 * rng.uniform());
    V x(n), m(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      m[i] = rng.normal();
      v[i] = 0.1 + rng.uniform();
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    V px(n), pm(n), pv(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = x[perm[i]];
      pm[i] = m[perm[i]];
      pv[i] = v[perm[i]];
    }
    for (Measure t : {Measure::T1, Measure::T2, Measure::T3})
      EXPECT_NEAR(evaluate(t, x, m, v), evaluate(t, px, pm, pv), 1e-12 * (1.0 + evaluate(t, x, m, v)));
  }
}

TEST(Measures, NonNegativeWithEqualityOnlyAtMeans) {
  RngStream rng(2, 0);
  for (int rep = 0; rep < 200; ++rep) {
    V x(4), m(4), v(4, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      m[i] = rng.normal();
      x[i] = m[i] + (rng.uniform() < 0.5 ? 0.0 : rng.normal());
    }
    const bool all_equal = x == m;
    for (Measure t : {Measure::T1, Measure::T2, Measure::T3}) {
      const double val = evaluate(t, x, m, v);
      EXPECT_GE(val, 0.0);
      EXPECT_EQ(val == 0.0, all_equal);
    }
  }
}

TEST(Measures, MonotoneInOneCaseDeviation) {
  const V m{0.0, 1.0, -2.0}, v{1.0, 2.0, 0.5};
  double prev1 = -1, prev2 = -1, prev3 = -1;
  for (double d = 0.0; d < 5.0; d += 0.25) {
    const V x{0.3, 1.0 + d, -2.5};
    const double a = t1(x, m, v), b = t2(x, m, v), c = t3(x, m, v);
    EXPECT_GT(a, prev1);
    EXPECT_GT(b, prev2);
    EXPECT_GE(c, prev3);
    prev1 = a;
    prev2 = b;
    prev3 = c;
  }
}

TEST(MeasureNames, RoundTrip) {
  for (Measure t : {Measure::T1, Measure::T2, Measure::T3}) EXPECT_EQ(parse_measure(to_string(t)), t);
  EXPECT_THROW(parse_measure("T5"), ConfigError);
}

TEST(OutlierCheck, InsideAndOutside) {
  RngStream rng(3, 0);
  V draws = normal_draws(rng, 500, 2.0, 0.01);
  draws.push_back(2.0);
  EXPECT_TRUE(case_outlier_check(2.0, draws, 0.95).inside);
  EXPECT_FALSE(case_outlier_check(50.0, draws, 0.95).inside);
  EXPECT_THROW(case_outlier_check(0.0, V(99, 1.0), 0.95), DimensionError);
  EXPECT_THROW(case_outlier_check(0.0, draws, 1.0), ConfigError);
}

TEST(OutlierCheck, UniformHpdLength) {
  RngStream rng(4, 0);
  V draws(100000);
  for (auto& x : draws) x = rng.uniform();
  const auto r = case_outlier_check(0.5, draws, 0.95);
  ASSERT_EQ(r.regions.size(), 1u);
  EXPECT_NEAR(r.regions[0].length(), 0.95, 0.02);
}

TEST(OutlierCheck, BimodalGivesUnionOfWindows) {
  RngStream rng(5, 0);
  V draws = normal_draws(rng, 2000, -10.0, 1.0);
  const V right = normal_draws(rng, 2000, 10.0, 1.0);
  draws.insert(draws.end(), right.begin(), right.end());
  const auto r = case_outlier_check(0.0, draws, 0.95);
  EXPECT_EQ(r.regions.size(), 2u);
  EXPECT_FALSE(r.inside);
  EXPECT_TRUE(case_outlier_check(-10.0, draws, 0.95).inside);
  EXPECT_TRUE(case_outlier_check(10.0, draws, 0.95).inside);
}

TEST(AssembleReference, TwoStandardNormalCasesGiveChiSquared2) {
  RngStream rng(6, 0);
  const std::vector<V> per_case{normal_draws(rng, 20000), normal_draws(rng, 20000)};
  const auto ref = assemble_reference(per_case, V{0.0, 0.0}, Measure::T1);
  boost::math::chi_squared_distribution<double> chi2(2.0);
  // Per-case moments are estimated, so the oracle uses the same estimates.
  const auto ks = stats::ks_test(ref.t_draws, [&](double t) { return t <= 0 ? 0.0 : boost::math::cdf(chi2, t); });
  EXPECT_TRUE(ks.passes(0.01)) << ks.statistic;
}

TEST(AssembleReference, ConstantDrawsAreDegenerate) {
  const std::vector<V> per_case{V(50, 1.0), V(50, 2.0)};
  EXPECT_THROW(assemble_reference(per_case, V{1.0, 2.0}, Measure::T1), DegenerateCaseError);
}

TEST(AssembleReference, TruncatesAndWarns) {
  RngStream rng(7, 0);
  const std::vector<V> per_case{normal_draws(rng, 40), normal_draws(rng, 25), normal_draws(rng, 30)};
  std::vector<std::string> seen;
  auto saved = warning_handler();
  warning_handler() = [&](std::string_view m) { seen.emplace_back(m); };
  const auto ref = assemble_reference(per_case, V{0, 0, 0}, Measure::T2);
  warning_handler() = saved;
  EXPECT_EQ(ref.size(), 25u);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("25"), std::string::npos);
  EXPECT_DOUBLE_EQ(ref.case_means[0], stats::mean(per_case[0]));
}

TEST(AssembleReference, ObservedAndJointDrawsUseCaseMoments) {
  const std::vector<V> per_case{V{0, 2, 1, 1}, V{10, 12, 14, 16}};
  const auto ref = assemble_reference(per_case, V{1.0, 13.0}, Measure::T1);
  const double v0 = stats::variance(per_case[0]), v1 = stats::variance(per_case[1]);
  EXPECT_DOUBLE_EQ(ref.t_observed, 0.0 / v0 + 0.0 / v1);
  EXPECT_DOUBLE_EQ(ref.t_draws[0], 1.0 / v0 + 9.0 / v1);
  EXPECT_DOUBLE_EQ(ref.t_draws[3], 0.0 / v0 + 9.0 / v1);
}

TEST(ChooseEpsilon, MedianAtHalf) {
  RngStream rng(8, 0);
  V d = normal_draws(rng, 1001);
  auto ref = ref_from(d, 0.0);
  ref.t_variance = 1.0;
  V a(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) a[j] = std::abs(d[j]);
  std::sort(a.begin(), a.end());
  EXPECT_DOUBLE_EQ(choose_epsilon(ref, 0.5), a[500]);
}

TEST(ChooseEpsilon, MatchesSortedQuantileOnChiSquared10) {
  RngStream rng(9, 0);
  V d(5000);
  for (auto& x : d) {
    x = 0.0;
    for (int k = 0; k < 10; ++k) {
      const double z = rng.normal();
      x += z * z;
    }
  }
  const auto ref = ref_from(d, 10.0);
  const double sd = std::sqrt(ref.t_variance);
  V z(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) z[j] = d[j] / sd;
  std::sort(z.begin(), z.end());
  // Type-7: h = (J - 1) p.
  const double h = (static_cast<double>(z.size()) - 1.0) * 0.97;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double oracle = z[lo] + (h - std::floor(h)) * (z[lo + 1] - z[lo]);
  EXPECT_NEAR(choose_epsilon(ref, 0.03), oracle, 1e-12);
}

TEST(ChooseEpsilon, DegenerateAndBadAlpha) {
  const auto ref = ref_from(V(20, 3.0), 3.0);
  EXPECT_THROW(choose_epsilon(ref), DegenerateReferenceError);
  EXPECT_THROW(posterior_probability(ref, 1.0), DegenerateReferenceError);
  const auto ok = ref_from(V{1, 2, 3}, 2.0);
  EXPECT_THROW(choose_epsilon(ok, 0.0), ConfigError);
  EXPECT_THROW(choose_epsilon(ok, 1.0), ConfigError);
  EXPECT_THROW(choose_epsilon(ReferenceDistribution{}), DimensionError);
}

TEST(PosteriorProbability, Limits) {
  RngStream rng(10, 0);
  const auto ref = ref_from(normal_draws(rng, 1000, 5.0), 5.123456789);
  EXPECT_EQ(posterior_probability(ref, kInf), 1.0);
  EXPECT_EQ(posterior_probability(ref, 0.0), 0.0);
  EXPECT_THROW(posterior_probability(ref, -1.0), ConfigError);
}

TEST(PosteriorProbability, MedianObservedOnUnimodalReference) {
  RngStream rng(11, 0);
  V d = normal_draws(rng, 4000, 20.0, 2.0);
  V s = d;
  std::sort(s.begin(), s.end());
  const auto ref = ref_from(d, stats::quantile_sorted(s, 0.5));
  EXPECT_GE(posterior_probability(ref, choose_epsilon(ref, 0.03)), 0.9);
}

TEST(PosteriorProbability, InvariantUnderCommonRescaling) {
  RngStream rng(12, 0);
  for (int rep = 0; rep < 50; ++rep) {
    V d = normal_draws(rng, 300, 3.0, 1.0);
    const double obs = 3.0 + 2.0 * rng.normal();
    const auto ref = ref_from(d, obs);
    const double c = std::exp(2.0 * rng.normal());
    for (auto& x : d) x *= c;
    const auto scaled = ref_from(d, obs * c);
    for (double eps : {0.1, 0.5, 1.0, 2.5}) {
      // Boundary hits can flip under rounding only if a draw sits exactly
      // on eps; continuous draws make that a null event.
      EXPECT_EQ(posterior_probability(ref, eps), posterior_probability(scaled, eps));
    }
    EXPECT_EQ(decide(posterior_probability(ref, choose_epsilon(ref))),
              decide(posterior_probability(scaled, choose_epsilon(scaled))));
  }
}

TEST(Decide, ThresholdAndTie) {
  EXPECT_EQ(decide(0.6), Decision::accept);
  EXPECT_EQ(decide(0.4), Decision::reject);
  EXPECT_EQ(decide(0.5), Decision::reject);
  EXPECT_THROW(decide(1.5), ConfigError);
}

TEST(CredibleRegion, MedianInsideAndMaxOutside) {
  RngStream rng(13, 0);
  V d = normal_draws(rng, 999);
  V s = d;
  std::sort(s.begin(), s.end());
  // Any window holding at least half of the sorted draws covers the median.
  for (double level = 0.51; level < 1.0; level += 0.02)
    EXPECT_TRUE(credible_region_check(ref_from(d, s[499]), level)) << "level " << level;
  EXPECT_FALSE(credible_region_check(ref_from(d, s.back() + 1.0), 0.97));
  EXPECT_THROW(credible_region_check(ref_from(d, 0.0), 0.0), ConfigError);
}

TEST(CredibleRegion, LeftTailRejectedEvenWhenSmall) {
  // Reference concentrated away from zero: a tiny observed T is "too good".
  RngStream rng(14, 0);
  V d(2000);
  for (auto& x : d) x = 10.0 + 3.0 * rng.normal() * rng.normal() + 2.0;
  const auto ref = ref_from(d, 0.01);
  EXPECT_FALSE(credible_region_check(ref, 0.97));
  EXPECT_EQ(p_ird(ref), 1.0 - std::count_if(d.begin(), d.end(), [](double t) { return t <= 0.01; }) / 2000.0);
}

TEST(PIrd, ExtremesAndStrictInequality) {
  const V d{1, 2, 3, 4};
  EXPECT_EQ(p_ird(ref_from(d, 0.0)), 1.0);
  EXPECT_EQ(p_ird(ref_from(d, 5.0)), 0.0);
  EXPECT_EQ(p_ird(ref_from(d, 2.0)), 0.5);
  EXPECT_EQ(observed_percentile(ref_from(d, 2.5)), 0.5);
  EXPECT_THROW(p_ird(ReferenceDistribution{}), DimensionError);
}

TEST(Report, FieldsConsistent) {
  RngStream rng(15, 0);
  const auto report = make_report(ref_from(normal_draws(rng, 2000, 4.0), 4.2), 0.03, 0.97);
  EXPECT_EQ(report.decision == Decision::accept, report.p > 0.5);
  EXPECT_EQ(report.in_credible_region, report.credible_bounds.contains(report.t_observed));
  EXPECT_LE(report.credible_bounds.lower, report.credible_bounds.upper);
  const auto j = to_json(report);
  for (const char* key : {"measure", "t_observed", "p", "epsilon", "decision", "credible_level", "credible_lower",
                          "credible_upper", "in_credible_region", "p_ird"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["decision"], to_string(report.decision));
  EXPECT_EQ(j["measure"], "T1");
}

TEST(ReferenceCsv, Header) {
  std::stringstream ss;
  write_reference_csv(ref_from(V{1.5, 2.5}, 0.0), ss);
  EXPECT_EQ(ss.str(), "j,t_value\n0,1.5\n1,2.5\n");
}
