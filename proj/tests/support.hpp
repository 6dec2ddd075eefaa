#pragma once

#include <cstdint>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "ird/dataset.hpp"
#include "ird/mcmc.hpp"
#include "ird/rng.hpp"

namespace ird::test {

// Random scalar Poisson instance with every leave-one-out retained count
// positive, so the flat-prior posteriors are proper.
inline Dataset random_poisson_instance(RngStream& rng, std::size_t n, double theta, std::int64_t max_count = 1000) {
  for (;;) {
    std::vector<double> xs(n);
    std::vector<std::int64_t> ys(n);
    for (auto& x : xs) x = 0.5 + 2.0 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i)
      ys[i] = std::min(max_count, std::poisson_distribution<std::int64_t>(theta * xs[i])(rng));
    std::int64_t total = 0, max_single = 0;
    for (auto y : ys) {
      total += y;
      max_single = std::max(max_single, y);
    }
    if (total - max_single > 0) return Dataset::scalar(std::move(ys), std::move(xs));
  }
}

// Gamma(shape, rate) CDF through Boost, independent of the library code.
inline auto gamma_cdf(double shape, double rate) {
  return [d = boost::math::gamma_distribution<double>(shape, 1.0 / rate)](double t) {
    return t <= 0.0 ? 0.0 : boost::math::cdf(d, t);
  };
}

// Inverse-CDF draws from the flat-prior leave-one-out density of x_tilde_i:
// x / (x + S) ~ Beta(y_i + 1, a) with a, S the retained count and covariate sums.
inline std::vector<double> loo_x_inverse_cdf_draws(const Dataset& data, std::size_t i, std::size_t count,
                                                  RngStream& rng) {
  double a = 0.0, s = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j)
    if (j != i) {
      a += static_cast<double>(data.response(j)[0]);
      s += data.covariate(j);
    }
  const double yi = static_cast<double>(data.response(i)[0]);
  std::vector<double> out(count);
  for (auto& x : out) {
    const double u = boost::math::ibeta_inv(yi + 1.0, a, rng.uniform());
    x = s * u / (1.0 - u);
  }
  return out;
}

inline MCMCConfig mcmc(std::size_t n, std::size_t burn, std::size_t thin) {
  MCMCConfig c;
  c.n_iterations = n;
  c.burn_in = burn;
  c.thin = thin;
  return c;
}

inline std::vector<double> theta_column(const Chain& c, std::size_t k = 0) { return c.coordinate(k + 1); }

}  // namespace ird::test
