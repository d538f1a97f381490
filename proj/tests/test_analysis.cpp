#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "longarm/analysis.hpp"
#include "longarm/errors.hpp"

using namespace longarm;

namespace {

std::vector<double> alpha_grid() {
  std::vector<double> g;
  for (int i = 0; i < 100; ++i) g.push_back(0.05 + (2.0 - 0.05) * (i + 0.5) / 100.0);
  for (int i = 0; i < 100; ++i) g.push_back(2.0 + 18.0 * (i + 0.5) / 100.0);
  return g;
}

}  // namespace

TEST_CASE("exponent sets") {
  const ExponentSet a = exponents(0.8);
  CHECK(a.rho == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(a.xi == doctest::Approx(0.8 / 3.6).epsilon(1e-15));
  CHECK(a.beta_lo == doctest::Approx(1.375).epsilon(1e-15));
  CHECK(a.beta_hi == doctest::Approx(2.8125).epsilon(1e-15));

  const ExponentSet b = exponents(4.0);
  CHECK(b.rho == 2.0);
  CHECK(b.beta_lo == doctest::Approx(0.275));
  CHECK(b.beta_hi == doctest::Approx(0.3125));

  const ExponentSet c = exponents(8.0);
  CHECK(c.rho == 2.0);
  CHECK(c.xi == 0.4);
  CHECK(c.beta_lo == doctest::Approx(0.275));
  CHECK(c.beta_hi == doctest::Approx(0.3125));

  CHECK_THROWS_AS(exponents(2.0), ValidationError);
  CHECK_THROWS_AS(exponents(0.0), ValidationError);
  CHECK_THROWS_AS(exponents(-1.0), ValidationError);
}

TEST_CASE("beta interval is non-empty and its midpoint satisfies every chain") {
  for (double alpha : alpha_grid()) {
    const ExponentSet e = exponents(alpha);
    REQUIRE(e.beta_lo < e.beta_hi);
    const BetaReport rep = beta_constraints_hold(alpha, 0.5 * (e.beta_lo + e.beta_hi));
    CHECK(rep.shell_exponent);
    CHECK(rep.growth);
    CHECK(rep.percolation);
  }
  for (double alpha : {0.5, 1.0, 1.5, 3.0, 4.0, 5.0, 10.0}) {
    const ExponentSet e = exponents(alpha);
    CHECK(beta_constraints_hold(alpha, 0.5 * (e.beta_lo + e.beta_hi)).all());
  }
  CHECK_FALSE(beta_constraints_hold(4.0, exponents(4.0).beta_hi + 0.1).all());
  CHECK(beta_constraints_hold(8.0, 0.3).growth);
}

TEST_CASE("derived scales") {
  const DerivedScales s = derived_scales(0.01, 1000.0, 1.0, 8.0, 0.3);
  CHECK(s.delta == doctest::Approx(std::pow(0.01, 0.25)));
  CHECK(s.L == doctest::Approx(std::pow(0.01, 0.3) * 1000.0));
  CHECK(s.N == doctest::Approx(0.25 / (std::pow(0.01, 0.3) + std::pow(0.01, 0.25))));
  CHECK(s.N == doctest::Approx(0.4405).epsilon(1e-3));
  REQUIRE(s.j.size() == 1);
  CHECK(s.j[0] == doctest::Approx(1250.0));

  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double alpha = 0.1 + 9.0 * u(gen);
    if (std::abs(alpha - 2.0) < 1e-9) continue;
    const ExponentSet e = exponents(alpha);
    const double beta = e.beta_lo + (e.beta_hi - e.beta_lo) * u(gen);
    const double eps = std::pow(10.0, -1.0 - 5.0 * u(gen));
    const double r = 1.0 + 1e4 * u(gen);
    const double lambda = 0.01 + 0.99 * u(gen);
    if (lambda / (4.0 * (std::pow(eps, beta) + std::pow(eps, 1.0 / (2.0 * e.rho)))) > 1e6) continue;
    const DerivedScales d = derived_scales(eps, r, lambda, alpha, beta);
    for (double j : d.j) {
      REQUIRE(j >= r * (1.0 + lambda / 4.0));
      REQUIRE(j <= r * (1.0 + lambda / 2.0) * (1.0 + 1e-12));
    }
  }

  // eps -> 0: N >> J >> 1, where J < eps^{1 - 2 beta rho} up to a constant.
  const ExponentSet e = exponents(0.8);
  const double beta = 0.5 * (e.beta_lo + e.beta_hi);
  double prevN = 0.0, prevJ = 0.0, prevRatio = 1e300;
  for (double eps = 1e-1; eps > 1e-12; eps /= 10.0) {
    const double jb = std::pow(eps, 1.0 - 2.0 * beta * e.rho);
    const double ratio = jb * 4.0 * (std::pow(eps, beta) + std::pow(eps, 1.0 / (2.0 * e.rho)));
    CHECK(jb > prevJ);
    CHECK(ratio < prevRatio);
    prevJ = jb;
    prevRatio = ratio;
    if (eps < 1e-4) continue;
    const DerivedScales d = derived_scales(eps, 100.0, 1.0, 0.8, beta);
    CHECK(d.N > prevN);
    CHECK(jb / d.N == doctest::Approx(ratio));
    prevN = d.N;
  }
  CHECK(prevRatio < 1e-3);
  CHECK_THROWS_AS(derived_scales(1e-12, 100.0, 1.0, 0.8, beta), NumericalGuard);

  CHECK_THROWS_AS(derived_scales(0.0, 10.0, 1.0, 0.8, 2.0), ValidationError);
  CHECK_THROWS_AS(derived_scales(0.1, 0.5, 1.0, 0.8, 2.0), ValidationError);
  CHECK_THROWS_AS(derived_scales(0.1, 10.0, 1.5, 0.8, 2.0), ValidationError);
  CHECK_THROWS_AS(derived_scales(0.1, 10.0, 1.0, 2.0, 2.0), ValidationError);
}

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  for (double p = 0.001; p < 1.0; p += 0.0137) {
    const double x = normal_quantile(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(p).epsilon(1e-13));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
}

TEST_CASE("Wilson intervals") {
  CHECK(wilson_ci(0, 100).first == 0.0);
  CHECK(wilson_ci(100, 100).second == 1.0);
  const auto [lo, hi] = wilson_ci(50, 100, 0.95);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  CHECK(hi - lo == doctest::Approx(0.19).epsilon(0.02));
  CHECK(lo + hi == doctest::Approx(1.0));
  CHECK_THROWS_AS(wilson_ci(3, 2), ValidationError);
  CHECK_THROWS_AS(wilson_ci(0, 0), ValidationError);
}

TEST_CASE("log-log fits") {
  std::vector<FitPoint> pts;
  for (double r : {2.0, 4.0, 8.0, 16.0, 32.0}) pts.push_back({r, std::pow(r, -2.0)});
  FitResult f = loglog_fit(pts);
  CHECK(std::abs(f.slope + 2.0) < 1e-12);
  CHECK(std::abs(f.intercept) < 1e-12);
  CHECK(f.r_squared == doctest::Approx(1.0));

  for (auto& p : pts) p.value = 7.0;
  CHECK(std::abs(loglog_fit(pts).slope) < 1e-12);

  // Scale equivariance, weighted and unweighted.
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<FitPoint> noisy;
  for (double r = 2.0; r <= 8192.0; r *= 2.0) {
    const double v = std::pow(r, -0.4) * (1.0 + 0.1 * z(gen));
    noisy.push_back({r, v, 0.1 * v});
  }
  const FitResult a = loglog_fit(noisy);
  CHECK(std::abs(a.slope + 0.4) < 0.05);
  CHECK(a.slope_stderr > 0.0);
  auto scaled = noisy;
  for (auto& p : scaled) {
    p.value *= 13.0;
    p.stderr_ *= 13.0;
  }
  const FitResult b = loglog_fit(scaled);
  CHECK(std::abs(a.slope - b.slope) < 1e-12);
  CHECK(b.intercept == doctest::Approx(a.intercept + std::log(13.0)));

  // One noiseless heavy point pulls the weighted fit.
  std::vector<FitPoint> w = {{1.0, 1.0, 1e-6}, {2.0, 0.25, 1e-6}, {4.0, 1.0, 1.0}};
  CHECK(loglog_fit(w).slope < -1.9);

  CHECK_THROWS_AS(loglog_fit({{1.0, 1.0}, {2.0, 0.5}}), ValidationError);
  CHECK_THROWS_AS(loglog_fit({{1.0, 1.0}, {2.0, 0.0}, {3.0, 1.0}}), ValidationError);
  CHECK_THROWS_AS(loglog_fit({{2.0, 1.0}, {2.0, 0.5}, {2.0, 1.0}}), ValidationError);
}
