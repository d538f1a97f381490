#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace longarm {

struct ExponentSet {
  double alpha;
  double rho;      // (4 ^ alpha) / 2
  double xi;       // alpha / (2 alpha + 2) ^ 2/5
  double beta_lo;  // 11 / (10 (4 ^ alpha))
  double beta_hi;  // (alpha + 1) / alpha^2 for alpha <= 4, else 5/16
};

/// Rejects alpha <= 0 and alpha = 2.
ExponentSet exponents(double alpha);

struct BetaReport {
  bool shell_exponent;  // -(beta ^ 1/(2 rho)) < 1 - 2 beta rho < 0
  bool growth;          // 2 beta rho > 11/10
  bool percolation;     // -1 < beta (xi - rho) < 0
  bool all() const { return shell_exponent && growth && percolation; }
};

BetaReport beta_constraints_hold(double alpha, double beta);

struct DerivedScales {
  double delta;
  double L;
  double N;
  std::vector<double> j;
};

/// delta = eps^{1/(2 rho)}, L = eps^beta r, N = lambda / (4 (eps^beta + delta)),
/// j_i = r + lambda r / 4 + i (L + delta r) for i = 0..floor(N). Throws
/// NumericalGuard when N >= 2^24.
DerivedScales derived_scales(double epsilon, double r, double lambda, double alpha, double beta);

/// Standard normal quantile.
double normal_quantile(double p);

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_ci(std::int64_t hits, std::int64_t trials, double level = 0.95);

struct FitPoint {
  double x;
  double value;
  double stderr_ = 0.0;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  Eigen::VectorXd weights;
};

/// Weighted least squares of log(value) on log(x). Weights are the inverse
/// variances of log(value), stderr / value, when every point carries a
/// positive stderr; otherwise the fit is unweighted and the slope error uses
/// the residual scale.
FitResult loglog_fit(const std::vector<FitPoint>& points);

}  // namespace longarm
