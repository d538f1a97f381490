#include "longarm/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "longarm/errors.hpp"

namespace longarm {

ExponentSet exponents(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive and finite");
  require(alpha != 2.0, "alpha = 2 is excluded");
  ExponentSet e;
  e.alpha = alpha;
  const double a4 = std::min(4.0, alpha);
  e.rho = 0.5 * a4;
  e.xi = std::min(alpha / (2.0 * alpha + 2.0), 0.4);
  e.beta_lo = 11.0 / (10.0 * a4);
  e.beta_hi = alpha <= 4.0 ? (alpha + 1.0) / (alpha * alpha) : 5.0 / 16.0;
  return e;
}

BetaReport beta_constraints_hold(double alpha, double beta) {
  const ExponentSet e = exponents(alpha);
  const double t = 1.0 - 2.0 * beta * e.rho;
  BetaReport rep;
  rep.shell_exponent = -std::min(beta, 1.0 / (2.0 * e.rho)) < t && t < 0.0;
  rep.growth = 2.0 * beta * e.rho > 1.1;
  const double q = beta * (e.xi - e.rho);
  rep.percolation = -1.0 < q && q < 0.0;
  return rep;
}

DerivedScales derived_scales(double epsilon, double r, double lambda, double alpha, double beta) {
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
  require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0,1]");
  require(r >= 1.0, "r must be >= 1");
  require(beta > 0.0, "beta must be positive");
  const ExponentSet e = exponents(alpha);
  DerivedScales s;
  s.delta = std::pow(epsilon, 1.0 / (2.0 * e.rho));
  const double eb = std::pow(epsilon, beta);
  s.L = eb * r;
  s.N = lambda / (4.0 * (eb + s.delta));
  const double lo = r * (1.0 + lambda / 4.0);
  const double hi = r * (1.0 + lambda / 2.0);
  if (!(s.N < 16777216.0)) throw NumericalGuard("derived level list too long");
  const auto count = static_cast<std::int64_t>(std::floor(s.N));
  for (std::int64_t i = 0; i <= count; ++i) {
    const double j = lo + static_cast<double>(i) * (s.L + s.delta * r);
    if (j < lo || j > hi * (1.0 + 1e-12)) throw NumericalGuard("derived level outside [r(1+lambda/4), r(1+lambda/2)]");
    s.j.push_back(j);
  }
  return s;
}

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "quantile level must lie in (0,1)");
  // Acklam's rational approximation, refined by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                              3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::pair<double, double> wilson_ci(std::int64_t hits, std::int64_t trials, double level) {
  require(trials >= 1, "wilson_ci needs trials >= 1");
  require(hits >= 0 && hits <= trials, "wilson_ci needs 0 <= hits <= trials");
  require(level > 0.0 && level < 1.0, "confidence level must lie in (0,1)");
  const double z = normal_quantile(0.5 + 0.5 * level);
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  double lo = std::max(0.0, centre - half);
  double hi = std::min(1.0, centre + half);
  if (hits == 0) lo = 0.0;
  if (hits == trials) hi = 1.0;
  return {lo, hi};
}

FitResult loglog_fit(const std::vector<FitPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  require(n >= 3, "loglog_fit needs at least 3 points");
  bool weighted = true;
  for (const auto& p : points) {
    require(p.x > 0.0 && p.value > 0.0, "loglog_fit needs positive abscissae and values");
    if (!(p.stderr_ > 0.0)) weighted = false;
  }
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  FitResult fit;
  fit.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = std::log(p.x);
    y(i) = std::log(p.value);
    const double rel = p.stderr_ / p.value;
    fit.weights(i) = weighted ? 1.0 / (rel * rel) : 1.0;
  }
  require(X.col(1).maxCoeff() > X.col(1).minCoeff(), "loglog_fit needs distinct abscissae");
  const Eigen::VectorXd sw = fit.weights.cwiseSqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * X;
  const Eigen::VectorXd b = sw.asDiagonal() * y;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::Vector2d beta = qr.solve(b);
  fit.intercept = beta(0);
  fit.slope = beta(1);
  const Eigen::VectorXd resid = b - A * beta;
  const Eigen::Matrix2d cov = (A.transpose() * A).inverse();
  const double scale = weighted ? 1.0 : (n > 2 ? resid.squaredNorm() / static_cast<double>(n - 2) : 0.0);
  fit.slope_stderr = std::sqrt(std::max(0.0, cov(1, 1) * scale));
  const double wsum = fit.weights.sum();
  const double ybar = fit.weights.dot(y) / wsum;
  const double ss_tot = (fit.weights.array() * (y.array() - ybar).square()).sum();
  const double ss_res = resid.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace longarm
