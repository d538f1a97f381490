#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longarm/lattice.hpp"
#include "longarm/random.hpp"

namespace longarm {

enum class KernelShape { Canonical, BoundedUniform, Exponential, CustomTable };

std::string to_string(KernelShape shape);
KernelShape kernel_shape_from_string(const std::string& name);

/// Parameters of a one-step distribution D(0,x) = h(x/lambda) / sum_y h(y/lambda).
struct KernelSpec {
  int d = 1;
  /// Decay exponent; empty means alpha = infinity (bounded or exponential h).
  std::optional<double> alpha;
  double lambda = 1.0;
  KernelShape shape = KernelShape::Canonical;
  /// Rate for the exponential profile h(x) = exp(-kappa |x|_inf).
  double kappa = 1.0;
  /// CustomTable: h by sup-norm radius (of x/lambda scaled to the lattice,
  /// i.e. entry k is the weight of every site with |x|_inf = k), followed by
  /// the envelope custom_tail * (|x|_2 / lambda)^{-d-alpha}.
  std::vector<double> custom_weights;
  double custom_tail = 1.0;
  /// Radius of the tabulated shell CDF; 0 picks 4096 for d <= 2 and 256 above.
  Coord tab_radius = 0;

  static KernelSpec canonical(int d, double alpha, double lambda = 1.0);
  static KernelSpec bounded_uniform(int d, double lambda);
  static KernelSpec exponential(int d, double kappa, double lambda = 1.0);
};

/// Built one-step distribution. Immutable after construction and safe to
/// share between threads; sampling takes the caller's RandomStream.
class Kernel {
 public:
  explicit Kernel(KernelSpec spec);

  const KernelSpec& spec() const { return spec_; }
  int dim() const { return spec_.d; }

  /// Profile h(x/lambda) before normalization.
  double weight(const Point& x) const;

  /// D(0,x).
  double pmf(const Point& x) const { return norm_ * weight(x); }

  /// 1 / sum_x h(x/lambda).
  double norm_constant() const { return norm_; }

  /// max_x D(0,x).
  double max_pmf() const { return norm_ * max_weight_; }

  /// Largest D(0,x) over the sup-norm sphere of radius k.
  double shell_max_pmf(Coord k) const;

  /// D(0, Q_k \ Q_{k-1}), i.e. probability the step has sup-norm exactly k.
  double shell_mass(Coord k) const;

  /// P(|Y|_inf > t) = sum over x outside Q_t of D(0,x).
  double tail_mass(Coord t) const;

  /// Exact draw from D(0, .).
  Point sample_step(RandomStream& rng) const;

  /// Sup-norm radius of an exact draw (used where only the radius matters).
  Coord sample_radius(RandomStream& rng) const;

  /// Uniform site of the sphere of radius k, thinned to D restricted to it.
  Point sample_in_shell(Coord k, RandomStream& rng) const;

  /// sum over Q_cutoff of |x|_2^q D(0,x).
  double moment_partial(double q, Coord cutoff) const;

  Coord tab_radius() const { return tab_radius_; }

  /// Radius beyond which the kernel has no mass; -1 if unbounded.
  Coord support_radius() const { return support_radius_; }

  /// Whether h has a power-law tail beyond the table.
  bool heavy_tailed() const { return heavy_; }

 private:
  double exponent() const { return spec_.d + *spec_.alpha; }
  double unnormalized_tail(Coord t) const;
  Coord sample_tail_radius_and_site(RandomStream& rng, Point* site) const;

  KernelSpec spec_;
  Coord tab_radius_ = 0;
  Coord support_radius_ = -1;
  bool heavy_ = false;
  double norm_ = 1.0;
  double max_weight_ = 1.0;

  // Unnormalized shell sums W(k) and per-shell maxima, k = 0..tab_radius_.
  std::vector<double> shell_weight_;
  std::vector<double> shell_max_;
  // Normalized CDF over radii, cdf_[k] = P(|Y|_inf <= k).
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
  // Exact shell sums past the table, used for tail_mass and the fit.
  std::vector<double> ext_weight_;
  // Suffix sums: unnormalized mass beyond radius k for k in [tab, tab+ext].
  std::vector<double> ext_suffix_;
  // Asymptotic model of W(k) past the exact extension:
  // W(k) = sum_m coef_[m] * k^{d-1-m-d-alpha}.
  std::vector<double> tail_coef_;
  double tail_beyond_ = 0.0;  // unnormalized mass beyond tab_radius_
  double envelope_ = 0.0;     // rejection constant for radii > tab_radius_
};

/// Hurwitz zeta sum_{n>=0} (a+n)^{-s}, s > 1, a > 0.
double hurwitz_zeta(double s, double a);

}  // namespace longarm
