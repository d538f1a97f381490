#include "longarm/kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "longarm/errors.hpp"

namespace longarm {
namespace {

// Neumaier-compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Visits one representative per orbit of the sup-norm sphere of radius k
// under signed coordinate permutations: a_0 = k >= a_1 >= ... >= a_{d-1} >= 0.
// The callback receives the representative and its orbit size.
template <typename F>
void for_each_shell_orbit(int d, Coord k, F&& visit) {
  Point x(d);
  x(0) = k;
  double factorial[kMaxDim + 1] = {1, 1, 2, 6, 24, 120, 720};
  auto orbit_size = [&](const Point& p) {
    double count = factorial[d];
    int run = 1;
    for (int i = 1; i <= d; ++i) {
      if (i < d && p(i) == p(i - 1)) {
        ++run;
      } else {
        count /= factorial[run];
        run = 1;
      }
    }
    for (int i = 0; i < d; ++i) {
      if (p(i) != 0) count *= 2;
    }
    return count;
  };
  auto fill = [&](auto&& self, int pos, Coord bound) -> void {
    if (pos == d) {
      visit(static_cast<const Point&>(x), orbit_size(x));
      return;
    }
    for (Coord v = bound; v >= 0; --v) {
      x(pos) = v;
      self(self, pos + 1, v);
    }
  };
  fill(fill, 1, k);
}

// Exact |S_k| as a double without cancellation: 2 * sum_{j odd} C(d,j) (2k)^{d-j}.
double shell_size_real(int d, double k) {
  double total = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= d; ++j) {
    if (j % 2 == 1) total += 2.0 * binom * std::pow(2.0 * k, d - j);
    binom = binom * (d - j) / (j + 1);
  }
  return total;
}

constexpr double kMaxTailRadius = 1099511627776.0;  // 2^40

}  // namespace

std::string to_string(KernelShape shape) {
  switch (shape) {
    case KernelShape::Canonical: return "canonical";
    case KernelShape::BoundedUniform: return "bounded-uniform";
    case KernelShape::Exponential: return "exponential";
    case KernelShape::CustomTable: return "custom-table";
  }
  return "unknown";
}

KernelShape kernel_shape_from_string(const std::string& name) {
  if (name == "canonical") return KernelShape::Canonical;
  if (name == "bounded-uniform" || name == "bounded") return KernelShape::BoundedUniform;
  if (name == "exponential") return KernelShape::Exponential;
  if (name == "custom-table") return KernelShape::CustomTable;
  throw ValidationError("unknown kernel shape '" + name + "'");
}

KernelSpec KernelSpec::canonical(int d, double alpha, double lambda) {
  KernelSpec s;
  s.d = d;
  s.alpha = alpha;
  s.lambda = lambda;
  s.shape = KernelShape::Canonical;
  return s;
}

KernelSpec KernelSpec::bounded_uniform(int d, double lambda) {
  KernelSpec s;
  s.d = d;
  s.lambda = lambda;
  s.shape = KernelShape::BoundedUniform;
  return s;
}

KernelSpec KernelSpec::exponential(int d, double kappa, double lambda) {
  KernelSpec s;
  s.d = d;
  s.kappa = kappa;
  s.lambda = lambda;
  s.shape = KernelShape::Exponential;
  return s;
}

double hurwitz_zeta(double s, double a) {
  require(s > 1.0 && a > 0.0, "hurwitz_zeta requires s > 1 and a > 0");
  // Euler-Maclaurin with the first eight Bernoulli corrections.
  static constexpr double kB2j[] = {1.0 / 6,         -1.0 / 30,     1.0 / 42,     -1.0 / 30,
                                    5.0 / 66,        -691.0 / 2730, 7.0 / 6,      -3617.0 / 510};
  const double start = std::max(16.0, 2.0 * s);
  int n_direct = 0;
  while (a + n_direct < start) ++n_direct;
  CompensatedSum acc;
  for (int n = n_direct - 1; n >= 0; --n) acc.add(std::pow(a + n, -s));
  const double b = a + n_direct;
  acc.add(std::pow(b, 1.0 - s) / (s - 1.0));
  acc.add(0.5 * std::pow(b, -s));
  double rising = s;     // s (s+1) ... (s+2j-2)
  double fact = 2.0;     // (2j)!
  double power = std::pow(b, -s - 1.0);
  for (int j = 1; j <= 8; ++j) {
    acc.add(kB2j[j - 1] / fact * rising * power);
    rising *= (s + 2 * j - 1) * (s + 2 * j);
    fact *= (2 * j + 1) * (2 * j + 2);
    power /= b * b;
  }
  return acc.value();
}

Kernel::Kernel(KernelSpec spec) : spec_(std::move(spec)) {
  const int d = spec_.d;
  require(d >= 1 && d <= kMaxDim, "kernel dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  require(spec_.lambda > 0.0, "kernel scale lambda must be positive");
  if (spec_.alpha) {
    require(*spec_.alpha > 0.0, "alpha must be positive");
    require(*spec_.alpha != 2.0, "alpha = 2 is excluded");
  }
  switch (spec_.shape) {
    case KernelShape::Canonical:
      require(spec_.alpha.has_value(), "canonical kernel requires finite alpha");
      heavy_ = true;
      break;
    case KernelShape::CustomTable:
      require(spec_.alpha.has_value(), "custom-table kernel requires finite alpha for its tail envelope");
      require(!spec_.custom_weights.empty(), "custom-table kernel requires weights");
      require(spec_.custom_tail > 0.0, "custom-table tail coefficient must be positive");
      for (double w : spec_.custom_weights) require(w >= 0.0 && std::isfinite(w), "custom weights must be finite and >= 0");
      heavy_ = true;
      break;
    case KernelShape::Exponential:
      require(spec_.kappa > 0.0, "exponential kernel requires kappa > 0");
      break;
    case KernelShape::BoundedUniform:
      break;
  }
  if (!heavy_) spec_.alpha.reset();

  Coord tab = spec_.tab_radius > 0 ? spec_.tab_radius : (d <= 2 ? 4096 : (d == 3 ? 256 : 64));
  require(tab >= 1, "tab_radius must be >= 1");
  if (spec_.shape == KernelShape::BoundedUniform) {
    support_radius_ = static_cast<Coord>(std::floor(spec_.lambda));
    tab = std::max<Coord>(support_radius_, 1);
  } else if (spec_.shape == KernelShape::Exponential) {
    // Extend until the remaining mass is below double resolution of the total.
    const double rate = spec_.kappa / spec_.lambda;
    Coord k = 1;
    while (std::log(2.0 * d) + (d - 1) * std::log(2.0 * k + 1.0) - rate * static_cast<double>(k) > std::log(1e-20)) ++k;
    tab = std::max(tab, k);
  } else {
    tab = std::max<Coord>(tab, static_cast<Coord>(std::ceil(spec_.lambda)) + 1);
    if (spec_.shape == KernelShape::CustomTable) tab = std::max<Coord>(tab, static_cast<Coord>(spec_.custom_weights.size()));
  }
  tab_radius_ = tab;

  shell_weight_.assign(tab + 1, 0.0);
  shell_max_.assign(tab + 1, 0.0);
  for (Coord k = 0; k <= tab; ++k) {
    CompensatedSum acc;
    double mx = 0.0;
    for_each_shell_orbit(d, k, [&](const Point& x, double count) {
      const double h = weight(x);
      acc.add(count * h);
      mx = std::max(mx, h);
    });
    shell_weight_[k] = acc.value();
    shell_max_[k] = mx;
  }
  max_weight_ = *std::max_element(shell_max_.begin(), shell_max_.end());

  if (heavy_) {
    const double s = exponent();
    const double coef = spec_.shape == KernelShape::Canonical ? 1.0 : spec_.custom_tail;
    const double alpha = *spec_.alpha;
    Coord ext = 0;
    if (d == 1) {
      // W(k) = 2 coef (k/lambda)^{-s} exactly for k > tab >= lambda.
      tail_coef_ = {2.0 * coef * std::pow(spec_.lambda, s)};
    } else {
      ext = std::max<Coord>(tab, 64);
      ext_weight_.assign(ext, 0.0);
      for (Coord i = 0; i < ext; ++i) {
        const Coord k = tab + 1 + i;
        CompensatedSum acc;
        for_each_shell_orbit(d, k, [&](const Point& x, double count) { acc.add(count * weight(x)); });
        ext_weight_[i] = acc.value();
      }
      // Least-squares fit of W(k) k^{s-d+1} = sum_m b_m (K/k)^m over the upper
      // half of the extension, K = first fitted radius.
      const int terms = 8;
      const Coord first = tab + 1 + ext / 2;
      const Coord count = tab + ext - first + 1;
      Eigen::MatrixXd basis(count, terms);
      Eigen::VectorXd target(count);
      for (Coord i = 0; i < count; ++i) {
        const Coord k = first + i;
        const double t = static_cast<double>(first) / static_cast<double>(k);
        double tp = 1.0;
        for (int m = 0; m < terms; ++m) {
          basis(i, m) = tp;
          tp *= t;
        }
        target(i) = ext_weight_[k - tab - 1] * std::pow(static_cast<double>(k), s - d + 1);
      }
      const Eigen::VectorXd b = basis.colPivHouseholderQr().solve(target);
      tail_coef_.resize(terms);
      for (int m = 0; m < terms; ++m) tail_coef_[m] = b(m) * std::pow(static_cast<double>(first), m);
    }
    // Mass beyond the extension from the model, then exact extension shells.
    const double model_start = static_cast<double>(tab + ext + 1);
    double beyond = 0.0;
    for (std::size_t m = 0; m < tail_coef_.size(); ++m) {
      beyond += tail_coef_[m] * hurwitz_zeta(s - d + 1 + static_cast<double>(m), model_start);
    }
    ext_suffix_.assign(ext + 1, 0.0);
    ext_suffix_[ext] = beyond;
    CompensatedSum acc;
    acc.add(beyond);
    for (Coord i = ext - 1; i >= 0; --i) {
      acc.add(ext_weight_[i]);
      ext_suffix_[i] = acc.value();
    }
    tail_beyond_ = ext_suffix_[0];
    const double R = static_cast<double>(tab);
    envelope_ = coef * 2.0 * d * std::pow(spec_.lambda, s) / (alpha * std::pow(R, alpha)) *
                std::pow(2.0 + 1.0 / (R + 1.0), d - 1);
  }

  CompensatedSum total;
  total.add(tail_beyond_);
  for (Coord k = tab; k >= 0; --k) total.add(shell_weight_[k]);
  norm_ = 1.0 / total.value();

  cdf_.assign(tab + 1, 0.0);
  CompensatedSum run;
  for (Coord k = 0; k <= tab; ++k) {
    run.add(shell_weight_[k]);
    cdf_[k] = run.value() * norm_;
  }
  if (!heavy_) cdf_[tab] = 1.0;

  const std::size_t guide_size = static_cast<std::size_t>(std::clamp<Coord>(tab, 256, 65536));
  guide_.assign(guide_size, 0);
  Coord k = 0;
  for (std::size_t b = 0; b < guide_size; ++b) {
    const double u = static_cast<double>(b) / static_cast<double>(guide_size);
    while (k < tab && cdf_[k] <= u) ++k;
    guide_[b] = static_cast<std::uint32_t>(k);
  }
}

double Kernel::weight(const Point& x) const {
  const double lam = spec_.lambda;
  switch (spec_.shape) {
    case KernelShape::Canonical: {
      const double r = euclidean_norm(x) / lam;
      return r <= 1.0 ? 1.0 : std::pow(r, -exponent());
    }
    case KernelShape::BoundedUniform:
      return static_cast<double>(sup_norm(x)) <= lam ? 1.0 : 0.0;
    case KernelShape::Exponential:
      return std::exp(-spec_.kappa * static_cast<double>(sup_norm(x)) / lam);
    case KernelShape::CustomTable: {
      const Coord k = sup_norm(x);
      if (k < static_cast<Coord>(spec_.custom_weights.size())) return spec_.custom_weights[k];
      return spec_.custom_tail * std::pow(euclidean_norm(x) / lam, -exponent());
    }
  }
  return 0.0;
}

double Kernel::shell_max_pmf(Coord k) const {
  if (k < 0) return 0.0;
  if (k <= tab_radius_) return norm_ * shell_max_[k];
  if (!heavy_) return 0.0;
  const double coef = spec_.shape == KernelShape::Canonical ? 1.0 : spec_.custom_tail;
  return norm_ * coef * std::pow(static_cast<double>(k) / spec_.lambda, -exponent());
}

double Kernel::shell_mass(Coord k) const {
  if (k < 0) return 0.0;
  if (k <= tab_radius_) return norm_ * shell_weight_[k];
  if (!heavy_) return 0.0;
  const Coord i = k - tab_radius_ - 1;
  if (i < static_cast<Coord>(ext_weight_.size())) return norm_ * ext_weight_[i];
  double w = 0.0;
  const double kk = static_cast<double>(k);
  for (std::size_t m = 0; m < tail_coef_.size(); ++m) {
    w += tail_coef_[m] * std::pow(kk, spec_.d - 1.0 - static_cast<double>(m) - exponent());
  }
  return norm_ * w;
}

double Kernel::unnormalized_tail(Coord t) const {
  if (!heavy_) return 0.0;
  const Coord i = t - tab_radius_;
  if (i < static_cast<Coord>(ext_suffix_.size())) return ext_suffix_[i];
  double beyond = 0.0;
  for (std::size_t m = 0; m < tail_coef_.size(); ++m) {
    beyond += tail_coef_[m] * hurwitz_zeta(exponent() - spec_.d + 1 + static_cast<double>(m), static_cast<double>(t + 1));
  }
  return beyond;
}

double Kernel::tail_mass(Coord t) const {
  require(t >= 0, "tail_mass requires t >= 0");
  if (t >= tab_radius_) return norm_ * unnormalized_tail(t);
  // 1 - cdf loses relative precision deep in the tail; sum the shells instead.
  CompensatedSum acc;
  acc.add(tail_beyond_);
  for (Coord k = tab_radius_; k > t; --k) acc.add(shell_weight_[k]);
  return norm_ * acc.value();
}

Coord Kernel::sample_radius(RandomStream& rng) const {
  const double u = rng.uniform();
  if (u >= cdf_[tab_radius_]) return sample_tail_radius_and_site(rng, nullptr);
  const auto b = static_cast<std::size_t>(u * static_cast<double>(guide_.size()));
  Coord k = guide_[std::min(b, guide_.size() - 1)];
  while (cdf_[k] <= u) ++k;
  return k;
}

Point Kernel::sample_in_shell(Coord k, RandomStream& rng) const {
  const int d = spec_.d;
  if (k == 0) return Point::Zero(d);
  const double top = k <= tab_radius_ ? shell_max_[k] : shell_max_pmf(k) / norm_;
  Point x(d);
  for (;;) {
    const auto face = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d)));
    const int axis = face / 2;
    int on_face = 0;
    for (int i = 0; i < d; ++i) {
      if (i == axis) {
        x(i) = face % 2 == 0 ? k : -k;
      } else {
        x(i) = rng.between(-k, k);
      }
      if (x(i) == k || x(i) == -k) ++on_face;
    }
    // Sites on several faces are proposed once per face.
    if (on_face > 1 && rng.below(static_cast<std::uint64_t>(on_face)) != 0) continue;
    if (d == 1) return x;
    const double w = weight(x);
    if (w >= top || rng.uniform() * top < w) return x;
  }
}

Coord Kernel::sample_tail_radius_and_site(RandomStream& rng, Point* site) const {
  // Pareto(tab, alpha) proposal on radii, uniform site on the sphere, then
  // rejection against the envelope constant; exact for radii up to 2^40.
  const double alpha = *spec_.alpha;
  const double R = static_cast<double>(tab_radius_);
  const int d = spec_.d;
  for (;;) {
    const double y = R * std::pow(rng.uniform_open_low(), -1.0 / alpha);
    const double kr = std::min(std::floor(y) + 1.0, kMaxTailRadius);
    const auto k = static_cast<Coord>(kr);
    Point x = Point::Zero(d);
    {
      const auto face = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d)));
      const int axis = face / 2;
      int on_face = 0;
      for (int i = 0; i < d; ++i) {
        x(i) = i == axis ? (face % 2 == 0 ? k : -k) : rng.between(-k, k);
        if (x(i) == k || x(i) == -k) ++on_face;
      }
      if (on_face > 1 && rng.below(static_cast<std::uint64_t>(on_face)) != 0) continue;
    }
    const double proposal = std::pow(R / kr, alpha) * std::expm1(-alpha * std::log1p(-1.0 / kr));
    const double ratio = weight(x) * shell_size_real(d, kr) / (envelope_ * proposal);
    if (ratio > 1.0 + 1e-9) throw NumericalGuard("tail sampler envelope violated");
    if (rng.uniform() < ratio) {
      if (site) *site = x;
      return k;
    }
  }
}

Point Kernel::sample_step(RandomStream& rng) const {
  const double u = rng.uniform();
  if (u >= cdf_[tab_radius_]) {
    Point x;
    sample_tail_radius_and_site(rng, &x);
    return x;
  }
  const auto b = static_cast<std::size_t>(u * static_cast<double>(guide_.size()));
  Coord k = guide_[std::min(b, guide_.size() - 1)];
  while (cdf_[k] <= u) ++k;
  return sample_in_shell(k, rng);
}

double Kernel::moment_partial(double q, Coord cutoff) const {
  require(q >= 0.0, "moment order must be non-negative");
  require(cutoff >= 1, "moment cutoff must be >= 1");
  CompensatedSum acc;
  for (Coord k = 0; k <= cutoff; ++k) {
    for_each_shell_orbit(spec_.d, k, [&](const Point& x, double count) {
      const double r2 = static_cast<double>(squared_norm(x));
      acc.add(count * std::pow(r2, 0.5 * q) * weight(x));
    });
  }
  return acc.value() * norm_;
}

}  // namespace longarm
