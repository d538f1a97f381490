#pragma once

#include <cstdint>
#include <vector>

#include "longarm/random.hpp"

namespace longarm {

/// Critical offspring law: either a finite table {p_m} or the geometric law
/// p_m = 2^{-(m+1)}.
class OffspringDist {
 public:
  /// Validates sum p = 1, mean 1 and sigma^2 > 0, each to 1e-12.
  explicit OffspringDist(std::vector<double> probs);

  static OffspringDist geometric_half();
  static OffspringDist binary();  // p_0 = p_2 = 1/2

  bool is_geometric_half() const { return geometric_; }
  const std::vector<double>& table() const { return probs_; }

  /// sigma_p^2 = sum m (m-1) p_m.
  double sigma_sq() const { return sigma_sq_; }

  /// Probability generating function f(s) = sum p_m s^m, s in [0,1].
  double generating_function(double s) const;

  std::uint32_t sample(RandomStream& rng) const;

 private:
  OffspringDist() = default;

  std::vector<double> probs_;
  std::vector<double> cdf_;
  bool geometric_ = false;
  double sigma_sq_ = 0.0;
};

/// Rooted tree in breadth-first order; parent[0] = -1 and parent[i] < i.
struct Tree {
  std::vector<std::int64_t> parent;
  bool truncated = false;

  std::size_t size() const { return parent.size(); }
};

/// Breadth-first Galton-Watson tree. Generation stops, with truncated = true,
/// as soon as adding a vertex's children would exceed `cap` vertices.
Tree sample_tree(const OffspringDist& off, std::int64_t cap, RandomStream& rng);

/// P(|T| = n) for n = 1..n_max (index 0 holds n = 1), by the hitting-time
/// identity P(|T| = n) = P(S_n = n - 1) / n.
std::vector<double> total_progeny_pmf(const OffspringDist& off, std::int64_t n_max);

/// P(|T| >= s) for s = 1..n_max from a total-progeny pmf (index 0 is s = 1).
std::vector<double> survival_tail(const std::vector<double>& pmf);

/// Accumulated rounding bound attached to total_progeny_pmf(off, n_max).
inline double total_progeny_error_bound(std::int64_t n_max) { return static_cast<double>(n_max) * 1e-15; }

}  // namespace longarm
