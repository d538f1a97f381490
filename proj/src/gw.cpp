#include "longarm/gw.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "longarm/errors.hpp"

namespace longarm {

OffspringDist::OffspringDist(std::vector<double> probs) : probs_(std::move(probs)) {
  require(!probs_.empty() && probs_.size() <= 65, "offspring table must have 1..65 entries (M <= 64)");
  double total = 0.0, mean = 0.0, fact = 0.0;
  for (std::size_t m = 0; m < probs_.size(); ++m) {
    require(probs_[m] >= 0.0 && std::isfinite(probs_[m]), "offspring probabilities must be finite and >= 0");
    total += probs_[m];
    mean += static_cast<double>(m) * probs_[m];
    fact += static_cast<double>(m) * static_cast<double>(m - (m > 0 ? 1 : 0)) * probs_[m];
  }
  require(std::abs(total - 1.0) <= 1e-12, "offspring probabilities must sum to 1");
  require(std::abs(mean - 1.0) <= 1e-12, "offspring law must be critical (mean 1)");
  require(fact > 1e-12, "offspring law must have sigma^2 > 0");
  sigma_sq_ = fact;
  cdf_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cdf_.begin());
  cdf_.back() = 1.0;
}

OffspringDist OffspringDist::geometric_half() {
  OffspringDist off;
  off.geometric_ = true;
  off.sigma_sq_ = 2.0;
  return off;
}

OffspringDist OffspringDist::binary() { return OffspringDist({0.5, 0.0, 0.5}); }

double OffspringDist::generating_function(double s) const {
  if (geometric_) return 1.0 / (2.0 - s);
  double f = 0.0;
  for (std::size_t m = probs_.size(); m-- > 0;) f = f * s + probs_[m];
  return f;
}

std::uint32_t OffspringDist::sample(RandomStream& rng) const {
  if (geometric_) {
    // P(m) = 2^{-(m+1)}: the number of leading zero bits of a uniform word.
    std::uint32_t m = 0;
    for (;;) {
      const std::uint64_t w = rng.bits();
      if (w != 0) return m + static_cast<std::uint32_t>(std::countl_zero(w));
      m += 64;
    }
  }
  const double u = rng.uniform();
  std::uint32_t m = 0;
  while (cdf_[m] <= u) ++m;
  return m;
}

Tree sample_tree(const OffspringDist& off, std::int64_t cap, RandomStream& rng) {
  require(cap >= 1, "tree cap must be >= 1");
  Tree t;
  t.parent.push_back(-1);
  for (std::size_t i = 0; i < t.parent.size(); ++i) {
    const std::uint32_t children = off.sample(rng);
    if (static_cast<std::int64_t>(t.parent.size() + children) > cap) {
      t.truncated = true;
      break;
    }
    t.parent.insert(t.parent.end(), children, static_cast<std::int64_t>(i));
  }
  return t;
}

std::vector<double> total_progeny_pmf(const OffspringDist& off, std::int64_t n_max) {
  require(n_max >= 1, "n_max must be >= 1");
  std::vector<double> pmf(static_cast<std::size_t>(n_max), 0.0);
  if (off.is_geometric_half()) {
    // S_n is negative binomial: P(S_n = k) = C(n+k-1, k) 2^{-(n+k)}.
    for (std::int64_t n = 1; n <= n_max; ++n) {
      const double k = static_cast<double>(n - 1);
      const double nn = static_cast<double>(n);
      const double log_p = std::lgamma(nn + k) - std::lgamma(k + 1.0) - std::lgamma(nn) - (nn + k) * std::log(2.0);
      pmf[n - 1] = std::exp(log_p) / nn;
    }
    return pmf;
  }
  const auto& p = off.table();
  const auto len = static_cast<std::size_t>(n_max);
  // sum_dist holds P(S_n = k) for k < n_max.
  std::vector<double> sum_dist(len, 0.0), next(len, 0.0);
  for (std::size_t k = 0; k < std::min(len, p.size()); ++k) sum_dist[k] = p[k];
  const std::size_t m_top = p.size() - 1;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    pmf[n - 1] = sum_dist[n - 1] / static_cast<double>(n);
    if (n == n_max) break;
    const std::size_t support = std::min(len, static_cast<std::size_t>(n) * m_top + 1);
    const std::size_t next_support = std::min(len, support + m_top);
    std::fill(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(next_support), 0.0);
    for (std::size_t k = 0; k < support; ++k) {
      const double v = sum_dist[k];
      if (v == 0.0) continue;
      for (std::size_t m = 0; m <= m_top && k + m < len; ++m) next[k + m] += v * p[m];
    }
    sum_dist.swap(next);
  }
  return pmf;
}

std::vector<double> survival_tail(const std::vector<double>& pmf) {
  std::vector<double> tail(pmf.size());
  double sum = 0.0, carry = 0.0;
  for (std::size_t s = 0; s < pmf.size(); ++s) {
    tail[s] = 1.0 - (sum - carry);
    // Kahan step
    const double y = pmf[s] - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return tail;
}

}  // namespace longarm
