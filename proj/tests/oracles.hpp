#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "longarm/gw.hpp"
#include "longarm/random.hpp"

namespace oracle {

/// P(|T| = n), n = 1..n_max, by summing over every Lukasiewicz word
/// (xi_1..xi_n) with 1 + sum_{i<=k}(xi_i - 1) > 0 for k < n and = 0 at k = n.
inline std::vector<double> lukasiewicz_pmf(const std::function<double(int)>& p, int n_max) {
  std::vector<double> out(static_cast<std::size_t>(n_max), 0.0);
  std::function<void(int, int, double)> walk = [&](int k, int height, double prob) {
    if (height == 0) {
      out[static_cast<std::size_t>(k - 1)] += prob;
      return;
    }
    if (k == n_max) return;
    for (int xi = 0; height + xi - 1 <= n_max - k - 1; ++xi) {
      const double q = p(xi);
      if (q > 0.0) walk(k + 1, height + xi - 1, prob * q);
    }
  };
  walk(0, 1, 1.0);
  return out;
}

/// Bin of a total-progeny size: singletons up to 64, dyadic blocks beyond,
/// and one bin for trees that reached the cap.
inline std::size_t progeny_bin(std::int64_t n, bool truncated) {
  if (truncated) return 0;
  if (n <= 64) return static_cast<std::size_t>(n);
  std::size_t b = 64;
  std::int64_t lo = 64;
  while (n > lo) {
    lo *= 2;
    ++b;
  }
  return b;
}

/// Total-variation distance between binned sampled tree sizes and the
/// binned oracle law (trees reaching `cap` vertices share one bin).
inline double progeny_tv(const longarm::OffspringDist& off, std::int64_t samples, std::int64_t cap, std::uint64_t seed) {
  const auto pmf = longarm::total_progeny_pmf(off, cap);
  const std::size_t bins = progeny_bin(cap, false) + 1;
  std::vector<double> exact(bins, 0.0), seen(bins, 0.0);
  double below = 0.0;
  for (std::int64_t n = 1; n < cap; ++n) {
    exact[progeny_bin(n, false)] += pmf[static_cast<std::size_t>(n - 1)];
    below += pmf[static_cast<std::size_t>(n - 1)];
  }
  exact[0] = 1.0 - below;
  longarm::RandomStream rng(seed);
  for (std::int64_t i = 0; i < samples; ++i) {
    const auto t = longarm::sample_tree(off, cap, rng);
    const bool big = t.truncated || static_cast<std::int64_t>(t.size()) >= cap;
    seen[progeny_bin(static_cast<std::int64_t>(t.size()), big)] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t b = 0; b < bins; ++b) tv += std::abs(seen[b] / static_cast<double>(samples) - exact[b]);
  return 0.5 * tv;
}

}  // namespace oracle
