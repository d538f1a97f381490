#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "longarm/estimate.hpp"
#include "longarm/gw.hpp"
#include "longarm/kernel.hpp"
#include "longarm/lattice.hpp"
#include "longarm/random.hpp"

namespace longarm {

/// A Galton-Watson tree with a lattice position per vertex; pos[0] is the origin.
struct Embedding {
  Tree tree;
  std::vector<Point> pos;

  bool truncated() const { return tree.truncated; }
  std::size_t size() const { return pos.size(); }
};

/// Tree and positions generated together in breadth-first order.
Embedding sample_brw(const OffspringDist& off, const Kernel& kernel, std::int64_t cap, RandomStream& rng);

/// Some particle leaves Q_r. r = -1 is always true.
bool one_arm(const Embedding& emb, Coord r);

Coord max_displacement(const Embedding& emb);

template <typename Pred>
std::int64_t count_in_set(const Embedding& emb, Pred&& in_set) {
  std::int64_t n = 0;
  for (const auto& x : emb.pos) n += in_set(x) ? 1 : 0;
  return n;
}

struct BoundaryStats {
  std::int64_t x_j = 0;
  std::int64_t a_j = 0;
};

/// X_j: particles in the shell Q_j \ Q_{j-w} whose strict ancestors all lie in
/// Q_{j-w}. A_j: strict descendants of those particles that land in the
/// half-cube of side floor(L^rho_over) attached to their counted ancestor.
BoundaryStats boundary_stats(const Embedding& emb, Coord j, Coord w, Coord L, double rho_over);

/// Some parent-child step has sup-norm >= threshold.
bool long_edge_event(const Embedding& emb, Coord threshold);

/// cap(r) = fixed if set, else ceil(K * max(r,1)^{2 rho}).
struct CapPolicy {
  double K = 100.0;
  double rho = 1.0;
  std::optional<std::int64_t> fixed;

  std::int64_t cap(Coord r) const;
};

struct BrwEstimateOptions {
  std::int64_t samples = 0;
  CapPolicy caps;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::int64_t block = 4096;
};

/// One-arm frequencies for every radius on a single shared sample of trees.
/// A tree counts as a hit for r if a particle leaves Q_r or if the tree grows
/// past cap(r). Output depends only on the options, not on the worker count.
EstimateTable estimate_gamma_brw(const OffspringDist& off, const Kernel& kernel, const std::vector<Coord>& radii,
                                 const BrwEstimateOptions& opt);

/// P(|T| > cap) from the total-progeny oracle; beyond 2^14 the tail is
/// continued as c / sqrt(s) from the last exact value.
double progeny_tail_beyond(const OffspringDist& off, std::int64_t cap);

struct VolumeMoments {
  Coord r = 0;
  Coord R = 0;
  std::int64_t samples = 0;
  double mean_v = 0.0;
  double se_v = 0.0;
  double mean_v2 = 0.0;
  double se_v2 = 0.0;
  std::int64_t truncated = 0;
};

/// Sample moments of |V(Q_r)| for the branching random walk killed on leaving Q_R.
VolumeMoments estimate_volume_moments(const OffspringDist& off, const Kernel& kernel, Coord r, Coord R,
                                      std::int64_t samples, std::uint64_t seed, unsigned workers = 0,
                                      std::int64_t cap = std::int64_t{1} << 32);

}  // namespace longarm
