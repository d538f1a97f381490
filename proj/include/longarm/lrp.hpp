#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "longarm/brw.hpp"
#include "longarm/estimate.hpp"
#include "longarm/kernel.hpp"
#include "longarm/lattice.hpp"
#include "longarm/random.hpp"

namespace longarm {

/// Long-range percolation on Z^d, explored inside the window Q_R: the edge
/// {x,y} is open with probability p D(x,y).
class PercolationConfig {
 public:
  /// Rejects p outside [0, 1 / max D] and R < 1.
  PercolationConfig(const Kernel& kernel, double p, Coord window);

  const Kernel& kernel() const { return *kernel_; }
  double p() const { return p_; }
  Coord window() const { return window_; }
  int dim() const { return kernel_->dim(); }

  /// Longest tabulated edge, 2R: any longer edge from Q_R leaves the window.
  Coord max_shell() const { return static_cast<Coord>(cum_.size()) - 1; }

  /// First shell k in [from, to] holding a candidate site, where each site of
  /// shell k is a candidate with probability p * max_{|x|=k} D(x). Returns
  /// to + 1 if there is none.
  Coord next_candidate_shell(Coord from, Coord to, RandomStream& rng) const;

  double candidate_probability(Coord k) const { return q_[static_cast<std::size_t>(k)]; }

  /// -sum log(1 - p D(y)) over |y|_inf > 2R, to first order p * tail_mass(2R).
  double tail_hazard() const { return tail_hazard_; }

 private:
  const Kernel* kernel_;
  double p_;
  Coord window_;
  std::vector<double> q_;
  // Cumulative finite hazards; shells with q = 1 are listed in certain_.
  std::vector<double> cum_;
  std::vector<Coord> next_certain_;
  double tail_hazard_ = 0.0;
};

/// Which pairs an exploration of one vertex has decided: y with
/// |y - x|_inf <= max_len and |y|_inf <= region.
struct Coverage {
  Coord max_len;
  Coord region;

  bool covers(const Point& x, const Point& y) const {
    return sup_norm(y - x) <= max_len && sup_norm(y) <= region;
  }
};

/// Edge states decided so far in one realization. A pair is decided once one
/// of its endpoints has been explored with a coverage that reaches the other.
class EdgeMemo {
 public:
  bool decided(const Point& x, const Point& y) const;
  const std::vector<Point>& open_neighbours(const Point& x) const;
  void add_coverage(const Point& x, Coverage c);
  void open_edge(const Point& x, const Point& y);

  /// Audit mode counts fresh draws per unordered pair.
  void enable_audit() { audit_ = true; }
  void record_draw(const Point& x, const Point& y);
  std::int64_t duplicate_draws() const { return duplicates_; }
  std::int64_t fresh_draws() const { return static_cast<std::int64_t>(drawn_.size()); }

 private:
  struct Entry {
    std::vector<Coverage> coverage;
    std::vector<Point> open;
  };
  struct PairHash {
    std::size_t operator()(const std::pair<Point, Point>& e) const noexcept {
      return PointHash{}(e.first) * 0x9E3779B97F4A7C15ULL ^ PointHash{}(e.second);
    }
  };
  struct PairEqual {
    bool operator()(const std::pair<Point, Point>& a, const std::pair<Point, Point>& b) const noexcept {
      return PointEqual{}(a.first, b.first) && PointEqual{}(a.second, b.second);
    }
  };
  std::unordered_map<Point, Entry, PointHash, PointEqual> entries_;
  bool audit_ = false;
  std::unordered_set<std::pair<Point, Point>, PairHash, PairEqual> drawn_;
  std::int64_t duplicates_ = 0;
};

struct Cluster {
  std::vector<Point> vertices;  // vertices[0] is the start
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  /// Some open edge leaves Q_R. Its far end is in the cluster and outside every Q_r, r < R.
  bool hit_window_boundary = false;
  /// Shortest such edge, for long-edge queries.
  Coord escape_length = 0;
  bool exploration_truncated = false;
  /// Exploration stopped once the cluster was known to leave Q_stop_radius.
  bool stopped_early = false;

  std::size_t size() const { return vertices.size(); }
  Coord max_displacement() const;
};

/// Exploration variants: every edge, only edges shorter than ell, or only
/// edges with both endpoints in Q_j.
struct ExploreMode {
  enum class Kind { Full, Truncated, Level } kind = Kind::Full;
  Coord param = 0;

  static ExploreMode full() { return {}; }
  static ExploreMode truncated(Coord ell) { return {Kind::Truncated, ell}; }
  static ExploreMode level(Coord j) { return {Kind::Level, j}; }
};

struct ExploreLimits {
  std::int64_t vertex_cap = std::int64_t{1} << 20;
  /// Stop as soon as the cluster is known to leave Q_stop_radius.
  std::optional<Coord> stop_radius;
};

/// Breadth-first exploration from `start` with lazy shell thinning.
Cluster explore(const PercolationConfig& cfg, const Point& start, ExploreMode mode, const ExploreLimits& limits,
                EdgeMemo& memo, RandomStream& rng);

Cluster explore_cluster(const PercolationConfig& cfg, const Point& start, std::int64_t vertex_cap, RandomStream& rng);
Cluster truncated_cluster(const PercolationConfig& cfg, const Point& start, Coord ell, RandomStream& rng);
Cluster cluster_until_level(const PercolationConfig& cfg, Coord j, RandomStream& rng);

/// Reference explorer: scans every site of Q_R and opens {x,y} iff
/// keyed_uniform(seed, pair) < p D(x - y). Realizations for different p are
/// coupled monotonically. For small windows only.
Cluster explore_cluster_scan(const PercolationConfig& cfg, const Point& start, std::uint64_t seed,
                             std::int64_t vertex_cap);

enum class ArmOutcome { Miss, Hit, Indeterminate };

/// Rejects r >= R.
ArmOutcome one_arm_lrp(const Cluster& cluster, Coord r, Coord window);

/// X_j = |C_j n shell(j,w)| and A_j = |C n (Q_{j+L} \ Q_j)| on one realization.
BoundaryStats boundary_stats_lrp(const PercolationConfig& cfg, Coord j, Coord w, Coord L, RandomStream& rng,
                                 std::int64_t vertex_cap = std::int64_t{1} << 20);

bool long_edge_event_lrp(const Cluster& cluster, Coord threshold);

struct LrpEstimateOptions {
  std::int64_t samples = 0;
  std::int64_t vertex_cap = std::int64_t{1} << 20;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::int64_t block = 256;
};

/// One-arm frequencies on shared realizations. Indeterminate outcomes are
/// counted as hits and also reported separately. Rejects max(radii) > R/4.
EstimateTable estimate_gamma_lrp(const Kernel& kernel, double p, const std::vector<Coord>& radii, Coord window,
                                 const LrpEstimateOptions& opt);

struct TailSlope {
  double p = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  std::vector<double> tail;  // P(|C| >= n) for each n of the grid
  double escape_fraction = 0.0;
};

/// Fitted slope of log P(|C| >= n) against log n, clusters explored up to
/// max(n_grid) vertices. Escaping clusters count as large. Slope is -inf
/// when some tail value is zero.
TailSlope cluster_tail_slope(const Kernel& kernel, double p, Coord window, const std::vector<std::int64_t>& n_grid,
                             std::int64_t samples, std::uint64_t seed, unsigned workers = 0);

struct PcEstimate {
  double p_c = 0.0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  TailSlope at_pc;
  double p_c_half_window = 0.0;
  double window_shift = 0.0;  // |p_c(R) - p_c(R/2)| / p_c(R)
  int iterations = 0;
  bool warned_low_dimension = false;
};

struct PcOptions {
  std::vector<std::int64_t> n_grid;
  std::int64_t samples = 0;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  double p_lo = 0.0;
  double p_hi = -1.0;  // negative: 1 / max D
  double rel_tol = 2e-3;
  int max_iter = 40;
  double target = -0.5;
};

/// Bisection on p for the tail slope crossing `target`, at window R and R/2.
PcEstimate estimate_pc(const Kernel& kernel, Coord window, const PcOptions& opt);

}  // namespace longarm
