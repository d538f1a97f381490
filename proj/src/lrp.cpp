#include "longarm/lrp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longarm/errors.hpp"
#include "longarm/parallel.hpp"

namespace longarm {

PercolationConfig::PercolationConfig(const Kernel& kernel, double p, Coord window)
    : kernel_(&kernel), p_(p), window_(window) {
  require(std::isfinite(p) && p >= 0.0, "percolation parameter p must be >= 0");
  require(p * kernel.max_pmf() <= 1.0 + 1e-12, "p must not exceed 1 / max D (edge probability > 1)");
  require(window >= 1, "window radius must be >= 1");
  const Coord K = 2 * window;
  const int d = kernel.dim();
  q_.assign(static_cast<std::size_t>(K + 1), 0.0);
  cum_.assign(static_cast<std::size_t>(K + 1), 0.0);
  next_certain_.assign(static_cast<std::size_t>(K + 2), K + 1);
  for (Coord k = 1; k <= K; ++k) {
    const double q = std::min(1.0, p * kernel.shell_max_pmf(k));
    q_[static_cast<std::size_t>(k)] = q;
    const double h = q < 1.0 ? -static_cast<double>(shell_size(d, k)) * std::log1p(-q) : 0.0;
    cum_[static_cast<std::size_t>(k)] = cum_[static_cast<std::size_t>(k - 1)] + h;
  }
  for (Coord k = K; k >= 1; --k) {
    next_certain_[static_cast<std::size_t>(k)] = q_[static_cast<std::size_t>(k)] >= 1.0 ? k : next_certain_[static_cast<std::size_t>(k + 1)];
  }
  tail_hazard_ = p * kernel.tail_mass(K);
}

Coord PercolationConfig::next_candidate_shell(Coord from, Coord to, RandomStream& rng) const {
  to = std::min(to, max_shell());
  if (from > to) return to + 1;
  const Coord certain = next_certain_[static_cast<std::size_t>(from)];
  const Coord stop = std::min(to, certain - 1);
  if (from <= stop) {
    const double threshold = cum_[static_cast<std::size_t>(from - 1)] + rng.exponential();
    const auto first = cum_.begin() + from;
    const auto last = cum_.begin() + stop + 1;
    const auto it = std::upper_bound(first, last, threshold);
    if (it != last) return static_cast<Coord>(it - cum_.begin());
  }
  return certain <= to ? certain : to + 1;
}

bool EdgeMemo::decided(const Point& x, const Point& y) const {
  auto check = [this](const Point& a, const Point& b) {
    const auto it = entries_.find(a);
    if (it == entries_.end()) return false;
    return std::any_of(it->second.coverage.begin(), it->second.coverage.end(),
                       [&](const Coverage& c) { return c.covers(a, b); });
  };
  return check(x, y) || check(y, x);
}

const std::vector<Point>& EdgeMemo::open_neighbours(const Point& x) const {
  static const std::vector<Point> none;
  const auto it = entries_.find(x);
  return it == entries_.end() ? none : it->second.open;
}

void EdgeMemo::add_coverage(const Point& x, Coverage c) { entries_[x].coverage.push_back(c); }

void EdgeMemo::open_edge(const Point& x, const Point& y) {
  entries_[x].open.push_back(y);
  entries_[y].open.push_back(x);
}

void EdgeMemo::record_draw(const Point& x, const Point& y) {
  if (!audit_) return;
  const bool less = std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  if (!drawn_.insert(less ? std::make_pair(x, y) : std::make_pair(y, x)).second) ++duplicates_;
}

Coord Cluster::max_displacement() const {
  Coord m = 0;
  for (const auto& x : vertices) m = std::max(m, sup_norm(x));
  return m;
}

namespace {

struct ModeRules {
  Coord max_len;   // longest edge considered
  Coord region;    // both endpoints must lie in Q_region (Level); else the window
  bool escapes;    // edges leaving the window are recorded

  static ModeRules of(ExploreMode mode, Coord R) {
    switch (mode.kind) {
      case ExploreMode::Kind::Full:
        return {std::numeric_limits<Coord>::max(), R, true};
      case ExploreMode::Kind::Truncated:
        require(mode.param >= 1, "truncation length ell must be >= 1");
        return {mode.param - 1, R, true};
      case ExploreMode::Kind::Level:
        require(mode.param >= 0 && mode.param <= R, "level j must satisfy 0 <= j <= R");
        return {2 * mode.param, mode.param, false};
    }
    return {0, R, false};
  }

  bool allows(const Point& x, const Point& y) const {
    return sup_norm(y - x) <= max_len && sup_norm(x) <= region && sup_norm(y) <= region;
  }
};

// Index of the first candidate in a shell of n sites that holds at least one.
std::uint64_t first_candidate(std::uint64_t n, double q, RandomStream& rng) {
  if (q >= 1.0) return 0;
  const double L = std::log1p(-q);
  const double A = -std::expm1(static_cast<double>(n) * L);
  const double i = std::floor(std::log1p(-rng.uniform() * A) / L);
  if (!(i >= 0.0)) return 0;
  return std::min<std::uint64_t>(static_cast<std::uint64_t>(std::min(i, 1.8e19)), n - 1);
}

}  // namespace

Cluster explore(const PercolationConfig& cfg, const Point& start, ExploreMode mode, const ExploreLimits& limits,
                EdgeMemo& memo, RandomStream& rng) {
  const Coord R = cfg.window();
  const int d = cfg.dim();
  require(start.size() == d, "start point has the wrong dimension");
  require(sup_norm(start) <= R, "start point lies outside the window");
  require(limits.vertex_cap >= 1, "vertex cap must be >= 1");
  const ModeRules rules = ModeRules::of(mode, R);
  require(sup_norm(start) <= rules.region, "start point lies outside the exploration region");
  const Kernel& kernel = cfg.kernel();
  const double p = cfg.p();
  const Coord shell_limit = std::min(rules.max_len, cfg.max_shell());
  // Edges longer than 2R from Q_R all leave the window.
  double tail_hazard = 0.0;
  if (rules.escapes && rules.max_len > cfg.max_shell()) {
    tail_hazard = cfg.tail_hazard();
    if (rules.max_len < std::numeric_limits<Coord>::max()) {
      tail_hazard -= p * kernel.tail_mass(rules.max_len);
    }
  }
  const Coverage coverage{shell_limit, rules.region};

  Cluster cl;
  std::unordered_map<Point, std::int64_t, PointHash, PointEqual> index;
  std::vector<char> processed;
  auto discover = [&](const Point& y) -> std::int64_t {
    const auto [it, fresh] = index.emplace(y, static_cast<std::int64_t>(cl.vertices.size()));
    if (fresh) {
      cl.vertices.push_back(y);
      processed.push_back(0);
    }
    return it->second;
  };
  auto beyond_stop = [&](const Point& y) { return limits.stop_radius && sup_norm(y) > *limits.stop_radius; };
  auto escape = [&](Coord length) {
    if (!cl.hit_window_boundary || length < cl.escape_length) cl.escape_length = length;
    cl.hit_window_boundary = true;
  };

  discover(start);
  bool reached = beyond_stop(start);
  for (std::size_t head = 0; head < cl.vertices.size(); ++head) {
    if (limits.stop_radius && (reached || cl.hit_window_boundary)) {
      cl.stopped_early = true;
      break;
    }
    if (static_cast<std::int64_t>(cl.vertices.size()) >= limits.vertex_cap) {
      cl.exploration_truncated = true;
      break;
    }
    const Point v = cl.vertices[head];
    const auto vi = static_cast<std::int64_t>(head);
    processed[head] = 1;
    auto link = [&](const Point& y) {
      const std::int64_t yi = discover(y);
      if (!processed[static_cast<std::size_t>(yi)]) cl.edges.emplace_back(vi, yi);
      reached = reached || beyond_stop(y);
    };

    for (const Point& u : memo.open_neighbours(v)) {
      if (rules.allows(v, u)) link(u);
    }

    Coord k = 1;
    while (k <= shell_limit) {
      k = cfg.next_candidate_shell(k, shell_limit, rng);
      if (k > shell_limit) break;
      const std::uint64_t n = shell_size(d, k);
      const double q = cfg.candidate_probability(k);
      const double top = kernel.shell_max_pmf(k);
      for (std::uint64_t idx = first_candidate(n, q, rng); idx < n;) {
        const Point off = shell_site(d, k, idx);
        const bool open = rng.uniform() * top < kernel.pmf(off);
        const Point y = v + off;
        if (sup_norm(y) > R) {
          if (open && rules.escapes) escape(k);
        } else if (sup_norm(y) <= rules.region && !memo.decided(v, y)) {
          memo.record_draw(v, y);
          if (open) {
            memo.open_edge(v, y);
            link(y);
          }
        }
        const std::uint64_t skip = rng.geometric(q);
        if (skip >= n - idx - 1) break;
        idx += skip + 1;
      }
      ++k;
    }
    // Drawn in every mode so that modes with the same shell range share streams.
    const double u = rng.uniform();
    if (tail_hazard > 0.0 && u < -std::expm1(-tail_hazard)) escape(cfg.max_shell() + 1);
    memo.add_coverage(v, coverage);
  }
  return cl;
}

Cluster explore_cluster(const PercolationConfig& cfg, const Point& start, std::int64_t vertex_cap, RandomStream& rng) {
  EdgeMemo memo;
  return explore(cfg, start, ExploreMode::full(), {vertex_cap, std::nullopt}, memo, rng);
}

Cluster truncated_cluster(const PercolationConfig& cfg, const Point& start, Coord ell, RandomStream& rng) {
  EdgeMemo memo;
  return explore(cfg, start, ExploreMode::truncated(ell), {}, memo, rng);
}

Cluster cluster_until_level(const PercolationConfig& cfg, Coord j, RandomStream& rng) {
  EdgeMemo memo;
  return explore(cfg, origin(cfg.dim()), ExploreMode::level(j), {}, memo, rng);
}

Cluster explore_cluster_scan(const PercolationConfig& cfg, const Point& start, std::uint64_t seed,
                             std::int64_t vertex_cap) {
  const Coord R = cfg.window();
  const int d = cfg.dim();
  require(sup_norm(start) <= R, "start point lies outside the window");
  require(cube_size(d, R) <= (std::uint64_t{1} << 20), "scan explorer is for small windows");
  const Kernel& kernel = cfg.kernel();
  const std::uint64_t sites = cube_size(d, R);
  Cluster cl;
  std::vector<std::int64_t> slot(sites, -1);
  auto discover = [&](std::uint64_t ci) {
    if (slot[ci] < 0) {
      slot[ci] = static_cast<std::int64_t>(cl.vertices.size());
      cl.vertices.push_back(cube_point(d, R, ci));
    }
    return slot[ci];
  };
  discover(cube_index(start, R));
  for (std::size_t head = 0; head < cl.vertices.size(); ++head) {
    if (static_cast<std::int64_t>(cl.vertices.size()) >= vertex_cap) {
      cl.exploration_truncated = true;
      break;
    }
    const Point v = cl.vertices[head];
    const std::uint64_t vc = cube_index(v, R);
    double inside = 0.0;
    for (std::uint64_t yc = 0; yc < sites; ++yc) {
      const Point y = cube_point(d, R, yc);
      const double pr = cfg.p() * kernel.pmf(y - v);
      inside += kernel.pmf(y - v);
      if (yc == vc) continue;
      const std::uint64_t key = std::min(vc, yc) * sites + std::max(vc, yc);
      if (keyed_uniform(seed, key) < pr) {
        const bool fresh = slot[yc] < 0;
        const std::int64_t yi = discover(yc);
        if (fresh || yi > static_cast<std::int64_t>(head)) {
          if (fresh) cl.edges.emplace_back(static_cast<std::int64_t>(head), yi);
        }
      }
    }
    const double hazard = cfg.p() * std::max(0.0, 1.0 - inside);
    if (keyed_uniform(seed ^ 0xA5A5A5A5A5A5A5A5ULL, vc) < -std::expm1(-hazard)) {
      cl.hit_window_boundary = true;
      cl.escape_length = R + 1;
    }
  }
  return cl;
}

ArmOutcome one_arm_lrp(const Cluster& cluster, Coord r, Coord window) {
  require(r >= 0 && r < window, "one-arm radius must satisfy 0 <= r < R");
  if (cluster.hit_window_boundary || cluster.max_displacement() > r) return ArmOutcome::Hit;
  if (cluster.exploration_truncated || cluster.stopped_early) return ArmOutcome::Indeterminate;
  return ArmOutcome::Miss;
}

BoundaryStats boundary_stats_lrp(const PercolationConfig& cfg, Coord j, Coord w, Coord L, RandomStream& rng,
                                 std::int64_t vertex_cap) {
  require(L >= 0 && j + L <= cfg.window(), "boundary statistics need j + L <= R");
  const Shell shell(j, w);
  EdgeMemo memo;
  const Point o = origin(cfg.dim());
  const Cluster cj = explore(cfg, o, ExploreMode::level(j), {vertex_cap, std::nullopt}, memo, rng);
  const Cluster c = explore(cfg, o, ExploreMode::full(), {vertex_cap, std::nullopt}, memo, rng);
  BoundaryStats st;
  for (const auto& x : cj.vertices) st.x_j += shell_contains(x, shell) ? 1 : 0;
  for (const auto& y : c.vertices) {
    const Coord n = sup_norm(y);
    st.a_j += (n > j && n <= j + L) ? 1 : 0;
  }
  return st;
}

bool long_edge_event_lrp(const Cluster& cluster, Coord threshold) {
  if (cluster.hit_window_boundary && cluster.escape_length >= threshold) return true;
  for (const auto& [a, b] : cluster.edges) {
    if (sup_norm(cluster.vertices[static_cast<std::size_t>(a)] - cluster.vertices[static_cast<std::size_t>(b)]) >= threshold) return true;
  }
  return false;
}

EstimateTable estimate_gamma_lrp(const Kernel& kernel, double p, const std::vector<Coord>& radii, Coord window,
                                 const LrpEstimateOptions& opt) {
  require(opt.samples >= 1, "samples must be >= 1");
  require(!radii.empty(), "radii must be non-empty");
  require(opt.block >= 1, "block size must be >= 1");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] >= 0, "radii must be non-negative");
    require(i == 0 || radii[i] > radii[i - 1], "radii must be strictly increasing");
  }
  require(4 * radii.back() <= window, "largest radius must be <= R/4 (window margin)");
  const PercolationConfig cfg(kernel, p, window);
  const Coord r_max = radii.back();
  const Blocks blocks{opt.samples, opt.block};
  struct Tally {
    std::vector<std::int64_t> hits, indeterminate;
  };
  std::vector<Tally> slots(blocks.count());
  parallel_tasks(blocks.count(), opt.workers, [&](std::size_t b) {
    RandomStream rng(task_seed(opt.seed, b));
    Tally t{std::vector<std::int64_t>(radii.size(), 0), std::vector<std::int64_t>(radii.size(), 0)};
    const Point o = origin(kernel.dim());
    for (std::int64_t s = 0; s < blocks.size(b); ++s) {
      EdgeMemo memo;
      const Cluster c = explore(cfg, o, ExploreMode::full(), {opt.vertex_cap, r_max}, memo, rng);
      const Coord reach = c.max_displacement();
      for (std::size_t i = 0; i < radii.size(); ++i) {
        const bool hit = c.hit_window_boundary || reach > radii[i];
        const bool unknown = !hit && (c.exploration_truncated || c.stopped_early);
        t.hits[i] += (hit || unknown) ? 1 : 0;
        t.indeterminate[i] += unknown ? 1 : 0;
      }
    }
    slots[b] = std::move(t);
  });
  EstimateTable table;
  table.percolation = true;
  table.rows.resize(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    auto& row = table.rows[i];
    row.r = radii[i];
    row.trials = opt.samples;
    row.cap = opt.vertex_cap;
    for (const auto& t : slots) {
      row.hits += t.hits[i];
      row.indeterminate += t.indeterminate[i];
    }
    row.truncated = row.indeterminate;
    row.cap_tail_bound = row.indeterminate_fraction();
  }
  finalize_rows(table.rows);
  table.fit = fit_table(table.rows);
  return table;
}

TailSlope cluster_tail_slope(const Kernel& kernel, double p, Coord window, const std::vector<std::int64_t>& n_grid,
                             std::int64_t samples, std::uint64_t seed, unsigned workers) {
  require(samples >= 1, "samples must be >= 1");
  require(n_grid.size() >= 3, "n_grid needs at least 3 sizes");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    require(n_grid[i] >= 1 && (i == 0 || n_grid[i] > n_grid[i - 1]), "n_grid must be increasing and positive");
  }
  TailSlope out;
  out.p = p;
  out.tail.assign(n_grid.size(), 0.0);
  if (p == 0.0) {
    out.slope = -std::numeric_limits<double>::infinity();
    out.tail[0] = n_grid[0] <= 1 ? 1.0 : 0.0;
    return out;
  }
  const PercolationConfig cfg(kernel, p, window);
  const std::int64_t cap = n_grid.back();
  const Blocks blocks{samples, 256};
  struct Tally {
    std::vector<std::int64_t> at_least;
    std::int64_t escapes = 0;
  };
  std::vector<Tally> slots(blocks.count());
  parallel_tasks(blocks.count(), workers, [&](std::size_t b) {
    RandomStream rng(task_seed(seed, b));
    Tally t{std::vector<std::int64_t>(n_grid.size(), 0), 0};
    const Point o = origin(kernel.dim());
    for (std::int64_t s = 0; s < blocks.size(b); ++s) {
      EdgeMemo memo;
      ExploreLimits lim{cap, std::nullopt};
      Cluster c = explore(cfg, o, ExploreMode::full(), lim, memo, rng);
      const bool large = c.hit_window_boundary || c.exploration_truncated;
      t.escapes += c.hit_window_boundary ? 1 : 0;
      const auto size = static_cast<std::int64_t>(c.size());
      for (std::size_t i = 0; i < n_grid.size(); ++i) t.at_least[i] += (large || size >= n_grid[i]) ? 1 : 0;
    }
    slots[b] = std::move(t);
  });
  std::vector<std::int64_t> at_least(n_grid.size(), 0);
  std::int64_t escapes = 0;
  for (const auto& t : slots) {
    for (std::size_t i = 0; i < n_grid.size(); ++i) at_least[i] += t.at_least[i];
    escapes += t.escapes;
  }
  const auto n = static_cast<double>(samples);
  out.escape_fraction = static_cast<double>(escapes) / n;
  std::vector<FitPoint> pts;
  bool zero = false;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double f = static_cast<double>(at_least[i]) / n;
    out.tail[i] = f;
    if (at_least[i] == 0) zero = true;
    pts.push_back({static_cast<double>(n_grid[i]), f, std::sqrt(std::max(f * (1.0 - f), 1.0 / n) / n)});
  }
  if (zero) {
    out.slope = -std::numeric_limits<double>::infinity();
    return out;
  }
  const FitResult fit = loglog_fit(pts);
  out.slope = fit.slope;
  out.slope_stderr = fit.slope_stderr;
  return out;
}

namespace {

struct Bisection {
  double p_c, lo, hi;
  int iterations;
};

Bisection bisect_pc(const Kernel& kernel, Coord window, const PcOptions& opt) {
  const double p_max = 1.0 / kernel.max_pmf();
  double lo = opt.p_lo;
  double hi = opt.p_hi < 0.0 ? p_max : opt.p_hi;
  require(lo >= 0.0 && lo < hi && hi <= p_max * (1.0 + 1e-12), "initial p interval must satisfy 0 <= lo < hi <= 1/max D");
  hi = std::min(hi, p_max);
  auto slope = [&](double p) { return cluster_tail_slope(kernel, p, window, opt.n_grid, opt.samples, opt.seed, opt.workers).slope; };
  if (!(slope(lo) < opt.target) || !(slope(hi) > opt.target)) {
    throw ValidationError("initial p interval does not bracket the critical tail slope");
  }
  int it = 0;
  while (it < opt.max_iter && hi - lo > opt.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < opt.target ? lo : hi) = mid;
    ++it;
  }
  return {0.5 * (lo + hi), lo, hi, it};
}

}  // namespace

PcEstimate estimate_pc(const Kernel& kernel, Coord window, const PcOptions& opt) {
  require(opt.samples >= 1, "samples must be >= 1");
  require(window >= 2, "window must be >= 2 for the half-window diagnostic");
  PcEstimate est;
  const double a = kernel.spec().alpha ? std::min(2.0, *kernel.spec().alpha) : 2.0;
  est.warned_low_dimension = !(static_cast<double>(kernel.dim()) > 3.0 * a);
  const Bisection full = bisect_pc(kernel, window, opt);
  est.p_c = full.p_c;
  est.p_lo = full.lo;
  est.p_hi = full.hi;
  est.iterations = full.iterations;
  est.at_pc = cluster_tail_slope(kernel, est.p_c, window, opt.n_grid, opt.samples, opt.seed, opt.workers);
  const Bisection half = bisect_pc(kernel, window / 2, opt);
  est.p_c_half_window = half.p_c;
  est.window_shift = std::abs(est.p_c - half.p_c) / est.p_c;
  return est;
}

}  // namespace longarm
