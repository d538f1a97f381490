#include "longarm/brw.hpp"

#include <algorithm>
#include <cmath>

#include "longarm/errors.hpp"
#include "longarm/parallel.hpp"

namespace longarm {

Embedding sample_brw(const OffspringDist& off, const Kernel& kernel, std::int64_t cap, RandomStream& rng) {
  require(cap >= 1, "cap must be >= 1");
  Embedding emb;
  emb.tree.parent.push_back(-1);
  emb.pos.push_back(origin(kernel.dim()));
  for (std::size_t i = 0; i < emb.pos.size(); ++i) {
    const std::uint32_t children = off.sample(rng);
    if (static_cast<std::int64_t>(emb.pos.size() + children) > cap) {
      emb.tree.truncated = true;
      break;
    }
    for (std::uint32_t c = 0; c < children; ++c) {
      emb.tree.parent.push_back(static_cast<std::int64_t>(i));
      emb.pos.push_back(emb.pos[i] + kernel.sample_step(rng));
    }
  }
  return emb;
}

bool one_arm(const Embedding& emb, Coord r) {
  if (r < 0) return true;
  return max_displacement(emb) > r;
}

Coord max_displacement(const Embedding& emb) {
  Coord m = 0;
  for (const auto& x : emb.pos) m = std::max(m, sup_norm(x));
  return m;
}

BoundaryStats boundary_stats(const Embedding& emb, Coord j, Coord w, Coord L, double rho_over) {
  require(w >= 1 && j > w, "boundary_stats needs w >= 1 and j > w");
  require(L >= 0 && rho_over >= 0.0, "boundary_stats needs L >= 0 and rho_over >= 0");
  const auto side = static_cast<Coord>(std::floor(std::pow(static_cast<double>(L), rho_over)));
  const Shell shell(j, w);
  const std::size_t n = emb.size();
  // inside[v]: v and all its ancestors lie in Q_{j-w}.
  // owner[v]: the counted particle among v's strict ancestors, or -1.
  std::vector<char> inside(n, 0), counted(n, 0);
  std::vector<std::int64_t> owner(n, -1);
  BoundaryStats st;
  for (std::size_t v = 0; v < n; ++v) {
    const std::int64_t p = emb.tree.parent[v];
    const bool ancestors_inside = p < 0 || inside[static_cast<std::size_t>(p)];
    inside[v] = ancestors_inside && sup_norm(emb.pos[v]) <= j - w;
    counted[v] = ancestors_inside && shell_contains(emb.pos[v], shell);
    st.x_j += counted[v];
    if (p < 0) continue;
    const auto pu = static_cast<std::size_t>(p);
    owner[v] = owner[pu] >= 0 ? owner[pu] : (counted[pu] ? p : -1);
    if (owner[v] >= 0 && half_cube_contains(emb.pos[v], emb.pos[static_cast<std::size_t>(owner[v])], side)) ++st.a_j;
  }
  return st;
}

bool long_edge_event(const Embedding& emb, Coord threshold) {
  require(threshold >= 1, "long-edge threshold must be >= 1");
  for (std::size_t v = 1; v < emb.size(); ++v) {
    const auto p = static_cast<std::size_t>(emb.tree.parent[v]);
    if (sup_norm(emb.pos[v] - emb.pos[p]) >= threshold) return true;
  }
  return false;
}

std::int64_t CapPolicy::cap(Coord r) const {
  if (fixed) {
    require(*fixed >= 1, "cap policy produced a cap < 1");
    return *fixed;
  }
  const double c = std::ceil(K * std::pow(static_cast<double>(std::max<Coord>(r, 1)), 2.0 * rho));
  require(std::isfinite(c) && c >= 1.0, "cap policy produced a cap < 1");
  return c >= 9.0e18 ? INT64_MAX : static_cast<std::int64_t>(c);
}

double progeny_tail_beyond(const OffspringDist& off, std::int64_t cap) {
  constexpr std::int64_t kExact = std::int64_t{1} << 14;
  if (cap >= INT64_MAX / 2) return 0.0;
  const std::int64_t s = cap + 1;  // P(|T| >= cap + 1)
  const std::int64_t n = std::min(s, kExact);
  const auto tail = survival_tail(total_progeny_pmf(off, n));
  const double at_n = tail[static_cast<std::size_t>(n - 1)];
  if (s <= kExact) return at_n;
  return at_n * std::sqrt(static_cast<double>(n) / static_cast<double>(s));
}

namespace {

struct TreeOutcome {
  Coord max_disp = 0;
  std::int64_t attempted = 0;  // final size, or the size that would have exceeded the cap
};

// Level-by-level generation keeping only the current generation's positions.
// Stops once a particle passes `stop_radius`, since every radius is then hit.
TreeOutcome stream_tree(const OffspringDist& off, const Kernel& kernel, std::int64_t cap, Coord stop_radius,
                        RandomStream& rng, std::vector<Point>& level, std::vector<Point>& next) {
  TreeOutcome out;
  level.assign(1, origin(kernel.dim()));
  std::int64_t size = 1;
  while (!level.empty()) {
    next.clear();
    for (const auto& parent : level) {
      const std::uint32_t children = off.sample(rng);
      if (size + children > cap) {
        out.attempted = size + children;
        return out;
      }
      size += children;
      for (std::uint32_t c = 0; c < children; ++c) {
        Point x = parent + kernel.sample_step(rng);
        out.max_disp = std::max(out.max_disp, sup_norm(x));
        next.push_back(std::move(x));
      }
      if (out.max_disp > stop_radius) {
        out.attempted = size;
        return out;
      }
    }
    level.swap(next);
  }
  out.attempted = size;
  return out;
}

}  // namespace

EstimateTable estimate_gamma_brw(const OffspringDist& off, const Kernel& kernel, const std::vector<Coord>& radii,
                                 const BrwEstimateOptions& opt) {
  require(opt.samples >= 1, "samples must be >= 1");
  require(!radii.empty(), "radii must be non-empty");
  require(opt.block >= 1, "block size must be >= 1");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] >= 0, "radii must be non-negative");
    require(i == 0 || radii[i] > radii[i - 1], "radii must be strictly increasing");
  }
  std::vector<std::int64_t> caps(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) caps[i] = opt.caps.cap(radii[i]);
  const std::int64_t global_cap = *std::max_element(caps.begin(), caps.end());
  const Coord r_max = radii.back();

  const Blocks blocks{opt.samples, opt.block};
  struct Tally {
    std::vector<std::int64_t> hits, truncated;
  };
  std::vector<Tally> slots(blocks.count());
  parallel_tasks(blocks.count(), opt.workers, [&](std::size_t b) {
    RandomStream rng(task_seed(opt.seed, b));
    Tally t{std::vector<std::int64_t>(radii.size(), 0), std::vector<std::int64_t>(radii.size(), 0)};
    std::vector<Point> level, next;
    for (std::int64_t s = 0; s < blocks.size(b); ++s) {
      const TreeOutcome o = stream_tree(off, kernel, global_cap, r_max, rng, level, next);
      for (std::size_t i = 0; i < radii.size(); ++i) {
        const bool reached = o.max_disp > radii[i];
        const bool capped = o.attempted > caps[i];
        t.hits[i] += (reached || capped) ? 1 : 0;
        t.truncated[i] += (!reached && capped) ? 1 : 0;
      }
    }
    slots[b] = std::move(t);
  });

  EstimateTable table;
  table.rows.resize(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    auto& row = table.rows[i];
    row.r = radii[i];
    row.trials = opt.samples;
    row.cap = caps[i];
    row.cap_tail_bound = progeny_tail_beyond(off, caps[i]);
    for (const auto& t : slots) {
      row.hits += t.hits[i];
      row.truncated += t.truncated[i];
    }
  }
  finalize_rows(table.rows);
  table.fit = fit_table(table.rows);
  return table;
}

VolumeMoments estimate_volume_moments(const OffspringDist& off, const Kernel& kernel, Coord r, Coord R,
                                      std::int64_t samples, std::uint64_t seed, unsigned workers, std::int64_t cap) {
  require(samples >= 2, "volume moments need at least 2 samples");
  require(r >= 0 && R >= r, "volume moments need 0 <= r <= R");
  const Blocks blocks{samples, 4096};
  struct Tally {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::int64_t truncated = 0;
  };
  std::vector<Tally> slots(blocks.count());
  parallel_tasks(blocks.count(), workers, [&](std::size_t b) {
    RandomStream rng(task_seed(seed, b));
    Tally t;
    std::vector<Point> level, next;
    for (std::int64_t s = 0; s < blocks.size(b); ++s) {
      level.assign(1, origin(kernel.dim()));
      std::int64_t size = 1;
      std::int64_t v = r >= 0 ? 1 : 0;
      bool truncated = false;
      while (!level.empty() && !truncated) {
        next.clear();
        for (const auto& parent : level) {
          const std::uint32_t children = off.sample(rng);
          for (std::uint32_t c = 0; c < children; ++c) {
            Point x = parent + kernel.sample_step(rng);
            const Coord n = sup_norm(x);
            if (n > R) continue;  // killed
            if (n <= r) ++v;
            next.push_back(std::move(x));
          }
          size += children;
          if (size > cap) {
            truncated = true;
            break;
          }
        }
        level.swap(next);
      }
      const auto dv = static_cast<double>(v);
      t.s1 += dv;
      t.s2 += dv * dv;
      t.s3 += dv * dv * dv;
      t.s4 += dv * dv * dv * dv;
      t.truncated += truncated ? 1 : 0;
    }
    slots[b] = t;
  });
  Tally tot;
  for (const auto& t : slots) {
    tot.s1 += t.s1;
    tot.s2 += t.s2;
    tot.s3 += t.s3;
    tot.s4 += t.s4;
    tot.truncated += t.truncated;
  }
  const auto n = static_cast<double>(samples);
  VolumeMoments m;
  m.r = r;
  m.R = R;
  m.samples = samples;
  m.mean_v = tot.s1 / n;
  m.mean_v2 = tot.s2 / n;
  m.se_v = std::sqrt(std::max(0.0, (tot.s2 / n - m.mean_v * m.mean_v) / (n - 1.0)));
  m.se_v2 = std::sqrt(std::max(0.0, (tot.s4 / n - m.mean_v2 * m.mean_v2) / (n - 1.0)));
  m.truncated = tot.truncated;
  return m;
}

}  // namespace longarm
