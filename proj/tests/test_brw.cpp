#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "longarm/brw.hpp"
#include "longarm/errors.hpp"
#include "longarm/exact.hpp"

using namespace longarm;

namespace {

Embedding path_embedding(const std::vector<Point>& positions) {
  Embedding e;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    e.tree.parent.push_back(static_cast<std::int64_t>(i) - 1);
    e.pos.push_back(positions[i]);
  }
  return e;
}

std::vector<std::int64_t> depths(const Tree& t) {
  std::vector<std::int64_t> dep(t.size(), 0);
  for (std::size_t v = 1; v < t.size(); ++v) dep[v] = dep[static_cast<std::size_t>(t.parent[v])] + 1;
  return dep;
}

}  // namespace

TEST_CASE("cap = 1 gives the root at the origin") {
  RandomStream rng(1);
  const Kernel k(KernelSpec::canonical(2, 0.8));
  const Embedding e = sample_brw(OffspringDist::binary(), k, 1, rng);
  CHECK(e.size() == 1);
  CHECK(e.pos[0].isZero());
  CHECK(max_displacement(e) == 0);
  CHECK_FALSE(one_arm(e, 0));
  CHECK(one_arm(e, -1));
}

TEST_CASE("steps of the walk follow the kernel") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  RandomStream rng(8);
  const Coord box = 6;
  std::vector<double> obs(2 * box + 2, 0.0);
  double edges = 0.0;
  while (edges < 300000) {
    const Embedding e = sample_brw(OffspringDist::geometric_half(), k, 20000, rng);
    for (std::size_t v = 1; v < e.size(); ++v) {
      const Coord s = (e.pos[v] - e.pos[static_cast<std::size_t>(e.tree.parent[v])])(0);
      obs[std::abs(s) <= box ? static_cast<std::size_t>(s + box) : obs.size() - 1] += 1.0;
      edges += 1.0;
    }
  }
  double chi = 0.0;
  for (Coord s = -box; s <= box; ++s) {
    const double ex = edges * k.pmf(make_point({s}));
    chi += (obs[static_cast<std::size_t>(s + box)] - ex) * (obs[static_cast<std::size_t>(s + box)] - ex) / ex;
  }
  const double ex = edges * k.tail_mass(box);
  chi += (obs.back() - ex) * (obs.back() - ex) / ex;
  CHECK(chi < 40.0);  // 13 degrees of freedom, upper 1e-4 point is about 39
}

TEST_CASE("bounded steps stay within depth") {
  const Kernel k(KernelSpec::bounded_uniform(2, 1.0));
  RandomStream rng(4);
  for (int i = 0; i < 500; ++i) {
    const Embedding e = sample_brw(OffspringDist::binary(), k, 5000, rng);
    const auto dep = depths(e.tree);
    for (std::size_t v = 0; v < e.size(); ++v) REQUIRE(sup_norm(e.pos[v]) <= dep[v]);
    CHECK_FALSE(long_edge_event(e, 2));
  }
}

TEST_CASE("one-arm event and maximal displacement") {
  const Embedding two = path_embedding({origin(2), make_point({3, 0})});
  CHECK(one_arm(two, 2));
  CHECK_FALSE(one_arm(two, 3));
  CHECK(long_edge_event(two, 3));
  CHECK_FALSE(long_edge_event(two, 4));

  const Kernel k(KernelSpec::canonical(2, 1.2));
  RandomStream rng(6);
  for (int i = 0; i < 2000; ++i) {
    Embedding e = sample_brw(OffspringDist::geometric_half(), k, 2000, rng);
    const Coord m = max_displacement(e);
    for (Coord r = -1; r <= m + 2; ++r) REQUIRE(one_arm(e, r) == (m > r));
    e.tree.parent.push_back(0);
    e.pos.push_back(make_point({m + 1, 0}));
    REQUIRE(max_displacement(e) == m + 1);
  }
}

TEST_CASE("counting particles in sets") {
  const Embedding root = path_embedding({origin(1)});
  CHECK(count_in_set(root, in_cube(0)) == 1);

  const Kernel k(KernelSpec::canonical(2, 0.8));
  RandomStream rng(10);
  for (int i = 0; i < 200; ++i) {
    const Embedding e = sample_brw(OffspringDist::binary(), k, 5000, rng);
    const Coord R = 12;
    std::int64_t total = count_in_set(e, in_cube(0));
    for (Coord j = 3; j <= R; j += 3) total += count_in_set(e, in_shell(Shell(j, 3)));
    REQUIRE(total == count_in_set(e, in_cube(R)));
  }
}

TEST_CASE("boundary statistics on a hand-built path") {
  // root at 0, then j, then j + 1: the middle particle is the first to enter
  // the shell, and the leaf sits in its outward half-cube.
  const Coord j = 5;
  const Embedding e = path_embedding({origin(1), make_point({j}), make_point({j + 1})});
  const BoundaryStats s = boundary_stats(e, j, 1, 4, 1.0);
  CHECK(s.x_j == 1);
  CHECK(s.a_j == 1);

  // The leaf falls behind the middle particle: not in the half-cube.
  const Embedding back = path_embedding({origin(1), make_point({j}), make_point({j - 1})});
  CHECK(boundary_stats(back, j, 1, 4, 1.0).a_j == 0);

  // A particle whose ancestor was already in the shell is not counted again.
  const Embedding twice = path_embedding({origin(1), make_point({j}), make_point({j})});
  CHECK(boundary_stats(twice, j, 1, 4, 1.0).x_j == 1);

  const BoundaryStats none = boundary_stats(path_embedding({origin(1)}), j, 1, 4, 1.0);
  CHECK(none.x_j == 0);
  CHECK(none.a_j == 0);

  const Kernel k(KernelSpec::canonical(1, 0.8));
  RandomStream rng(12);
  for (int i = 0; i < 300; ++i) {
    const Embedding r = sample_brw(OffspringDist::binary(), k, 5000, rng);
    REQUIRE(boundary_stats(r, max_displacement(r) + 2, 1, 4, 0.4).x_j == 0);
  }
}

TEST_CASE("cap policy") {
  CHECK(CapPolicy{100.0, 0.4, {}}.cap(1) == 100);
  CHECK(CapPolicy{100.0, 0.4, {}}.cap(0) == 100);
  CHECK(CapPolicy{100.0, 0.4, {}}.cap(32) == static_cast<std::int64_t>(std::ceil(100.0 * std::pow(32.0, 0.8))));
  CHECK(CapPolicy{100.0, 0.4, 77}.cap(1000) == 77);
}

TEST_CASE("gamma estimates: validation, monotonicity and determinism") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const auto off = OffspringDist::binary();
  BrwEstimateOptions opt;
  opt.caps = CapPolicy{100.0, 0.4, {}};
  CHECK_THROWS_AS(estimate_gamma_brw(off, k, {1, 2}, opt), ValidationError);

  opt.samples = 1;
  const EstimateTable one = estimate_gamma_brw(off, k, {Coord{1} << 40}, opt);
  CHECK(one.rows[0].hits == 0);
  CHECK(one.rows[0].ci_lo == 0.0);

  opt.samples = 30000;
  opt.block = 1000;
  const std::vector<Coord> radii = {1, 2, 4, 8, 16, 32};
  opt.workers = 1;
  const EstimateTable a = estimate_gamma_brw(off, k, radii, opt);
  opt.workers = 4;
  const EstimateTable b = estimate_gamma_brw(off, k, radii, opt);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    CHECK(a.rows[i].hits == b.rows[i].hits);
    CHECK(a.rows[i].gamma_hat == b.rows[i].gamma_hat);
    if (i > 0) CHECK(a.rows[i].hits <= a.rows[i - 1].hits);
    CHECK(a.rows[i].ci_lo <= a.rows[i].gamma_hat);
    CHECK(a.rows[i].gamma_hat <= a.rows[i].ci_hi);
    CHECK(a.rows[i].cap == opt.caps.cap(radii[i]));
    CHECK(a.rows[i].cap_tail_bound == doctest::Approx(progeny_tail_beyond(off, a.rows[i].cap)));
  }
}

TEST_CASE("gamma(4) agrees with the fixed-point oracle") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const auto off = OffspringDist::binary();
  const double lo = brw_one_arm_oracle(off, k, 4, 64, 1e-13, OracleVariant::Miss);
  const double hi = brw_one_arm_oracle(off, k, 4, 64, 1e-13, OracleVariant::Hit);
  CHECK(lo <= hi);
  BrwEstimateOptions opt;
  opt.samples = 200000;
  opt.caps = CapPolicy{100.0, 0.4, std::int64_t{1} << 30};
  opt.seed = 5;
  const EstimateTable t = estimate_gamma_brw(off, k, {4}, opt);
  const double g = t.rows[0].gamma_hat;
  const double se = std::sqrt(g * (1 - g) / static_cast<double>(opt.samples));
  CHECK(g >= lo - 3 * se);
  CHECK(g <= hi + 3 * se);
}

TEST_CASE("killed volume moments agree with the exact sums") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const auto off = OffspringDist::binary();
  for (Coord r : {Coord{2}, Coord{4}}) {
    const Coord R = 4 * r;
    const VolumeMoments mc = estimate_volume_moments(off, k, r, R, 200000, 3);
    const ThreePoint ex = three_point_sum(k, off.sigma_sq(), R, 1 << 20, r);
    CHECK(std::abs(mc.mean_v - ex.first_moment) < 3.0 * mc.se_v);
    CHECK(std::abs(mc.mean_v2 - ex.second_moment) < 4.0 * mc.se_v2);
    CHECK(mc.truncated == 0);
  }
}

TEST_CASE("progeny tail beyond the cap") {
  const auto off = OffspringDist::binary();
  CHECK(progeny_tail_beyond(off, 1) == doctest::Approx(0.5));
  const double a = progeny_tail_beyond(off, 1 << 14), b = progeny_tail_beyond(off, 1 << 16);
  CHECK(b == doctest::Approx(a / 2.0).epsilon(1e-3));
  CHECK(progeny_tail_beyond(off, std::numeric_limits<std::int64_t>::max()) == 0.0);
}
