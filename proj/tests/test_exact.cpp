#include <doctest.h>

#include <cmath>
#include <vector>

#include "longarm/errors.hpp"
#include "longarm/exact.hpp"

using namespace longarm;

namespace {

// Direct O(R^2) killed walk in d = 1.
std::vector<double> direct_power(const Kernel& k, int n, Coord R) {
  std::vector<double> f(static_cast<std::size_t>(2 * R + 1), 0.0);
  f[static_cast<std::size_t>(R)] = 1.0;
  for (int s = 0; s < n; ++s) {
    std::vector<double> g(f.size(), 0.0);
    for (Coord x = -R; x <= R; ++x) {
      for (Coord y = -R; y <= R; ++y) g[static_cast<std::size_t>(y + R)] += f[static_cast<std::size_t>(x + R)] * k.pmf(make_point({y - x}));
    }
    f = g;
  }
  return f;
}

Kernel nearest_neighbour() {
  KernelSpec s;
  s.d = 1;
  s.shape = KernelShape::CustomTable;
  s.alpha = 1.0;
  s.custom_weights = {0.0, 1.0};
  s.custom_tail = 1e-300;
  return Kernel(s);
}

}  // namespace

TEST_CASE("fft sizes are 2,3,5-smooth") {
  CHECK(fft_size(1) == 1);
  CHECK(fft_size(7) == 8);
  CHECK(fft_size(11) == 12);
  CHECK(fft_size(257) == 270);
  for (std::int64_t n = 1; n < 2000; ++n) {
    std::int64_t m = fft_size(n);
    REQUIRE(m >= n);
    while (m % 2 == 0) m /= 2;
    while (m % 3 == 0) m /= 3;
    while (m % 5 == 0) m /= 5;
    REQUIRE(m == 1);
  }
}

TEST_CASE("convolution powers") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const Coord R = 20;
  const Field zero = convolve_power(k, 0, R);
  CHECK(zero.at(origin(1)) == 1.0);
  CHECK(zero.total() == 1.0);

  const Field one = convolve_power(k, 1, R);
  for (Coord x = -R; x <= R; ++x) CHECK(one.axis(x) == doctest::Approx(k.pmf(make_point({x}))).epsilon(1e-10));
  CHECK(one.mass_outside == doctest::Approx(k.tail_mass(R)).epsilon(1e-10));

  const Field five = convolve_power(k, 5, R);
  const auto direct = direct_power(k, 5, R);
  for (Coord x = -R; x <= R; ++x) {
    CHECK(std::abs(five.axis(x) - direct[static_cast<std::size_t>(x + R)]) < 1e-14);
    CHECK(std::abs(five.axis(x) - five.axis(-x)) < 1e-15);
  }
  CHECK(five.total() + five.mass_outside == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("convolution powers in d = 2 are symmetric and conserve mass") {
  const Kernel k(KernelSpec::canonical(2, 1.2));
  const Field f = convolve_power(k, 4, 10);
  CHECK(f.total() + f.mass_outside == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    const Point x = f.point(i);
    Point y(2);
    y << x(1), -x(0);
    REQUIRE(std::abs(f.values(i) - f.at(y)) < 1e-15);
  }
}

TEST_CASE("associativity up to escaped mass") {
  const Kernel flat(KernelSpec::bounded_uniform(1, 1.0));
  const Coord R = 16;
  const Field a = convolve_power(flat, 3, R), b = convolve_power(flat, 4, R);
  const Field ab = convolve_fields(a, b), seven = convolve_power(flat, 7, R);
  CHECK((ab.values - seven.values).abs().maxCoeff() < 1e-14);

  const Kernel k(KernelSpec::canonical(1, 0.8));
  const Field c = convolve_power(k, 3, R), d = convolve_power(k, 4, R);
  const Field cd = convolve_fields(c, d), s = convolve_power(k, 7, R);
  double diff = 0.0;
  for (Coord x = -R / 2; x <= R / 2; ++x) diff += std::abs(cd.axis(x) - s.axis(x));
  CHECK(diff <= s.mass_outside + c.mass_outside + d.mass_outside);
}

TEST_CASE("green function") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const GreenResult g = green_function(k, 100000, 64);
  CHECK(g.G.at(origin(1)) >= 1.0);
  CHECK(g.residual < 1e-10);
  CHECK(renewal_residual(k, g.G) < 1e-10);
  for (Coord x = 1; x <= 64; ++x) CHECK(g.G.axis(x) < g.G.axis(x - 1));

  const GreenResult few = green_function(k, 3, 64);
  CHECK(few.terms == 4);
  const Field p4 = convolve_power(k, 4, 64);
  // Truncation leaves exactly the next power in the renewal identity.
  CHECK(renewal_residual(k, few.G) == doctest::Approx(p4.values.head(p4.values.size()).maxCoeff()).epsilon(0.5));

  CHECK_THROWS_AS(green_function(Kernel(KernelSpec::canonical(1, 1.5)), 10, 8), ValidationError);
  CHECK_THROWS_AS(green_function(Kernel(KernelSpec::canonical(2, 3.0)), 10, 8), ValidationError);
}

TEST_CASE("window-limit green function is monotone along the axis") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const Field G = green_function_window_limit(k, 1 << 16, 64);
  for (Coord x = 1; x <= 64; ++x) CHECK(G.axis(x) < G.axis(x - 1));
  const GreenResult raw = green_function(k, 1 << 16, 64);
  CHECK(G.axis(32) > raw.G.axis(32));
}

TEST_CASE("one-arm oracle") {
  const auto off = OffspringDist::binary();
  // No self-loops: at r = 0 a hit happens iff the root has a child.
  CHECK(brw_one_arm_oracle(off, nearest_neighbour(), 0, 4, 1e-14) == doctest::Approx(0.5).epsilon(1e-12));

  const Kernel k(KernelSpec::canonical(1, 0.8));
  const double hit = brw_one_arm_oracle(off, k, 4, 16, 1e-13, OracleVariant::Hit);
  double prev_gap = 1.0;
  for (Coord R : {Coord{16}, Coord{64}, Coord{256}}) {
    const double miss = brw_one_arm_oracle(off, k, 4, R, 1e-13, OracleVariant::Miss);
    CHECK(miss <= hit + 1e-12);
    CHECK(hit - miss < prev_gap);
    prev_gap = hit - miss;
  }
  CHECK(prev_gap < 0.05 * hit);
  // Decreasing in r.
  CHECK(brw_one_arm_oracle(off, k, 8, 32, 1e-13) < hit);
}

TEST_CASE("three-point sums") {
  const Kernel k(KernelSpec::canonical(1, 0.8));
  const ThreePoint base = three_point_sum(k, 1.0, 4, 0, 0);
  CHECK(base.first_moment == doctest::Approx(1.0));
  CHECK(base.second_moment == doctest::Approx(1.0));
  for (Coord r : {Coord{1}, Coord{4}, Coord{8}}) {
    const ThreePoint t = three_point_sum(k, 1.0, 4 * r, 1 << 16, r);
    CHECK(t.second_moment >= t.first_moment * t.first_moment);
    CHECK(t.first_moment >= 1.0);
  }
  CHECK_THROWS_AS(three_point_sum(k, 1.0, 8, 10, 3), ValidationError);
}

TEST_CASE("enumeration on tiny graphs") {
  TinyGraph one{2, {{0, 1, 0.3}}};
  CHECK(enumerate(one, [](std::uint32_t) { return true; }) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(enumerate(one, [](std::uint32_t m) { return (m & 1U) != 0; }) == doctest::Approx(0.3).epsilon(1e-15));

  const double q1 = 0.3, q2 = 0.6, q3 = 0.45;
  TinyGraph tri{3, {{0, 1, q1}, {1, 2, q2}, {0, 2, q3}}};
  const double both = enumerate(tri, [&](std::uint32_t m) { return connected(tri, m, 0, 1) && connected(tri, m, 0, 2); });
  CHECK(both == doctest::Approx(q1 * q2 + q1 * q3 + q2 * q3 - 2 * q1 * q2 * q3).epsilon(1e-14));

  const EdgeEvent A = [&](std::uint32_t m) { return connected(tri, m, 0, 2); };
  const double pa = enumerate(tri, A);
  const double pna = enumerate(tri, [&](std::uint32_t m) { return !A(m); });
  CHECK(std::abs(pa + pna - 1.0) < 1e-12);

  CHECK_THROWS_AS((TinyGraph{2, {{0, 0, 0.5}}}.validate()), ValidationError);
  CHECK_THROWS_AS((TinyGraph{2, {{0, 1, 0.5}, {1, 0, 0.5}}}.validate()), ValidationError);
  CHECK_THROWS_AS((TinyGraph{2, {{0, 1, 1.5}}}.validate()), ValidationError);
}

TEST_CASE("disjoint occurrence") {
  TinyGraph two{3, {{0, 1, 0.4}, {1, 2, 0.7}}};
  const EdgeEvent e0 = up_closure({1U});
  const EdgeEvent e1 = up_closure({2U});
  const BkResult ind = bk_check(two, e0, e1);
  CHECK(ind.p_disjoint == doctest::Approx(0.28).epsilon(1e-14));
  CHECK(ind.p_product == doctest::Approx(0.28).epsilon(1e-14));

  const BkResult same = bk_check(two, e0, e0);
  CHECK(same.p_disjoint == 0.0);
  CHECK(same.p_product == doctest::Approx(0.16));

  // 4-cycle 0-1-2-3-0: A = {0 <-> 2}, B = {1 <-> 3}.
  TinyGraph cycle{4, {{0, 1, 0.5}, {1, 2, 0.5}, {2, 3, 0.5}, {3, 0, 0.5}}};
  const EdgeEvent A = [&](std::uint32_t m) { return connected(cycle, m, 0, 2); };
  const EdgeEvent B = [&](std::uint32_t m) { return connected(cycle, m, 1, 3); };
  const BkResult c = bk_check(cycle, A, B);
  // Every 0 <-> 2 path uses an edge at vertex 1 and one at vertex 3, so
  // no open 1 <-> 3 path is left over.
  CHECK(c.p_disjoint == 0.0);
  CHECK(c.p_product > 0.0);

  // Triangle: two disjoint 0 <-> 1 paths need all three edges.
  TinyGraph tri{3, {{0, 1, 0.5}, {1, 2, 0.6}, {0, 2, 0.7}}};
  const EdgeEvent C = [&](std::uint32_t m) { return connected(tri, m, 0, 1); };
  const BkResult tt = bk_check(tri, C, C);
  const double pc = 0.5 + 0.42 - 0.5 * 0.42;
  CHECK(tt.p_disjoint == doctest::Approx(0.21).epsilon(1e-14));
  CHECK(tt.p_product == doctest::Approx(pc * pc).epsilon(1e-14));
  CHECK(tt.p_disjoint <= tt.p_product);

  // Upward closure: supersets of a witness satisfy the event.
  const EdgeEvent w = up_closure({0b011U, 0b100U});
  CHECK(w(0b011U));
  CHECK(w(0b111U));
  CHECK(w(0b100U));
  CHECK_FALSE(w(0b001U));
}
