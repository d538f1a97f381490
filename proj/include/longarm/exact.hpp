#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "longarm/gw.hpp"
#include "longarm/kernel.hpp"
#include "longarm/lattice.hpp"

namespace longarm {

/// Dense real field on the cube Q_R, stored in cube_index order, with a
/// ledger of mass that has left the window.
template <typename Scalar>
struct LatticeField {
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  int d = 1;
  Coord R = 0;
  Values values;
  Scalar mass_outside = Scalar(0);

  LatticeField() = default;
  LatticeField(int dim, Coord radius) : d(dim), R(radius), values(Values::Zero(static_cast<Eigen::Index>(cube_size(dim, radius)))) {}

  static LatticeField delta(int dim, Coord radius) {
    LatticeField f(dim, radius);
    f.at(origin(dim)) = Scalar(1);
    return f;
  }

  static LatticeField indicator_of_cube(int dim, Coord radius, Coord r) {
    LatticeField f(dim, radius);
    for (Eigen::Index i = 0; i < f.values.size(); ++i) {
      if (sup_norm(f.point(i)) <= r) f.values(i) = Scalar(1);
    }
    return f;
  }

  Point point(Eigen::Index i) const { return cube_point(d, R, static_cast<std::uint64_t>(i)); }
  Scalar& at(const Point& x) { return values(static_cast<Eigen::Index>(cube_index(x, R))); }
  Scalar at(const Point& x) const { return values(static_cast<Eigen::Index>(cube_index(x, R))); }
  bool contains(const Point& x) const { return sup_norm(x) <= R; }
  Scalar total() const { return values.sum(); }

  /// Sum of the field over Q_r, r <= R.
  Scalar sum_over_cube(Coord r) const {
    Scalar s(0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (sup_norm(point(i)) <= r) s += values(i);
    }
    return s;
  }

  /// Value along the first axis, x = (k, 0, ..., 0).
  Scalar axis(Coord k) const {
    Point x = origin(d);
    x(0) = k;
    return at(x);
  }
};

using Field = LatticeField<double>;

/// Smallest 2,3,5-smooth integer >= n.
std::int64_t fft_size(std::int64_t n);

/// out(x) = sum_{y in Q_R} D(y - x) in(y) for x in Q_R. Mass sent outside
/// Q_R is dropped and added to the ledger. Separable FFT with padding to at
/// least 4R + 1 per axis, so there is no wraparound.
class WindowConvolver {
 public:
  WindowConvolver(const Kernel& kernel, Coord R);

  Coord radius() const { return R_; }
  int dim() const { return d_; }

  Field apply(const Field& in) const;

 private:
  int d_;
  Coord R_;
  std::int64_t M_;
  std::vector<std::complex<double>> kernel_hat_;
};

/// D^{*n} on Q_R for the walk killed on leaving Q_R, with the escaped mass.
Field convolve_power(const Kernel& kernel, std::int64_t n, Coord R);

/// Linear convolution of two fields on the same window, restricted to Q_R.
Field convolve_fields(const Field& a, const Field& b);

struct GreenResult {
  Field G;
  std::int64_t terms = 0;    // number of convolution powers summed
  double residual = 0.0;     // geometric estimate of the omitted sum over Q_R
  double last_term = 0.0;    // total mass of the last power summed
};

/// G_N = sum_{n <= N} D^{*n} for the walk killed outside Q_R. Summation
/// stops early once a power carries less than 1e-16 mass.
GreenResult green_function(const Kernel& kernel, std::int64_t N, Coord R);

/// Aitken extrapolation of the killed Green function over windows R, 2R, 4R,
/// reported on Q_R.
Field green_function_window_limit(const Kernel& kernel, std::int64_t N, Coord R);

/// max over Q_{R/2} of |G - delta_0 - D*G|.
double renewal_residual(const Kernel& kernel, const Field& G);

enum class OracleVariant { Hit, Miss };

/// One-arm probability of the branching random walk from the origin by
/// monotone fixed-point iteration on Q_r. Hit: every particle outside Q_r is
/// a hit. Miss: particles outside Q_R are killed and count as misses.
double brw_one_arm_oracle(const OffspringDist& off, const Kernel& kernel, Coord r, Coord R, double tol,
                          OracleVariant variant = OracleVariant::Hit);

struct ThreePoint {
  double first_moment = 0.0;   // E|V(Q_r)|
  double second_moment = 0.0;  // E|V(Q_r)|^2
  double residual = 0.0;
};

/// Exact moments of |V(Q_r)| for the branching random walk killed on
/// leaving Q_R: E V = sum_S G, E V^2 = sum_S G + 2 sum_S G F + sigma^2 sum_z G F^2,
/// with F the expected number of strict descendants landing in S = Q_r.
ThreePoint three_point_sum(const Kernel& kernel, double sigma_sq, Coord R, std::int64_t N, Coord r);

struct TinyGraph {
  struct Edge {
    int u;
    int v;
    double p;
  };
  int vertices = 0;
  std::vector<Edge> edges;

  void validate() const;
};

using EdgeEvent = std::function<bool(std::uint32_t open_mask)>;

/// Probability of `event` over all 2^m edge configurations (m <= 24).
double enumerate(const TinyGraph& g, const EdgeEvent& event);

/// Vertices a and b are joined by open edges of `open_mask`.
bool connected(const TinyGraph& g, std::uint32_t open_mask, int a, int b);

struct BkResult {
  double p_disjoint;  // P(A o B)
  double p_product;   // P(A) P(B)
};

/// Disjoint occurrence by search over submasks of the open edges (m <= 12).
BkResult bk_check(const TinyGraph& g, const EdgeEvent& A, const EdgeEvent& B);

/// Increasing event: some witness set is fully open.
EdgeEvent up_closure(std::vector<std::uint32_t> witnesses);

}  // namespace longarm
