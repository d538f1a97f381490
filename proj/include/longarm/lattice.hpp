#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>

#include "longarm/errors.hpp"

namespace longarm {

inline constexpr int kMaxDim = 6;

using Coord = std::int64_t;

/// Lattice vector of runtime dimension d <= kMaxDim. Storage is inline.
template <typename Scalar>
using PointT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

using Point = PointT<Coord>;

inline Point make_point(std::initializer_list<Coord> coords) {
  Point x(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (Coord c : coords) x(i++) = c;
  return x;
}

inline Point origin(int d) { return Point::Zero(d); }

template <typename Derived>
Coord sup_norm(const Eigen::MatrixBase<Derived>& x) {
  return x.size() == 0 ? 0 : x.cwiseAbs().maxCoeff();
}

/// Exact squared Euclidean norm.
template <typename Derived>
Coord squared_norm(const Eigen::MatrixBase<Derived>& x) {
  return x.squaredNorm();
}

template <typename Derived>
double euclidean_norm(const Eigen::MatrixBase<Derived>& x) {
  return std::sqrt(static_cast<double>(squared_norm(x)));
}

/// Q_r = {x : |x|_inf <= r}.
inline bool cube_contains(const Point& x, Coord r) {
  require(r >= 0, "cube radius must be non-negative");
  return sup_norm(x) <= r;
}

/// Sup-norm annulus Q_j \ Q_{j-w}.
struct Shell {
  Coord j;
  Coord w;

  Shell(Coord outer, Coord width) : j(outer), w(width) {
    require(width > 0 && width <= outer, "shell requires 0 < w <= j");
  }
};

/// Width of a shell whose nominal thickness is real; rounded up.
inline Coord shell_width(double thickness) {
  require(thickness > 0, "shell thickness must be positive");
  return static_cast<Coord>(std::ceil(thickness));
}

inline bool shell_contains(const Point& x, const Shell& s) {
  const Coord n = sup_norm(x);
  return s.j - s.w < n && n <= s.j;
}

/// First (lowest) index attaining the sup norm. 0-based.
inline int leading_index(const Point& x) {
  require(!x.isZero(), "leading index is undefined at the origin");
  const Coord n = sup_norm(x);
  for (int i = 0; i < x.size(); ++i) {
    if (x(i) == n || x(i) == -n) return i;
  }
  return 0;  // unreachable
}

/// Outward-facing half-cube of sup-radius `side` attached to x.
inline bool half_cube_contains(const Point& y, const Point& x, Coord side) {
  require(side >= 0, "half-cube side must be non-negative");
  const int i = leading_index(x);
  const Coord xi = x(i);
  const Coord yi = y(i);
  return sup_norm(x - y) <= side && std::abs(yi) >= std::abs(xi) && (yi > 0) == (xi > 0) && yi != 0;
}

/// Half-cube pushed out so its base sits on the face of Q_j; contained in
/// Q_{j+L} \ Q_j whenever side <= L and |x|_inf <= j.
inline bool shifted_half_cube_contains(const Point& y, const Point& x, Coord L, Coord j, Coord side) {
  require(side >= 0 && side <= L, "shifted half-cube requires 0 <= side <= L");
  const int i = leading_index(x);
  const Coord sign = x(i) > 0 ? 1 : -1;
  Point centre = x;
  centre(i) += sign * (j - sup_norm(x));
  const Coord yi = y(i);
  return sup_norm(centre - y) <= side && std::abs(yi) > j && (yi > 0) == (sign > 0);
}

/// Number of sites with |x|_inf = k in Z^d.
inline std::uint64_t shell_size(int d, Coord k) {
  if (k == 0) return 1;
  std::uint64_t outer = 1, inner = 1;
  for (int i = 0; i < d; ++i) {
    outer *= static_cast<std::uint64_t>(2 * k + 1);
    inner *= static_cast<std::uint64_t>(2 * k - 1);
  }
  return outer - inner;
}

inline std::uint64_t cube_size(int d, Coord r) {
  std::uint64_t n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<std::uint64_t>(2 * r + 1);
  return n;
}

/// Fixed enumeration of the sup-norm sphere of radius k >= 1: maps an index
/// in [0, shell_size(d,k)) to a distinct site. Coordinate 0 is peeled first:
/// either it sits on a face (|x_0| = k, rest free in [-k,k]) or it is interior
/// and the remaining coordinates form a lower-dimensional sphere.
inline Point shell_site(int d, Coord k, std::uint64_t index) {
  Point x(d);
  const auto side = static_cast<std::uint64_t>(2 * k + 1);
  for (int axis = 0; axis < d; ++axis) {
    const int rest = d - axis - 1;
    std::uint64_t face = 1;
    for (int i = 0; i < rest; ++i) face *= side;
    if (index < 2 * face) {
      x(axis) = index < face ? -k : k;
      std::uint64_t f = index % face;
      for (int i = axis + 1; i < d; ++i) {
        x(i) = static_cast<Coord>(f % side) - k;
        f /= side;
      }
      return x;
    }
    index -= 2 * face;
    x(axis) = static_cast<Coord>(index / shell_size(rest, k)) - (k - 1);
    index %= shell_size(rest, k);
  }
  return x;  // unreachable for valid index
}

/// Dense index of x within Q_r (row-major over coordinates, first fastest).
inline std::uint64_t cube_index(const Point& x, Coord r) {
  const auto side = static_cast<std::uint64_t>(2 * r + 1);
  std::uint64_t idx = 0;
  for (int i = static_cast<int>(x.size()) - 1; i >= 0; --i) idx = idx * side + static_cast<std::uint64_t>(x(i) + r);
  return idx;
}

inline Point cube_point(int d, Coord r, std::uint64_t idx) {
  const auto side = static_cast<std::uint64_t>(2 * r + 1);
  Point x(d);
  for (int i = 0; i < d; ++i) {
    x(i) = static_cast<Coord>(idx % side) - r;
    idx /= side;
  }
  return x;
}

struct PointHash {
  std::size_t operator()(const Point& x) const noexcept {
    std::uint64_t h = 0x243F6A8885A308D3ULL ^ static_cast<std::uint64_t>(x.size());
    for (int i = 0; i < x.size(); ++i) {
      h ^= static_cast<std::uint64_t>(x(i)) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct PointEqual {
  bool operator()(const Point& a, const Point& b) const noexcept { return a.size() == b.size() && a == b; }
};

// Region predicates for counting particles; compose with `complement`.

inline auto in_cube(Coord r) {
  return [r](const Point& x) { return sup_norm(x) <= r; };
}

inline auto in_shell(Shell s) {
  return [s](const Point& x) { return shell_contains(x, s); };
}

inline auto in_half_cube(Point anchor, Coord side) {
  return [anchor = std::move(anchor), side](const Point& y) { return half_cube_contains(y, anchor, side); };
}

template <typename Pred>
auto complement(Pred pred) {
  return [pred = std::move(pred)](const Point& x) { return !pred(x); };
}

}  // namespace longarm
