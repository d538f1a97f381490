#include "longarm/exact.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "longarm/errors.hpp"

namespace longarm {

namespace {

using cd = std::complex<double>;

void fft_nd(std::vector<cd>& data, int d, std::int64_t M, bool inverse) {
  if (M == 1) return;
  Eigen::FFT<double> fft;
  std::vector<cd> line(static_cast<std::size_t>(M)), out(static_cast<std::size_t>(M));
  const auto total = static_cast<std::int64_t>(data.size());
  std::int64_t stride = 1;
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t block = stride * M;
    for (std::int64_t outer = 0; outer < total; outer += block) {
      for (std::int64_t inner = 0; inner < stride; ++inner) {
        const std::int64_t base = outer + inner;
        for (std::int64_t k = 0; k < M; ++k) line[static_cast<std::size_t>(k)] = data[static_cast<std::size_t>(base + k * stride)];
        if (inverse) {
          fft.inv(out, line);
        } else {
          fft.fwd(out, line);
        }
        for (std::int64_t k = 0; k < M; ++k) data[static_cast<std::size_t>(base + k * stride)] = out[static_cast<std::size_t>(k)];
      }
    }
    stride = block;
  }
}

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// Index of lattice offset o in an M-periodic array, axis 0 fastest.
std::int64_t wrap_index(const Point& o, std::int64_t M) {
  std::int64_t idx = 0;
  for (int i = static_cast<int>(o.size()) - 1; i >= 0; --i) idx = idx * M + ((o(i) % M) + M) % M;
  return idx;
}

void require_transient(const Kernel& kernel) {
  const double a = kernel.spec().alpha ? std::min(2.0, *kernel.spec().alpha) : 2.0;
  require(static_cast<double>(kernel.dim()) > a,
          "Green function needs the transient regime d > (2 ^ alpha)");
}

// Geometric continuation of a decaying series from its last doubling.
double geometric_tail(const std::vector<double>& mass) {
  const std::size_t n = mass.size() - 1;
  if (n == 0 || mass[n] <= 0.0) return 0.0;
  const std::size_t h = n / 2;
  if (mass[h] <= 0.0 || h == n) return mass[n];
  const double q = std::pow(mass[n] / mass[h], 1.0 / static_cast<double>(n - h));
  if (!(q < 1.0)) return std::numeric_limits<double>::infinity();
  return mass[n] * q / (1.0 - q);
}

struct Series {
  Field sum;
  std::vector<double> mass;
  Field last;
};

// sum_{n <= N} P^n start for the killed walk; stops once a term is negligible.
Series neumann(const WindowConvolver& conv, const Field& start, std::int64_t N) {
  Series s{start, {start.total()}, start};
  for (std::int64_t n = 1; n <= N; ++n) {
    s.last = conv.apply(s.last);
    s.sum.values += s.last.values;
    s.mass.push_back(s.last.total());
    if (s.mass.back() < 1e-16 * s.mass.front()) break;
  }
  s.sum.mass_outside = s.last.mass_outside;
  return s;
}

}  // namespace

std::int64_t fft_size(std::int64_t n) {
  for (std::int64_t m = std::max<std::int64_t>(n, 1);; ++m) {
    std::int64_t k = m;
    for (std::int64_t p : {2, 3, 5}) {
      while (k % p == 0) k /= p;
    }
    if (k == 1) return m;
  }
}

WindowConvolver::WindowConvolver(const Kernel& kernel, Coord R) : d_(kernel.dim()), R_(R) {
  require(R >= 0, "window radius must be non-negative");
  M_ = fft_size(4 * R + 1);
  const std::int64_t total = ipow(M_, d_);
  require(total <= (std::int64_t{1} << 27), "window too large for the convolution buffer");
  kernel_hat_.assign(static_cast<std::size_t>(total), cd(0.0, 0.0));
  const Coord span = 2 * R;
  const std::uint64_t count = cube_size(d_, span);
  for (std::uint64_t i = 0; i < count; ++i) {
    const Point o = cube_point(d_, span, i);
    kernel_hat_[static_cast<std::size_t>(wrap_index(o, M_))] = kernel.pmf(o);
  }
  fft_nd(kernel_hat_, d_, M_, false);
}

Field WindowConvolver::apply(const Field& in) const {
  require(in.d == d_ && in.R == R_, "field does not match the convolver window");
  std::vector<cd> buf(kernel_hat_.size(), cd(0.0, 0.0));
  for (Eigen::Index i = 0; i < in.values.size(); ++i) {
    const Point y = in.point(i);
    buf[static_cast<std::size_t>(wrap_index(y + Point::Constant(d_, R_), M_))] = in.values(i);
  }
  fft_nd(buf, d_, M_, false);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= kernel_hat_[k];
  fft_nd(buf, d_, M_, true);
  Field out(d_, R_);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const Point x = out.point(i);
    out.values(i) = std::max(0.0, buf[static_cast<std::size_t>(wrap_index(x + Point::Constant(d_, R_), M_))].real());
  }
  out.mass_outside = in.mass_outside + std::max(0.0, in.total() - out.total());
  return out;
}

Field convolve_power(const Kernel& kernel, std::int64_t n, Coord R) {
  require(n >= 0, "convolution power must be >= 0");
  require(R >= 1, "window radius must be >= 1");
  Field f = Field::delta(kernel.dim(), R);
  if (n == 0) return f;
  const WindowConvolver conv(kernel, R);
  for (std::int64_t k = 0; k < n; ++k) f = conv.apply(f);
  return f;
}

Field convolve_fields(const Field& a, const Field& b) {
  require(a.d == b.d && a.R == b.R, "fields must share dimension and window");
  const int d = a.d;
  const Coord R = a.R;
  const std::int64_t M = fft_size(4 * R + 1);
  const auto total = static_cast<std::size_t>(ipow(M, d));
  std::vector<cd> fa(total, cd(0.0, 0.0)), fb(total, cd(0.0, 0.0));
  for (Eigen::Index i = 0; i < a.values.size(); ++i) {
    const Point y = a.point(i);
    fa[static_cast<std::size_t>(wrap_index(y + Point::Constant(d, R), M))] = a.values(i);
    fb[static_cast<std::size_t>(wrap_index(y, M))] = b.values(i);
  }
  fft_nd(fa, d, M, false);
  fft_nd(fb, d, M, false);
  for (std::size_t k = 0; k < total; ++k) fa[k] *= fb[k];
  fft_nd(fa, d, M, true);
  Field out(d, R);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const Point x = out.point(i);
    out.values(i) = std::max(0.0, fa[static_cast<std::size_t>(wrap_index(x + Point::Constant(d, R), M))].real());
  }
  out.mass_outside = a.mass_outside + b.mass_outside + std::max(0.0, a.total() * b.total() - out.total());
  return out;
}

GreenResult green_function(const Kernel& kernel, std::int64_t N, Coord R) {
  require_transient(kernel);
  require(N >= 0 && R >= 1, "green_function needs N >= 0 and R >= 1");
  const WindowConvolver conv(kernel, R);
  Series s = neumann(conv, Field::delta(kernel.dim(), R), N);
  GreenResult g;
  g.terms = static_cast<std::int64_t>(s.mass.size());
  g.last_term = s.mass.back();
  g.residual = geometric_tail(s.mass);
  g.G = std::move(s.sum);
  return g;
}

Field green_function_window_limit(const Kernel& kernel, std::int64_t N, Coord R) {
  const Field a = green_function(kernel, N, R).G;
  const Field b = green_function(kernel, N, 2 * R).G;
  const Field c = green_function(kernel, N, 4 * R).G;
  Field out(kernel.dim(), R);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const Point x = out.point(i);
    const double ga = a.at(x), gb = b.at(x), gc = c.at(x);
    const double d1 = gb - ga, d2 = gc - gb;
    const double den = d2 - d1;
    // Fall back to the largest window when the differences are not geometric.
    if (!(d1 > 0.0 && d2 > 0.0 && d2 < d1) || std::abs(den) < 1e-300) {
      out.values(i) = gc;
    } else {
      out.values(i) = gc - d2 * d2 / den;
    }
  }
  return out;
}

double renewal_residual(const Kernel& kernel, const Field& G) {
  const WindowConvolver conv(kernel, G.R);
  const Field DG = conv.apply(G);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < G.values.size(); ++i) {
    const Point x = G.point(i);
    if (sup_norm(x) > G.R / 2) continue;
    const double delta = x.isZero() ? 1.0 : 0.0;
    worst = std::max(worst, std::abs(G.values(i) - delta - DG.values(i)));
  }
  return worst;
}

double brw_one_arm_oracle(const OffspringDist& off, const Kernel& kernel, Coord r, Coord R, double tol,
                          OracleVariant variant) {
  require(r >= 0 && r < R, "oracle needs 0 <= r < R");
  require(tol > 0.0, "oracle tolerance must be positive");
  const int d = kernel.dim();
  const WindowConvolver conv(kernel, r);
  // Probability that a step from x in Q_r lands outside Q_R.
  Field lost(d, r);
  if (variant == OracleVariant::Miss) {
    const WindowConvolver big(kernel, R);
    const Field stay = big.apply(Field::indicator_of_cube(d, R, R));
    for (Eigen::Index i = 0; i < lost.values.size(); ++i) {
      lost.values(i) = std::max(0.0, 1.0 - stay.at(lost.point(i)));
    }
  }
  // w = 1 - u: probability that no particle of the walk from x gets a hit.
  Field w(d, r);
  w.values.setOnes();
  constexpr int kMaxIter = 1000000;
  for (int it = 0; it < kMaxIter; ++it) {
    const Field s = conv.apply(w);
    double change = 0.0;
    for (Eigen::Index i = 0; i < w.values.size(); ++i) {
      const double next = off.generating_function(std::min(1.0, s.values(i) + lost.values(i)));
      if (next > w.values(i) + 1e-12) throw NumericalGuard("one-arm oracle iterate is not monotone");
      change = std::max(change, std::abs(next - w.values(i)));
      w.values(i) = std::min(next, w.values(i));
    }
    if (change < tol) return 1.0 - w.at(origin(d));
  }
  throw NumericalGuard("one-arm oracle did not converge");
}

ThreePoint three_point_sum(const Kernel& kernel, double sigma_sq, Coord R, std::int64_t N, Coord r) {
  require_transient(kernel);
  require(sigma_sq >= 0.0, "sigma^2 must be non-negative");
  require(r >= 0 && R >= 1 && 4 * r <= R, "three_point_sum needs 0 <= r <= R/4");
  require(N >= 0, "N must be >= 0");
  const int d = kernel.dim();
  const WindowConvolver conv(kernel, R);
  const Series g = neumann(conv, Field::delta(d, R), N);
  const Field S = Field::indicator_of_cube(d, R, r);
  const Series u = neumann(conv, S, N);
  const Eigen::ArrayXd F = u.sum.values - S.values;
  const Eigen::ArrayXd& G0 = g.sum.values;
  ThreePoint t;
  t.first_moment = (G0 * S.values).sum();
  const double ancestors = (G0 * S.values * F).sum();
  const double branch = (G0 * F * F).sum();
  t.second_moment = t.first_moment + 2.0 * ancestors + sigma_sq * branch;
  const double rel_g = geometric_tail(g.mass) / std::max(1e-300, g.mass.front());
  const double rel_u = geometric_tail(u.mass) / std::max(1e-300, u.mass.front());
  t.residual = t.second_moment * (rel_g + 2.0 * rel_u);
  return t;
}

void TinyGraph::validate() const {
  require(vertices >= 1 && vertices <= 16, "TinyGraph needs 1..16 vertices");
  require(edges.size() <= 24, "TinyGraph allows at most 24 edges");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    require(e.u >= 0 && e.u < vertices && e.v >= 0 && e.v < vertices, "edge endpoint out of range");
    require(e.u != e.v, "TinyGraph must be simple (no loops)");
    require(e.p >= 0.0 && e.p <= 1.0, "edge probability must lie in [0,1]");
    require(seen.insert(std::minmax(e.u, e.v)).second, "TinyGraph must be simple (no parallel edges)");
  }
}

namespace {

// Probability of each configuration as a product of two half tables.
struct ConfigWeights {
  int split = 0;
  std::vector<double> lo, hi;

  explicit ConfigWeights(const TinyGraph& g) {
    const int m = static_cast<int>(g.edges.size());
    split = m / 2;
    lo = table(g, 0, split);
    hi = table(g, split, m);
  }

  static std::vector<double> table(const TinyGraph& g, int from, int to) {
    std::vector<double> t(std::size_t{1} << (to - from), 1.0);
    for (std::size_t mask = 0; mask < t.size(); ++mask) {
      for (int e = from; e < to; ++e) {
        const double p = g.edges[static_cast<std::size_t>(e)].p;
        t[mask] *= (mask >> (e - from)) & 1U ? p : 1.0 - p;
      }
    }
    return t;
  }

  double operator()(std::uint32_t mask) const {
    return lo[mask & ((1U << split) - 1U)] * hi[mask >> split];
  }
};

struct Neumaier {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

}  // namespace

double enumerate(const TinyGraph& g, const EdgeEvent& event) {
  g.validate();
  const ConfigWeights w(g);
  const std::uint32_t configs = 1U << g.edges.size();
  Neumaier acc;
  for (std::uint32_t mask = 0; mask < configs; ++mask) {
    if (event(mask)) acc.add(w(mask));
  }
  return acc.value();
}

bool connected(const TinyGraph& g, std::uint32_t open_mask, int a, int b) {
  std::vector<int> parent(static_cast<std::size_t>(g.vertices));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if ((open_mask >> e) & 1U) parent[static_cast<std::size_t>(find(g.edges[e].u))] = find(g.edges[e].v);
  }
  return find(a) == find(b);
}

BkResult bk_check(const TinyGraph& g, const EdgeEvent& A, const EdgeEvent& B) {
  g.validate();
  require(g.edges.size() <= 12, "bk_check allows at most 12 edges");
  const ConfigWeights w(g);
  const std::uint32_t configs = 1U << g.edges.size();
  std::vector<char> a(configs), b(configs);
  for (std::uint32_t mask = 0; mask < configs; ++mask) {
    a[mask] = A(mask);
    b[mask] = B(mask);
  }
  Neumaier pa, pb, pab;
  for (std::uint32_t open = 0; open < configs; ++open) {
    const double p = w(open);
    if (a[open]) pa.add(p);
    if (b[open]) pb.add(p);
    // Search K over the submasks of the open set, including the empty one.
    std::uint32_t K = open;
    for (;;) {
      if (a[K] && b[open & ~K]) {
        pab.add(p);
        break;
      }
      if (K == 0) break;
      K = (K - 1) & open;
    }
  }
  return {pab.value(), pa.value() * pb.value()};
}

EdgeEvent up_closure(std::vector<std::uint32_t> witnesses) {
  return [ws = std::move(witnesses)](std::uint32_t mask) {
    return std::any_of(ws.begin(), ws.end(), [mask](std::uint32_t s) { return (mask & s) == s; });
  };
}

}  // namespace longarm
