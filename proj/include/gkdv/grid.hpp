#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "gkdv/errors.hpp"

namespace gkdv {

// Uniform 1-d grid. A periodic grid covers [x_min, x_max) with n cells of
// width h = L/n; a bounded grid covers [x_min, x_max] with h = L/(n-1).
struct Grid {
  double x_min = 0.0;
  double x_max = 1.0;
  int n = 16;
  bool periodic = false;

  Grid() = default;
  Grid(double a, double b, int npts, bool per)
      : x_min(a), x_max(b), n(npts), periodic(per) {
    if (!std::isfinite(a) || !std::isfinite(b))
      throw domain_error("grid: bounds must be finite");
    if (!(x_min < x_max)) throw domain_error("grid: requires x_min < x_max");
    if (n < 16) throw domain_error("grid: requires at least 16 points");
  }

  double length() const { return x_max - x_min; }
  double h() const { return length() / (periodic ? n : n - 1); }
  double point(int i) const { return x_min + h() * i; }
  bool operator==(const Grid&) const = default;
};

struct Field {
  Grid grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const Grid& g) : grid(g), values(static_cast<size_t>(g.n), 0.0) {}
  Field(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (static_cast<int>(values.size()) != g.n)
      throw domain_error("field: sample count must match grid");
  }

  template <class F>
  static Field sample(const Grid& g, F&& f) {
    Field out(g);
    for (int i = 0; i < g.n; ++i) out.values[i] = f(g.point(i));
    return out;
  }

  double& operator[](int i) { return values[static_cast<size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<size_t>(i)]; }
  int n() const { return grid.n; }
};

// Finite-difference weights for derivatives 0..m at point z on nodes x
// (Fornberg's recurrence). Row k of the result holds the k-th derivative
// weights.
inline std::vector<std::vector<double>> fd_weights_all(double z,
                                                       const std::vector<double>& x,
                                                       int m) {
  const int nd = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(static_cast<size_t>(m) + 1,
                                     std::vector<double>(static_cast<size_t>(nd), 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < nd; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[static_cast<size_t>(i)] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[static_cast<size_t>(i)] - x[static_cast<size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[static_cast<size_t>(k)][static_cast<size_t>(i)] =
              c1 * (k * c[static_cast<size_t>(k) - 1][static_cast<size_t>(i) - 1] -
                    c5 * c[static_cast<size_t>(k)][static_cast<size_t>(i) - 1]) / c2;
        c[0][static_cast<size_t>(i)] = -c1 * c5 * c[0][static_cast<size_t>(i) - 1] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[static_cast<size_t>(k)][static_cast<size_t>(j)] =
            (c4 * c[static_cast<size_t>(k)][static_cast<size_t>(j)] -
             k * c[static_cast<size_t>(k) - 1][static_cast<size_t>(j)]) / c3;
      c[0][static_cast<size_t>(j)] = c4 * c[0][static_cast<size_t>(j)] / c3;
    }
    c1 = c2;
  }
  return c;
}

inline std::vector<double> fd_weights(double z, const std::vector<double>& x, int m) {
  return fd_weights_all(z, x, m)[static_cast<size_t>(m)];
}

// m-th derivative on a bounded grid: centered interior stencils of the given
// formal order, one-sided stencils of the same width at the edges.
inline Field fd_derivative(const Field& f, int m, int order = 4) {
  const Grid& g = f.grid;
  if (g.periodic)
    throw domain_error("fd_derivative: bounded grids only (periodic grids differentiate spectrally)");
  if (m < 1 || m > 4) throw domain_error("fd_derivative: derivative order 1..4");
  const int r = (m + order) / 2;
  const int w = 2 * r + 1;
  if (g.n < w) throw domain_error("fd_derivative: grid too small for stencil");
  const double h = g.h();

  std::vector<double> nodes(static_cast<size_t>(w));
  for (int j = 0; j < w; ++j) nodes[static_cast<size_t>(j)] = (j - r) * h;
  const std::vector<double> wc = fd_weights(0.0, nodes, m);

  Field out(g);
  for (int i = r; i < g.n - r; ++i) {
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += wc[static_cast<size_t>(j)] * f[i - r + j];
    out[i] = s;
  }
  // One-sided rows reuse the first/last w nodes, evaluated at the row point.
  for (int i = 0; i < r; ++i) {
    std::vector<double> xs(static_cast<size_t>(w));
    for (int j = 0; j < w; ++j) xs[static_cast<size_t>(j)] = j * h;
    const std::vector<double> wb = fd_weights(i * h, xs, m);
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += wb[static_cast<size_t>(j)] * f[j];
    out[i] = s;
  }
  for (int i = g.n - r; i < g.n; ++i) {
    std::vector<double> xs(static_cast<size_t>(w));
    for (int j = 0; j < w; ++j) xs[static_cast<size_t>(j)] = j * h;
    const std::vector<double> wb = fd_weights((i - (g.n - w)) * h, xs, m);
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += wb[static_cast<size_t>(j)] * f[g.n - w + j];
    out[i] = s;
  }
  return out;
}

// Trapezoid rule; on periodic grids this is the rectangle rule.
inline double quadrature(const Field& f) {
  const double h = f.grid.h();
  double s = 0.0;
  if (f.grid.periodic) {
    for (double v : f.values) s += v;
    return s * h;
  }
  for (int i = 1; i < f.grid.n - 1; ++i) s += f[i];
  s += 0.5 * (f.values.front() + f.values.back());
  return s * h;
}

inline double inner(const Field& a, const Field& b) {
  if (!(a.grid == b.grid)) throw domain_error("inner: fields live on different grids");
  Field prod(a.grid);
  for (int i = 0; i < a.grid.n; ++i) prod[i] = a[i] * b[i];
  return quadrature(prod);
}

inline double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, inner(f, f))); }

inline double sup_norm(const Field& f) {
  double s = 0.0;
  for (double v : f.values) s = std::max(s, std::abs(v));
  return s;
}

namespace detail {

// Thomas algorithm for a tridiagonal system (diagonals a=sub, b=diag, c=super).
inline std::vector<double> solve_tridiag(std::vector<double> a, std::vector<double> b,
                                         std::vector<double> c, std::vector<double> d) {
  const size_t n = b.size();
  for (size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = d[n - 1] / b[n - 1];
  for (size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

} // namespace detail

// Cubic spline on a uniform grid. Bounded grids use not-a-knot ends and
// evaluate to 0 outside the domain (profiles stored on finite grids are
// compactly supported); periodic grids wrap.
class CubicSpline {
public:
  CubicSpline() = default;

  explicit CubicSpline(const Field& f) : grid_(f.grid), y_(f.values) {
    const int n = grid_.n;
    const double h = grid_.h();
    const double inv_h2 = 1.0 / (h * h);
    if (grid_.periodic) {
      // Cyclic tridiagonal system for the second derivatives, solved with
      // Sherman-Morrison on top of two Thomas passes.
      std::vector<double> d(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double ym = y_[static_cast<size_t>((i + n - 1) % n)];
        const double yp = y_[static_cast<size_t>((i + 1) % n)];
        d[static_cast<size_t>(i)] = 6.0 * (ym - 2.0 * y_[static_cast<size_t>(i)] + yp) * inv_h2;
      }
      const double alpha = 1.0, beta = 1.0, gamma = -4.0;
      std::vector<double> diag(static_cast<size_t>(n), 4.0);
      diag.front() -= gamma;
      diag.back() -= alpha * beta / gamma;
      std::vector<double> sub(static_cast<size_t>(n), 1.0), sup(static_cast<size_t>(n), 1.0);
      std::vector<double> u(static_cast<size_t>(n), 0.0);
      u.front() = gamma;
      u.back() = alpha;
      auto x1 = detail::solve_tridiag(sub, diag, sup, d);
      auto x2 = detail::solve_tridiag(sub, diag, sup, u);
      const double fact = (x1.front() + beta * x1.back() / gamma) /
                          (1.0 + x2.front() + beta * x2.back() / gamma);
      m_.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i)
        m_[static_cast<size_t>(i)] = x1[static_cast<size_t>(i)] - fact * x2[static_cast<size_t>(i)];
    } else {
      if (n < 4) throw domain_error("spline: need at least 4 points");
      // Not-a-knot: the end second derivatives follow from continuity of the
      // third derivative at the first and last interior knots, which
      // decouples m_1 and m_{n-2} and leaves a tridiagonal core.
      m_.assign(static_cast<size_t>(n), 0.0);
      auto rhs = [&](int i) {
        return 6.0 * (y_[static_cast<size_t>(i) - 1] - 2.0 * y_[static_cast<size_t>(i)] +
                      y_[static_cast<size_t>(i) + 1]) * inv_h2;
      };
      const double m1 = rhs(1) / 6.0;
      const double mn2 = rhs(n - 2) / 6.0;
      m_[1] = m1;
      m_[static_cast<size_t>(n) - 2] = mn2;
      if (n > 4) {
        const int cnt = n - 4;
        std::vector<double> sub(static_cast<size_t>(cnt), 1.0), diag(static_cast<size_t>(cnt), 4.0),
            sup(static_cast<size_t>(cnt), 1.0), d(static_cast<size_t>(cnt));
        for (int i = 2; i <= n - 3; ++i) d[static_cast<size_t>(i) - 2] = rhs(i);
        d.front() -= m1;
        d.back() -= mn2;
        auto sol = detail::solve_tridiag(sub, diag, sup, d);
        for (int i = 2; i <= n - 3; ++i) m_[static_cast<size_t>(i)] = sol[static_cast<size_t>(i) - 2];
      }
      m_[0] = 2.0 * m_[1] - m_[2];
      m_[static_cast<size_t>(n) - 1] = 2.0 * m_[static_cast<size_t>(n) - 2] - m_[static_cast<size_t>(n) - 3];
    }
  }

  double operator()(double x) const { return eval_impl(x, 0); }
  double deriv(double x) const { return eval_impl(x, 1); }
  const Grid& grid() const { return grid_; }

private:
  double eval_impl(double x, int der) const {
    if (y_.empty()) return 0.0;
    const int n = grid_.n;
    const double h = grid_.h();
    int i;
    double t;
    if (grid_.periodic) {
      const double L = grid_.length();
      double xr = std::fmod(x - grid_.x_min, L);
      if (xr < 0) xr += L;
      i = std::min(static_cast<int>(xr / h), n - 1);
      t = xr - i * h;
    } else {
      if (x < grid_.x_min || x > grid_.x_max) return 0.0;
      i = std::min(static_cast<int>((x - grid_.x_min) / h), n - 2);
      t = x - grid_.point(i);
    }
    const size_t ip = static_cast<size_t>(i);
    const size_t inext = grid_.periodic ? static_cast<size_t>((i + 1) % n) : ip + 1;
    const double mi = m_[ip], mj = m_[inext];
    const double yi = y_[ip], yj = y_[inext];
    const double b = (yj - yi) / h - h * (2.0 * mi + mj) / 6.0;
    const double c = 0.5 * mi;
    const double dcf = (mj - mi) / (6.0 * h);
    if (der == 0) return yi + t * (b + t * (c + t * dcf));
    return b + t * (2.0 * c + t * 3.0 * dcf);
  }

  Grid grid_;
  std::vector<double> y_;
  std::vector<double> m_;
};

} // namespace gkdv
