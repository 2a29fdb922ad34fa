#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gkdv/errors.hpp"

namespace gkdv {

struct OdeSolution {
  std::vector<double> t;
  std::vector<std::vector<double>> y;
  bool event_stopped = false;
};

// Dormand-Prince 5(4) with standard step control. rhs(t, y, dydt) fills the
// derivative. If `stop` is given, integration terminates at the first point
// where stop(t, y) <= 0, located by bisection on the step length.
template <class Rhs>
OdeSolution integrate_ode45(
    Rhs&& rhs, std::vector<double> y0, double t0, double t_end, double tol = 1e-10,
    const std::function<double(double, const std::vector<double>&)>& stop = {},
    double h_init = 0.0) {
  if (!(t_end > t0)) throw domain_error("ode45: needs t_end > t0");
  if (!(tol > 0.0)) throw domain_error("ode45: tolerance must be positive");

  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                          e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

  const size_t dim = y0.size();
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
  std::vector<double> work(dim), y5(dim), y4(dim);

  // One trial step of length h from (t,y); returns the scaled error estimate
  // and leaves the 5th-order result in y5.
  auto attempt = [&](double t, const std::vector<double>& y, double h) {
    rhs(t, y, k1);
    for (size_t i = 0; i < dim; ++i) work[i] = y[i] + h * a21 * k1[i];
    rhs(t + c2 * h, work, k2);
    for (size_t i = 0; i < dim; ++i) work[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, work, k3);
    for (size_t i = 0; i < dim; ++i)
      work[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, work, k4);
    for (size_t i = 0; i < dim; ++i)
      work[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * h, work, k5);
    for (size_t i = 0; i < dim; ++i)
      work[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                            a65 * k5[i]);
    rhs(t + h, work, k6);
    for (size_t i = 0; i < dim; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(t + h, y5, k7);
    for (size_t i = 0; i < dim; ++i)
      y4[i] = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                          e6 * k6[i] + e7 * k7[i]);
    double err = 0.0;
    for (size_t i = 0; i < dim; ++i) {
      const double sc = tol + tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double d = (y5[i] - y4[i]) / sc;
      err += d * d;
    }
    return std::sqrt(err / static_cast<double>(dim));
  };

  OdeSolution sol;
  sol.t.push_back(t0);
  sol.y.push_back(y0);

  double t = t0;
  std::vector<double> y = std::move(y0);
  double h = h_init > 0.0 ? h_init : (t_end - t0) * 1e-4;
  if (stop && stop(t, y) <= 0.0) {
    sol.event_stopped = true;
    return sol;
  }

  int rejects_in_a_row = 0;
  while (t < t_end) {
    h = std::min(h, t_end - t);
    const double err = attempt(t, y, h);
    if (!std::isfinite(err)) {
      h *= 0.25;
      if (++rejects_in_a_row > 60) throw domain_error("ode45: step size collapsed");
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (++rejects_in_a_row > 60) throw domain_error("ode45: step size collapsed");
      continue;
    }
    rejects_in_a_row = 0;

    if (stop) {
      const double g_new = stop(t + h, y5);
      if (g_new <= 0.0) {
        // The event lies inside this step; bisect the step length.
        double lo = 0.0, hi = h;
        for (int it = 0; it < 80 && (hi - lo) > 1e-15 * std::max(1.0, std::abs(t)); ++it) {
          const double mid = 0.5 * (lo + hi);
          attempt(t, y, mid);
          if (stop(t + mid, y5) <= 0.0)
            hi = mid;
          else
            lo = mid;
        }
        attempt(t, y, hi);
        sol.t.push_back(t + hi);
        sol.y.push_back(y5);
        sol.event_stopped = true;
        return sol;
      }
    }

    t += h;
    y = y5;
    sol.t.push_back(t);
    sol.y.push_back(y);
    h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
  }
  return sol;
}

} // namespace gkdv
