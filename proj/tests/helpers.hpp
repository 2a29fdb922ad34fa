#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gkdv/grid.hpp"

namespace testutil {

// Composite Simpson rule on a closed-form integrand; n must be even.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Independent 6th-order centered difference oracles (hardcoded stencils).
inline double fd1_oracle(const std::function<double(double)>& f, double y, double h = 0.02) {
  return (-f(y - 3 * h) + 9 * f(y - 2 * h) - 45 * f(y - h) + 45 * f(y + h) -
          9 * f(y + 2 * h) + f(y + 3 * h)) / (60.0 * h);
}

inline double fd2_oracle(const std::function<double(double)>& f, double y, double h = 0.02) {
  return (2 * f(y - 3 * h) - 27 * f(y - 2 * h) + 270 * f(y - h) - 490 * f(y) +
          270 * f(y + h) - 27 * f(y + 2 * h) + 2 * f(y + 3 * h)) / (180.0 * h * h);
}

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(uint64_t seed) : eng(seed) {}
  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(eng);
  }
};

// Smooth, effectively compactly supported test field: a few modulated
// Gaussian bumps kept away from the grid edges.
inline gkdv::Field random_smooth_field(const gkdv::Grid& g, uint64_t seed, int bumps = 5,
                                       double amplitude = 1.0) {
  Rng rng(seed);
  const double mid = 0.5 * (g.x_min + g.x_max);
  const double span = 0.25 * (g.x_max - g.x_min);
  std::vector<double> a(bumps), c(bumps), w(bumps), q(bumps);
  for (int m = 0; m < bumps; ++m) {
    a[m] = rng.uniform(-1.0, 1.0) * amplitude;
    c[m] = mid + rng.uniform(-span, span);
    w[m] = rng.uniform(0.8, 2.5);
    q[m] = rng.uniform(0.0, 2.0);
  }
  return gkdv::Field::sample(g, [&](double y) {
    double s = 0.0;
    for (int m = 0; m < bumps; ++m) {
      const double z = (y - c[m]) / w[m];
      s += a[m] * std::exp(-z * z) * std::cos(q[m] * (y - c[m]));
    }
    return s;
  });
}

} // namespace testutil
