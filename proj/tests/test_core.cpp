#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gkdv/grid.hpp"
#include "gkdv/spectral.hpp"
#include "helpers.hpp"

using namespace gkdv;

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid(1.0, 1.0, 64, false), domain_error);
  CHECK_THROWS_AS(Grid(2.0, 1.0, 64, false), domain_error);
  CHECK_THROWS_AS(Grid(0.0, 1.0, 8, false), domain_error);
  Grid g(0.0, 1.0, 17, false);
  CHECK(g.h() == Catch::Approx(1.0 / 16.0));
  Grid gp(0.0, 1.0, 16, true);
  CHECK(gp.h() == Catch::Approx(1.0 / 16.0));
  CHECK(gp.point(0) == 0.0);
}

TEST_CASE("fornberg weights reproduce known stencils") {
  std::vector<double> x{-2, -1, 0, 1, 2};
  auto w1 = fd_weights(0.0, x, 1);
  CHECK(w1[0] == Catch::Approx(1.0 / 12));
  CHECK(w1[1] == Catch::Approx(-8.0 / 12));
  CHECK(w1[3] == Catch::Approx(8.0 / 12));
  auto w2 = fd_weights(0.0, x, 2);
  CHECK(w2[0] == Catch::Approx(-1.0 / 12));
  CHECK(w2[2] == Catch::Approx(-30.0 / 12));
}

TEST_CASE("bounded-grid derivative accuracy") {
  Grid g(-10.0, 10.0, 2001, false);
  auto f = Field::sample(g, [](double y) { return std::exp(-y * y / 4.0) * std::sin(2 * y); });
  Field d1 = fd_derivative(f, 1);
  Field d3 = fd_derivative(f, 3);
  double e1 = 0.0, e3 = 0.0;
  auto fn = [](double y) { return std::exp(-y * y / 4.0) * std::sin(2 * y); };
  for (int i = 0; i < g.n; i += 7) {
    const double y = g.point(i);
    if (std::abs(y) > 9.0) continue;
    e1 = std::max(e1, std::abs(d1[i] - testutil::fd1_oracle(fn, y, 0.004)));
    const double d3o = (testutil::fd2_oracle(fn, y + 0.002, 0.004) -
                        testutil::fd2_oracle(fn, y - 0.002, 0.004)) / 0.004;
    e3 = std::max(e3, std::abs(d3[i] - d3o));
  }
  CHECK(e1 < 1e-7);
  CHECK(e3 < 1e-4);
}

TEST_CASE("periodic spectral derivative is exact on trig modes") {
  Grid g(0.0, 2.0 * std::numbers::pi, 64, true);
  auto f = Field::sample(g, [](double x) { return std::sin(3 * x) + 0.5 * std::cos(5 * x); });
  Field d = derivative(f, 1);
  double err = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.point(i);
    err = std::max(err, std::abs(d[i] - (3 * std::cos(3 * x) - 2.5 * std::sin(5 * x))));
  }
  CHECK(err < 1e-12);
}

TEST_CASE("quadrature matches closed forms") {
  Grid g(-30.0, 30.0, 4096, false);
  auto f = Field::sample(g, [](double y) { return std::exp(-y * y); });
  CHECK(quadrature(f) == Catch::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
  Grid gp(0.0, 2.0 * std::numbers::pi, 128, true);
  auto s2 = Field::sample(gp, [](double x) { double s = std::sin(x); return s * s; });
  CHECK(quadrature(s2) == Catch::Approx(std::numbers::pi).epsilon(1e-13));
}

TEST_CASE("cubic spline interpolates to fourth order and wraps periodically") {
  auto fn = [](double y) { return std::exp(-y * y / 8.0) * std::cos(2 * y); };
  Grid g(-12.0, 12.0, 1201, false);
  CubicSpline s(Field::sample(g, fn));
  double err = 0.0;
  for (double y = -9.0; y < 9.0; y += 0.0137)
    err = std::max(err, std::abs(s(y) - fn(y)));
  CHECK(err < 2e-7);
  CHECK(s(-100.0) == 0.0);
  CHECK(s(100.0) == 0.0);

  Grid gp(0.0, 2.0 * std::numbers::pi, 256, true);
  CubicSpline sp(Field::sample(gp, [](double x) { return std::sin(x); }));
  CHECK(sp(0.3) == Catch::Approx(std::sin(0.3)).margin(1e-8));
  CHECK(sp(0.3 + 2.0 * std::numbers::pi) == Catch::Approx(std::sin(0.3)).margin(1e-8));
  CHECK(sp(-1.0) == Catch::Approx(std::sin(-1.0)).margin(1e-8));
  CHECK(sp.deriv(0.7) == Catch::Approx(std::cos(0.7)).margin(1e-6));
}
