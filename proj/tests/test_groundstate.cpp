#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "gkdv/ground_state.hpp"
#include "helpers.hpp"

using namespace gkdv;

TEST_CASE("critical exponents") {
  auto cd = make_critical_data(5.1);
  CHECK(cd.sigma_c == Catch::Approx(0.5 - 2.0 / 4.1).epsilon(1e-15));
  CHECK(cd.q_c == Catch::Approx(2.05));
  CHECK(cd.nu == Catch::Approx(1e-3));
  CHECK(cd.p0 == Catch::Approx(2.5));
  CHECK(make_critical_data(5.0).sigma_c == Catch::Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(make_critical_data(4.9), domain_error);
  CHECK_THROWS_AS(make_critical_data(5.6), domain_error);
}

TEST_CASE("ground state closed form solves its equation") {
  for (double p : {5.0, 5.1, 5.2}) {
    GroundState gs(p);
    auto fn = [&](double y) { return gs(y); };
    double err = 0.0;
    for (double y = -8.0; y <= 8.0; y += 0.37) {
      const double lhs = testutil::fd2_oracle(fn, y, 0.01);
      const double rhs = gs(y) - std::pow(gs(y), p);
      err = std::max(err, std::abs(lhs - rhs));
    }
    CHECK(err < 1e-8);
  }
}

TEST_CASE("ground state peak, symmetry, decay") {
  GroundState gs(5.0);
  CHECK(gs(0.0) == Catch::Approx(std::pow(3.0, 0.25)).epsilon(1e-14));
  CHECK(gs(1.7) == Catch::Approx(gs(-1.7)).epsilon(1e-14));
  CHECK(gs(40.0) < 3.0 * std::exp(-40.0));
  CHECK(gs(40.0) > 0.0);
  GroundState gs2(5.2);
  CHECK(gs2(2.3) == Catch::Approx(gs2(-2.3)).epsilon(1e-14));
  CHECK_THROWS_AS(gs(std::nan("")), domain_error);
  CHECK_THROWS_AS(gs(INFINITY), domain_error);
  // closed-form first derivative against the oracle
  auto fn = [&](double y) { return gs(y); };
  CHECK(gs.deriv(0.9) == Catch::Approx(testutil::fd1_oracle(fn, 0.9, 0.01)).margin(1e-10));
}

TEST_CASE("mass and energy of the critical ground state") {
  GroundState gs(5.0);
  Grid g(-40.0, 40.0, 16384, false);
  auto me = mass_energy(eval_ground_state(gs, g), 5.0);
  CHECK(me.mass == Catch::Approx(std::sqrt(3.0) * std::numbers::pi / 2.0).epsilon(1e-10));
  // the critical ground state has exactly zero energy
  CHECK(std::abs(me.energy) < 1e-9);
}

TEST_CASE("mass to L1 ratio matches the gamma-function constant") {
  GroundState gs(5.0);
  Grid g(-45.0, 45.0, 16384, false);
  const double ratio = mass_to_l1_ratio(gs, g);
  const double gamma_quarter = std::tgamma(0.25);
  const double expected = 4.0 * std::numbers::pi * std::numbers::pi /
                          std::pow(gamma_quarter, 4.0);
  CHECK(ratio == Catch::Approx(expected).epsilon(1e-6));
  CHECK(ratio == Catch::Approx(0.228473).epsilon(1e-5));
}

TEST_CASE("scaling generator obeys integration by parts") {
  const double p = 5.05;
  const double sigma_c = make_critical_data(p).sigma_c;
  SECTION("periodic grid, spectral rule") {
    Grid g(-25.0, 25.0, 2048, true);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      Field f = testutil::random_smooth_field(g, seed);
      Field h = testutil::random_smooth_field(g, seed + 100);
      const double lhs = inner(apply_lambda(f, p), h);
      const double rhs = -inner(f, apply_lambda(h, p)) - 2.0 * sigma_c * inner(f, h);
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
  SECTION("bounded grid, stencil rule") {
    Grid g(-20.0, 20.0, 8192, false);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      Field f = testutil::random_smooth_field(g, seed);
      Field h = testutil::random_smooth_field(g, seed + 100);
      const double lhs = inner(apply_lambda(f, p), h);
      const double rhs = -inner(f, apply_lambda(h, p)) - 2.0 * sigma_c * inner(f, h);
      CHECK(std::abs(lhs - rhs) < 1e-8);
    }
  }
  SECTION("self-pairing gives the mass deficit") {
    Grid g(-25.0, 25.0, 2048, true);
    Field f = testutil::random_smooth_field(g, 42);
    CHECK(inner(apply_lambda(f, p), f) ==
          Catch::Approx(-sigma_c * inner(f, f)).margin(1e-10));
  }
}

TEST_CASE("linearized operator kernel identities") {
  for (double p : {5.0, 5.2}) {
    GroundState gs(p);
    Grid g(-20.0, 20.0, 8192, false);
    Field qprime = Field::sample(g, [&](double y) { return gs.deriv(y); });
    Field lam_q = Field::sample(g, [&](double y) { return gs.lambda_Q(y); });
    Field q = eval_ground_state(gs, g);

    Field lq = apply_linearized(gs, qprime);
    CHECK(sup_norm(lq) < 1e-8);

    Field llam = apply_linearized(gs, lam_q);
    double err = 0.0;
    for (int i = 0; i < g.n; ++i) err = std::max(err, std::abs(llam[i] + 2.0 * q[i]));
    CHECK(err < 1e-8);
  }
}

TEST_CASE("apply_lambda matches the closed form on the ground state") {
  GroundState gs(5.1);
  Grid g(-20.0, 20.0, 8192, false);
  Field lam = apply_lambda(eval_ground_state(gs, g), 5.1);
  double err = 0.0;
  for (int i = 0; i < g.n; ++i)
    err = std::max(err, std::abs(lam[i] - gs.lambda_Q(g.point(i))));
  CHECK(err < 1e-8);
}

TEST_CASE("small grids are rejected") {
  Grid g;
  g.n = 8;
  Field f(g);
  CHECK_THROWS_AS(apply_lambda(f, 5.1), domain_error);
  CHECK_THROWS_AS(apply_linearized(GroundState(5.1), f), domain_error);
}
