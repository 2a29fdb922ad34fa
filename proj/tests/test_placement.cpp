#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gkdv/placement.hpp"
#include "gkdv/sync.hpp"
#include "helpers.hpp"

using namespace gkdv;

namespace {

// map from initial centers to the extrapolated blow-up set, with scales
// synchronized by the closed form and the formal flow run to a shallow floor
std::vector<double> reduced_map(const std::vector<double>& x0, const std::vector<double>& b,
                                double bc) {
  std::vector<double> lam = reduced_sync(1.0, b);
  std::vector<BubbleParams> init;
  for (size_t j = 0; j < b.size(); ++j) init.push_back({lam[j], b[j], x0[j]});
  ReducedTrajectory traj = reduced_flow(init, ReducedModel::formal, 1e6, bc, 2.0, 1e-12, 1e-2);
  ParamTrack track{traj.t, traj.samples};
  return estimate_blowup_data(track).x_T;
}

ParamTrack synthetic_track(const std::vector<double>& lambdas) {
  ParamTrack track;
  for (size_t i = 0; i < lambdas.size(); ++i) {
    track.t.push_back(static_cast<double>(i));
    track.samples.push_back({{lambdas[i], 0.02, 0.0}});
  }
  return track;
}

} // namespace

TEST_CASE("blow-up extrapolation from tracked parameters") {
  const double bc = 0.02;

  SECTION("the formal flow is reproduced exactly") {
    std::vector<BubbleParams> init{{1.0, 0.02, -5.0}};
    ReducedTrajectory traj =
        reduced_flow(init, ReducedModel::formal, 1e6, bc, 2.0, 1e-13, 1e-2);
    ParamTrack track{traj.t, traj.samples};
    BlowupEstimate est = estimate_blowup_data(track);

    // collapse at T = lambda0^3 / (3 b), total drift lambda0 / b
    CHECK(est.T == Catch::Approx(1.0 / 0.06).margin(1e-10));
    CHECK(est.T_j[0] == est.T);
    CHECK(est.slope[0] == Catch::Approx(-0.06).margin(1e-9));
    CHECK(est.r2[0] > 0.999999);
    CHECK(est.x_T[0] == Catch::Approx(-5.0 + 1.0 / 0.02).margin(1e-9));

    // the extrapolated tail is the closed-form integral of the fitted law
    const double t_last = track.t.back();
    const double x_last = track.samples.back()[0].x;
    const double tail = 3.0 * std::pow(0.06, -2.0 / 3.0) * std::cbrt(est.T - t_last);
    CHECK(est.x_T[0] == Catch::Approx(x_last + tail).margin(1e-12));
  }

  SECTION("synchronized bubbles report one collapse time") {
    std::vector<double> lam = reduced_sync(1.0, {0.02, 0.16});
    std::vector<BubbleParams> init{{lam[0], 0.02, 0.0}, {lam[1], 0.16, 300.0}};
    ReducedTrajectory traj =
        reduced_flow(init, ReducedModel::formal, 1e6, bc, 2.0, 1e-12, 1e-2);
    ParamTrack track{traj.t, traj.samples};
    BlowupEstimate est = estimate_blowup_data(track);

    CHECK(std::abs(est.T_j[0] - est.T_j[1]) / est.T < 0.01);
    CHECK(std::abs(est.T_j[0] - est.T_j[1]) < 1e-6);

    // drift stays within 5 / b_c of the starting centers
    CHECK(std::abs(est.x_T[0] - 0.0) <= 5.0 / bc);
    CHECK(std::abs(est.x_T[1] - 300.0) <= 5.0 / bc);
  }

  SECTION("a scale that has not halved is rejected") {
    ParamTrack track = synthetic_track({1.0, 0.9, 0.8});
    CHECK_THROWS_AS(estimate_blowup_data(track), domain_error);
  }

  SECTION("wiggly decay is not self-similar") {
    ParamTrack track =
        synthetic_track({1.0, 0.95, 0.97, 0.7, 0.8, 0.5, 0.6, 0.45, 0.42});
    CHECK_THROWS_WITH(estimate_blowup_data(track),
                      Catch::Matchers::ContainsSubstring("self-similar"));
  }

  SECTION("degenerate tracks are rejected") {
    CHECK_THROWS_AS(estimate_blowup_data(synthetic_track({1.0, 0.4})), domain_error);
    ParamTrack bad = synthetic_track({1.0, 0.7, 0.4});
    bad.t.push_back(99.0);
    CHECK_THROWS_AS(estimate_blowup_data(bad), domain_error);
  }
}

TEST_CASE("damped fixed-point placement") {
  const double bc = 0.02;
  const std::vector<double> b2{0.02, 0.16};
  auto M2 = [&](const std::vector<double>& x0) { return reduced_map(x0, b2, bc); };

  SECTION("two bubbles hit their targets in few iterations") {
    PlacementProblem prob;
    prob.targets = {0.0, 300.0};
    prob.threshold = 250.0;
    PlacementResult pr = place(prob, M2, 20, 1.0, 1e-6);

    CHECK(pr.converged);
    CHECK(pr.iterations <= 5);
    CHECK(pr.residual < 1e-6);
    CHECK(pr.centers[0] == Catch::Approx(-50.0).margin(1e-6));
    CHECK(pr.centers[1] == Catch::Approx(287.5).margin(1e-6));
    CHECK(pr.history.size() == static_cast<size_t>(pr.iterations) + 1);
    CHECK(pr.achieved[0] == Catch::Approx(0.0).margin(1e-6));
    CHECK(pr.achieved[1] == Catch::Approx(300.0).margin(1e-6));
  }

  SECTION("one bubble needs one iteration") {
    std::vector<double> b1{0.02};
    auto M1 = [&](const std::vector<double>& x0) { return reduced_map(x0, b1, bc); };
    PlacementProblem prob;
    prob.targets = {12.0};
    PlacementResult pr = place(prob, M1, 20, 1.0, 1e-6);
    CHECK(pr.converged);
    CHECK(pr.iterations == 1);
    CHECK(pr.centers[0] == Catch::Approx(12.0 - 50.0).margin(1e-6));
  }

  SECTION("translating the targets translates the answer") {
    PlacementProblem prob;
    prob.targets = {0.0, 300.0};
    PlacementResult pr = place(prob, M2, 20, 1.0, 1e-6);

    PlacementProblem shifted = prob;
    shifted.targets = {77.0, 377.0};
    PlacementResult ps = place(shifted, M2, 20, 1.0, 1e-6);

    CHECK(ps.centers[0] == Catch::Approx(pr.centers[0] + 77.0).margin(1e-6));
    CHECK(ps.centers[1] == Catch::Approx(pr.centers[1] + 77.0).margin(1e-6));
    CHECK(ps.achieved[0] == Catch::Approx(pr.achieved[0] + 77.0).margin(1e-6));
    CHECK(ps.achieved[1] == Catch::Approx(pr.achieved[1] + 77.0).margin(1e-6));
  }

  SECTION("damping converges monotonically") {
    PlacementProblem prob;
    prob.targets = {0.0, 300.0};
    PlacementResult pr = place(prob, M2, 30, 0.5, 1e-4);
    CHECK(pr.converged);
    for (size_t i = 1; i < pr.history.size(); ++i)
      CHECK(pr.history[i].residual < pr.history[i - 1].residual);
  }

  SECTION("a stuck map raises after three stagnant iterations") {
    PlacementProblem prob;
    prob.targets = {0.0, 300.0};
    auto stuck = [](const std::vector<double>&) { return std::vector<double>{10.0, 400.0}; };
    try {
      place(prob, stuck, 20, 1.0, 1e-6);
      FAIL("expected placement_stalled");
    } catch (const placement_stalled& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("stagnated"));
      CHECK(e.partial.history.size() == 4);
      CHECK(e.partial.residual == Catch::Approx(100.0));
    }
  }

  SECTION("malformed problems are rejected") {
    PlacementProblem dup;
    dup.targets = {1.0, 1.0};
    CHECK_THROWS_AS(place(dup, M2), domain_error);

    PlacementProblem close;
    close.targets = {0.0, 10.0};
    close.threshold = 250.0;
    CHECK_THROWS_AS(place(close, M2), domain_error);

    PlacementProblem ok;
    ok.targets = {0.0, 300.0};
    CHECK_THROWS_AS(place(ok, M2, 0), domain_error);
    CHECK_THROWS_AS(place(ok, M2, 20, 1.5), domain_error);
    CHECK_THROWS_AS(place(ok, M2, 20, 1.0, 0.0), domain_error);

    auto wrong = [](const std::vector<double>&) { return std::vector<double>{1.0}; };
    CHECK_THROWS_AS(place(ok, wrong), domain_error);
  }

  SECTION("the fixed-point cube faces map inward") {
    std::vector<double> targets{0.0, 300.0};

    std::vector<FaceSample> wide = brouwer_face_check(targets, 60.0, M2);
    REQUIRE(wide.size() == 4);
    for (const FaceSample& fs : wide) {
      CHECK(fs.ok);
      CHECK(fs.discrepancy == Catch::Approx(50.0).margin(1e-6));
    }
    CHECK(wide[0].point[0] == -60.0);
    CHECK(wide[1].point[0] == 60.0);
    CHECK(wide[2].point[1] == 240.0);
    CHECK(wide[3].point[1] == 360.0);

    // a radius below the actual drift fails the condition
    std::vector<FaceSample> tight = brouwer_face_check(targets, 40.0, M2);
    for (const FaceSample& fs : tight) CHECK_FALSE(fs.ok);

    CHECK_THROWS_AS(brouwer_face_check(targets, 0.0, M2), domain_error);
  }
}

TEST_CASE("scaling reduction") {
  SECTION("close targets are spread to the threshold") {
    ScalingReduction red = reduce_by_scaling({0.0, 1.0}, 400.0);
    CHECK(red.lambda_bar == 400.0);
    CHECK(red.scaled[0] == 0.0);
    CHECK(red.scaled[1] == 400.0);
    std::vector<double> back = red.unscale(red.scaled);
    CHECK(back[0] == 0.0);
    CHECK(back[1] == Catch::Approx(1.0).margin(1e-15));
  }

  SECTION("already separated targets pass through") {
    ScalingReduction red = reduce_by_scaling({0.0, 500.0}, 400.0);
    CHECK(red.lambda_bar == 1.0);
    CHECK(red.scaled[1] == 500.0);
  }

  SECTION("a single target never rescales") {
    ScalingReduction red = reduce_by_scaling({42.0}, 400.0);
    CHECK(red.lambda_bar == 1.0);
  }

  SECTION("duplicates and bad thresholds are rejected") {
    CHECK_THROWS_AS(reduce_by_scaling({3.0, 3.0}, 400.0), domain_error);
    CHECK_THROWS_AS(reduce_by_scaling({0.0, 1.0}, 0.0), domain_error);
  }

  SECTION("collapse time maps back through the cube of the factor") {
    ScalingReduction red = reduce_by_scaling({0.0, 1.0}, 2.0);
    REQUIRE(red.lambda_bar == 2.0);

    // solve the scaled problem: bubble scales are multiplied by lambda_bar
    std::vector<BubbleParams> scaled_init{{2.0, 0.02, 0.0}};
    ReducedTrajectory traj =
        reduced_flow(scaled_init, ReducedModel::formal, 1e6, 0.02, 2.0, 1e-12, 1e-2);
    ParamTrack track{traj.t, traj.samples};
    const double T_v = estimate_blowup_data(track).T;
    CHECK(red.unscale_time(T_v) == Catch::Approx(1.0 / 0.06).margin(1e-8));

    // positions map back linearly
    CHECK(red.unscale_position(red.scaled[1]) == 1.0);
  }
}
