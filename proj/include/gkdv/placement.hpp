#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gkdv/errors.hpp"
#include "gkdv/modulation.hpp"

namespace gkdv {

// Extrapolated collapse data: per-bubble fits of lambda^3 against time over
// the last decade of decay, and the closed-form center drift up to the
// extrapolated collapse time.
struct BlowupEstimate {
  double T = 0.0;              // collapse time averaged over bubbles
  std::vector<double> T_j;     // per-bubble fitted collapse times
  std::vector<double> x_T;     // per-bubble extrapolated centers
  std::vector<double> slope;   // fitted d(lambda^3)/dt, negative
  std::vector<double> r2;      // fit quality per bubble
};

// Fit lambda_j^3(t) = slope * t + intercept on the samples inside the last
// decade of collapse and extrapolate the center drift under the fitted law.
inline BlowupEstimate estimate_blowup_data(const ParamTrack& track) {
  const int m = static_cast<int>(track.t.size());
  if (m < 3) throw domain_error("estimate_blowup_data: need at least 3 samples");
  if (static_cast<int>(track.samples.size()) != m)
    throw domain_error("estimate_blowup_data: times and samples disagree");
  const int k = static_cast<int>(track.samples.front().size());

  BlowupEstimate est;
  const double t_last = track.t.back();
  for (int j = 0; j < k; ++j) {
    const double lam0 = track.samples.front()[static_cast<size_t>(j)].lambda;
    const double lam_end = track.samples.back()[static_cast<size_t>(j)].lambda;
    if (!(lam0 >= 2.0 * lam_end))
      throw domain_error("estimate_blowup_data: tracked scale has not halved");

    // keep the samples with lambda^3 within a factor 10 of the final one
    std::vector<double> t, y;
    const double y_cap = 10.0 * lam_end * lam_end * lam_end;
    for (int i = 0; i < m; ++i) {
      const double lam = track.samples[static_cast<size_t>(i)][static_cast<size_t>(j)].lambda;
      const double yy = lam * lam * lam;
      if (yy <= y_cap) {
        t.push_back(track.t[static_cast<size_t>(i)]);
        y.push_back(yy);
      }
    }
    const int n = static_cast<int>(t.size());
    if (n < 3)
      throw domain_error("estimate_blowup_data: too few samples in the fit window");

    double tm = 0.0, ym = 0.0;
    for (int i = 0; i < n; ++i) {
      tm += t[static_cast<size_t>(i)];
      ym += y[static_cast<size_t>(i)];
    }
    tm /= n;
    ym /= n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dt = t[static_cast<size_t>(i)] - tm;
      const double dy = y[static_cast<size_t>(i)] - ym;
      stt += dt * dt;
      sty += dt * dy;
      syy += dy * dy;
    }
    const double slope = sty / stt;
    const double intercept = ym - slope * tm;
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = y[static_cast<size_t>(i)] - (slope * t[static_cast<size_t>(i)] + intercept);
      ss_res += r * r;
    }
    const double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 0.0;
    if (!(slope < 0.0) || r2 < 0.99) {
      char msg[128];
      std::snprintf(msg, sizeof msg,
                    "estimate_blowup_data: not in self-similar regime, R^2 = %.6f", r2);
      throw domain_error(msg);
    }

    const double T = -intercept / slope;
    const double x_last = track.samples.back()[static_cast<size_t>(j)].x;
    // remaining drift of dx/dt = 1/lambda^2 under lambda^3 = |slope| (T - t)
    const double tail = 3.0 * std::pow(-slope, -2.0 / 3.0) * std::cbrt(T - t_last);
    est.T_j.push_back(T);
    est.x_T.push_back(x_last + tail);
    est.slope.push_back(slope);
    est.r2.push_back(r2);
  }
  for (double T : est.T_j) est.T += T;
  est.T /= static_cast<double>(k);
  return est;
}

// The map from initial centers to the estimated blow-up set; each evaluation
// is expected to re-synchronize scales before running.
using PlacementRunner = std::function<std::vector<double>(const std::vector<double>&)>;

struct PlacementProblem {
  std::vector<double> targets;
  double threshold = 0.0; // required pairwise separation (0 = caller's business)
  double scale_bar = 1.0; // scaling factor when the problem came from a reduction
};

struct PlacementIterate {
  std::vector<double> centers;
  std::vector<double> achieved;
  double residual = std::numeric_limits<double>::infinity();
};

struct PlacementResult {
  std::vector<double> centers;  // accepted initial centers
  std::vector<double> achieved; // blow-up set of the accepting evaluation
  std::vector<PlacementIterate> history;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0; // update steps taken (0 = targets already fixed)
  bool converged = false;
};

// Stagnation failure keeping the iterates for inspection; the fixed-point
// theorem guarantees a solution exists, not that this iteration finds it.
struct placement_stalled : domain_error {
  PlacementResult partial;
  placement_stalled(const std::string& msg, PlacementResult r)
      : domain_error(msg), partial(std::move(r)) {}
};

namespace detail {

inline void check_targets(const std::vector<double>& targets, double threshold) {
  if (targets.empty()) throw domain_error("placement: need at least one target");
  for (double x : targets)
    if (!std::isfinite(x)) throw domain_error("placement: targets must be finite");
  for (size_t a = 0; a < targets.size(); ++a)
    for (size_t b = a + 1; b < targets.size(); ++b) {
      const double gap = std::abs(targets[a] - targets[b]);
      if (gap == 0.0) throw domain_error("placement: duplicate targets");
      if (threshold > 0.0 && gap < threshold)
        throw domain_error("placement: targets closer than the separation threshold");
    }
}

} // namespace detail

// Damped fixed-point iteration x0 <- x0 + theta (targets - M(x0)), started at
// the targets themselves. The residual always comes from an actual run of M,
// never from the update formula.
inline PlacementResult place(const PlacementProblem& problem, const PlacementRunner& M,
                             int max_iter = 20, double theta = 1.0, double tol = 1e-6) {
  detail::check_targets(problem.targets, problem.threshold);
  if (max_iter < 1) throw domain_error("place: needs max_iter >= 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw domain_error("place: damping must lie in (0, 1]");
  if (!(tol > 0.0)) throw domain_error("place: tolerance must be positive");

  const size_t k = problem.targets.size();
  PlacementResult out;
  std::vector<double> x = problem.targets;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int iter = 0; iter <= max_iter; ++iter) {
    std::vector<double> ach = M(x);
    if (ach.size() != k) throw domain_error("place: runner returned a wrong-sized set");
    double res = 0.0;
    for (size_t j = 0; j < k; ++j) res = std::max(res, std::abs(problem.targets[j] - ach[j]));
    out.history.push_back({x, ach, res});
    out.centers = x;
    out.achieved = ach;
    out.residual = res;
    out.iterations = iter;
    if (res < tol) {
      out.converged = true;
      return out;
    }
    stalled = res >= best ? stalled + 1 : 0;
    best = std::min(best, res);
    if (stalled >= 3) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "place: residual stagnated at %.3e above tolerance %.3e after %d "
                    "iterations",
                    res, tol, iter);
      throw placement_stalled(msg, std::move(out));
    }
    if (iter == max_iter) break;
    for (size_t j = 0; j < k; ++j) x[j] += theta * (problem.targets[j] - ach[j]);
  }
  return out;
}

// One face of the cube [targets - r, targets + r] and the discrepancy of the
// runner there; the fixed-point argument needs |M(y) - y| < r on every face.
struct FaceSample {
  std::vector<double> point;
  double discrepancy = 0.0;
  bool ok = false;
};

inline std::vector<FaceSample> brouwer_face_check(const std::vector<double>& targets,
                                                  double r, const PlacementRunner& M) {
  detail::check_targets(targets, 0.0);
  if (!(r > 0.0)) throw domain_error("brouwer_face_check: needs r > 0");
  std::vector<FaceSample> out;
  for (size_t j = 0; j < targets.size(); ++j)
    for (double sign : {-1.0, 1.0}) {
      FaceSample fs;
      fs.point = targets;
      fs.point[j] += sign * r;
      std::vector<double> img = M(fs.point);
      if (img.size() != targets.size())
        throw domain_error("brouwer_face_check: runner returned a wrong-sized set");
      for (size_t i = 0; i < targets.size(); ++i)
        fs.discrepancy = std::max(fs.discrepancy, std::abs(img[i] - fs.point[i]));
      fs.ok = fs.discrepancy < r;
      out.push_back(std::move(fs));
    }
  return out;
}

// Rescaling that enforces a pairwise separation: solve the scaled problem at
// lambda_bar * targets, then map the solution back through the symmetry
// u(t, x) = lambda_bar^{2/(p-1)} v(lambda_bar^3 t, lambda_bar x).
struct ScalingReduction {
  double lambda_bar = 1.0;
  std::vector<double> scaled;

  double unscale_position(double x) const { return x / lambda_bar; }
  double unscale_time(double T) const { return T / (lambda_bar * lambda_bar * lambda_bar); }
  std::vector<double> unscale(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] / lambda_bar;
    return out;
  }
};

inline ScalingReduction reduce_by_scaling(const std::vector<double>& targets,
                                          double threshold) {
  detail::check_targets(targets, 0.0);
  if (!(threshold > 0.0)) throw domain_error("reduce_by_scaling: needs threshold > 0");
  double min_gap = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < targets.size(); ++a)
    for (size_t b = a + 1; b < targets.size(); ++b)
      min_gap = std::min(min_gap, std::abs(targets[a] - targets[b]));

  ScalingReduction red;
  red.lambda_bar = std::isfinite(min_gap) ? std::max(1.0, threshold / min_gap) : 1.0;
  red.scaled.resize(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) red.scaled[i] = red.lambda_bar * targets[i];
  return red;
}

} // namespace gkdv
