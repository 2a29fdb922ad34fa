#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gkdv/grid.hpp"
#include "gkdv/modulation.hpp"
#include "gkdv/pde.hpp"
#include "gkdv/profile.hpp"

namespace gkdv {

// Allowed band for pairwise scale ratios, and the escape trigger beyond
// which a ratio never comes back on the reduced damped model.
struct BandPolicy {
  int k = 2;
  double lower = 0.0;
  double upper = 0.0;
  double trigger = 10.0 / 9.0;

  explicit BandPolicy(int k_) : k(k_) {
    if (k < 1) throw domain_error("band policy: needs k >= 1");
    upper = std::pow(2.0, k + 1);
    lower = 1.0 / upper;
  }
};

enum class Classification { below, above, balanced };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::below: return "below";
    case Classification::above: return "above";
    default: return "balanced";
  }
}

// What a runner hands back: the tracked parameter series and whether the run
// ended at its scale floor (a prerequisite for calling it balanced).
struct SyncRun {
  ParamTrack track;
  bool min_scale_reached = false;
};

using SyncRunner = std::function<SyncRun(const std::vector<BubbleParams>&)>;

// Scan the tracked ratio lambda_i / lambda_j in time order. The first band
// crossing decides; a run that stayed inside the band must have reached its
// scale floor to count as balanced.
inline Classification classify(const SyncRun& run, const BandPolicy& policy, int i,
                               int j) {
  const auto& track = run.track;
  if (track.t.empty() || track.samples.empty())
    throw domain_error("classify: run lacks tracker data");
  const int k = static_cast<int>(track.samples.front().size());
  if (i < 0 || j < 0 || i >= k || j >= k || i == j)
    throw domain_error("classify: bad bubble pair");
  for (size_t s = 0; s < track.samples.size(); ++s) {
    const double ratio = track.samples[s][static_cast<size_t>(i)].lambda /
                         track.samples[s][static_cast<size_t>(j)].lambda;
    if (ratio < policy.lower) return Classification::below;
    if (ratio > policy.upper) return Classification::above;
  }
  if (!run.min_scale_reached)
    throw domain_error("classify: run ended before the scale floor with the ratio in band");
  return Classification::balanced;
}

// Scale choices that equalize the frozen-drift collapse times:
// lambda_j = lambda_1 (b_j / b_1)^{1/3}.
inline std::vector<double> reduced_sync(double lambda_1, const std::vector<double>& b) {
  if (!(lambda_1 > 0.0)) throw domain_error("reduced_sync: needs lambda_1 > 0");
  if (b.empty()) throw domain_error("reduced_sync: needs at least one drift value");
  for (double bj : b)
    if (!(bj > 0.0)) throw domain_error("reduced_sync: drifts must be positive");
  std::vector<double> out(b.size());
  for (size_t j = 0; j < b.size(); ++j)
    out[j] = lambda_1 * std::cbrt(b[j] / b[0]);
  return out;
}

// Runner backed by the reduced parameter flow. The deep default floor makes
// classification decisive: any mis-synchronization leaves one bubble at a
// finite scale when the other reaches the floor, so the ratio escapes.
struct ReducedRunner {
  ReducedModel model = ReducedModel::formal;
  double b_c = 0.0228;
  double c_p = 2.0;
  double tol = 1e-10;
  double floor_frac = 1e-7;
  double t_cap = 1e6;

  SyncRun operator()(const std::vector<BubbleParams>& init) const {
    double lam_min = std::numeric_limits<double>::infinity();
    for (const auto& bp : init) lam_min = std::min(lam_min, bp.lambda);
    ReducedTrajectory traj =
        reduced_flow(init, model, t_cap, b_c, c_p, tol, floor_frac * lam_min);
    SyncRun run;
    run.track.t = traj.t;
    run.track.samples = traj.samples;
    run.min_scale_reached = traj.blew_up;
    return run;
  }
};

// Decomposition tracking of a PDE evolution, re-fitted whenever the cheap
// amplitude-based scale proxy moves by retrack_frac, with optional stops at
// a tracked-scale floor or at a ratio-band exit.
struct TrackConfig {
  double retrack_frac = 0.001;
  double stop_scale_frac = 0.0; // stop when min tracked scale <= frac * initial
  double band_lo = 0.0;         // stop when some pair ratio leaves
  double band_hi = std::numeric_limits<double>::infinity(); // [lo/margin, hi*margin]
  double margin = 1.5;
  double decompose_tol = 0.0;
  bool record_norms = false;    // fill N with per-bubble local norms
};

struct TrackedRun {
  ParamTrack track;
  std::vector<std::vector<double>> N; // [sample][bubble], when requested
  EvolveResult result;
  bool scale_stop = false;
  bool band_stop = false;
};

namespace detail {

struct tracker_stop : std::exception {
  const char* what() const noexcept override { return "tracker stop"; }
};

} // namespace detail

inline TrackedRun track_evolution(const Field& u0, const std::vector<BubbleParams>& init,
                                  const LocalizedProfile& prof, EvolutionConfig cfg,
                                  const TrackConfig& tc = {}) {
  TrackedRun out;
  Weights w(prof.b_c);
  double lam0_min = std::numeric_limits<double>::infinity();
  for (const auto& bp : init) lam0_min = std::min(lam0_min, bp.lambda);

  std::vector<BubbleParams> last = init;
  double last_proxy = -1.0;
  auto observer = [&](double t, const Field& u) {
    const double proxy = scale_estimate(sup_norm(u), cfg.p);
    if (last_proxy > 0.0 && std::abs(proxy / last_proxy - 1.0) < tc.retrack_frac) return;
    Decomposition dec = decompose(u, last, prof, tc.decompose_tol);
    last = dec.bubbles;
    last_proxy = proxy;
    out.track.t.push_back(t);
    out.track.samples.push_back(dec.bubbles);
    if (tc.record_norms) {
      std::vector<double> row;
      for (size_t j = 0; j < dec.eps.size(); ++j)
        row.push_back(local_norm(dec, static_cast<int>(j), w));
      out.N.push_back(std::move(row));
    }
    double lam_min = std::numeric_limits<double>::infinity();
    for (const auto& bp : dec.bubbles) lam_min = std::min(lam_min, bp.lambda);
    if (tc.stop_scale_frac > 0.0 && lam_min <= tc.stop_scale_frac * lam0_min) {
      out.scale_stop = true;
      throw detail::tracker_stop{};
    }
    if (tc.band_lo > 0.0) {
      for (size_t a = 0; a < dec.bubbles.size(); ++a)
        for (size_t b = 0; b < dec.bubbles.size(); ++b) {
          if (a == b) continue;
          const double r = dec.bubbles[a].lambda / dec.bubbles[b].lambda;
          if (r < tc.band_lo / tc.margin || r > tc.band_hi * tc.margin) {
            out.band_stop = true;
            throw detail::tracker_stop{};
          }
        }
    }
  };

  out.result = evolve(u0, cfg, {observer});
  if (out.result.partial && !out.scale_stop && !out.band_stop)
    throw domain_error("track_evolution: tracker failed: " + out.result.observer_error);
  return out;
}

// Runner backed by the full PDE: synthesize the candidate bubbles, evolve
// with decomposition tracking, stop at a collapse factor (default 3.2) or
// when a ratio leaves the policy band with margin.
struct PdeRunner {
  const LocalizedProfile* prof = nullptr;
  Grid box;
  EvolutionConfig cfg;        // p, dt rule, strides; t_end is a cap per run
  BandPolicy policy{2};
  double stop_scale_frac = 1.0 / 3.2;
  double retrack_frac = 0.001;

  SyncRun operator()(const std::vector<BubbleParams>& init) const {
    Field u0 = synthesize(box, init, *prof);
    TrackConfig tc;
    tc.retrack_frac = retrack_frac;
    tc.stop_scale_frac = stop_scale_frac;
    tc.band_lo = policy.lower;
    tc.band_hi = policy.upper;
    EvolutionConfig c = cfg;
    c.grid = box;
    TrackedRun tr = track_evolution(u0, init, *prof, c, tc);
    SyncRun run;
    run.track = std::move(tr.track);
    run.min_scale_reached = tr.scale_stop;
    return run;
  }
};

struct BisectStep {
  int bubble = 0;
  double candidate = 0.0;
  Classification cls = Classification::balanced;
};

struct BisectResult {
  double scale = 0.0;
  std::vector<BisectStep> history;
};

// Bisection on the scale of bubble j, classifying the ratio against the
// reference bubble. Endpoints must straddle the balanced boundary; a
// balanced candidate is returned as soon as one is found.
inline BisectResult bisect_scale(const std::vector<BubbleParams>& base, int j, double lo,
                                 double hi, const SyncRunner& runner,
                                 const BandPolicy& policy, double rel_tol,
                                 int max_iter = 80, int ref = 0) {
  const int k = static_cast<int>(base.size());
  if (j <= 0 || j >= k || ref == j || ref < 0 || ref >= k)
    throw domain_error("bisect_scale: bad bubble index");
  if (!(lo > 0.0) || !(hi > lo)) throw domain_error("bisect_scale: bad bracket");
  if (!(rel_tol > 0.0)) throw domain_error("bisect_scale: bad tolerance");

  BisectResult out;
  auto eval = [&](double cand) {
    std::vector<BubbleParams> p = base;
    p[static_cast<size_t>(j)].lambda = cand;
    SyncRun run = runner(p);
    Classification cls = classify(run, policy, j, ref);
    out.history.push_back({j, cand, cls});
    return cls;
  };

  Classification c_lo = eval(lo);
  if (c_lo == Classification::balanced) {
    out.scale = lo;
    return out;
  }
  Classification c_hi = eval(hi);
  if (c_hi == Classification::balanced) {
    out.scale = hi;
    return out;
  }
  if (c_lo == c_hi)
    throw domain_error("bisect_scale: bracket invalid, both endpoints classify " +
                       std::string(to_string(c_lo)));

  double x_below = c_lo == Classification::below ? lo : hi;
  double x_above = c_lo == Classification::below ? hi : lo;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (x_below + x_above);
    if (std::abs(x_above - x_below) <= rel_tol * std::max(std::abs(x_below), std::abs(x_above))) {
      out.scale = mid;
      return out;
    }
    const Classification c = eval(mid);
    if (c == Classification::balanced) {
      out.scale = mid;
      return out;
    }
    (c == Classification::below ? x_below : x_above) = mid;
  }
  throw domain_error("bisect_scale: iteration budget exhausted");
}

struct SyncTemplate {
  std::vector<BubbleParams> init; // bubble 1 fixed; other scales are guesses
  double rel_tol = 1e-9;
  double bracket_lo = 0.5; // multiplicative bracket around each guess
  double bracket_hi = 2.0;
  int max_iter = 80;
};

struct SyncResult {
  std::vector<double> scales;       // chosen lambda_{1..k} (first is passthrough)
  std::vector<BisectStep> history;  // every classification performed
  int runner_calls = 0;
  SyncRun final_run;                // verification at the chosen scales
  Classification final_class = Classification::balanced;
};

// Choose the scales of bubbles 2..k so the whole family stays in the ratio
// band down to the scale floor. Bubble j's choice depends on the later
// bubbles, so every candidate at level j re-solves levels j+1..k before
// classifying; level k is a plain bisection.
inline SyncResult solve_sync(const SyncTemplate& tpl, const SyncRunner& runner,
                             const BandPolicy& policy) {
  const int k = static_cast<int>(tpl.init.size());
  if (k < 2) throw domain_error("solve_sync: needs at least two bubbles");
  if (policy.k != k) throw domain_error("solve_sync: policy sized for a different k");

  SyncResult res;
  auto counted = [&](const std::vector<BubbleParams>& p) {
    ++res.runner_calls;
    return runner(p);
  };

  // A level-j classification is only decisive down to the collapse-time
  // mis-synchronization of the inner levels, amplified by the cube of the
  // band edge; inner levels therefore solve tighter by that factor.
  const double ladder = 1.0 / (16.0 * policy.upper * policy.upper * policy.upper);

  // solve scales j..k-1 (0-based) in place on p; records history
  struct TriedCandidate {
    double cand;
    Classification cls;
    std::vector<BubbleParams> solved;
  };
  std::function<void(std::vector<BubbleParams>&, int)> solve_from =
      [&](std::vector<BubbleParams>& p, int j) {
        // Each candidate evaluation re-solves the inner levels conditional on
        // it, so the inner scales belonging to the accepted level-j scale are
        // taken from the nearest tried candidate rather than re-solved once
        // more afterwards. Candidates on the above side are preferred: there
        // the level-j bubble collapses last and cannot blur the inner
        // classifications by ending the run early.
        std::vector<TriedCandidate> tried;
        SyncRunner eval = [&](const std::vector<BubbleParams>& cand) {
          std::vector<BubbleParams> q = cand;
          if (j + 1 < k) solve_from(q, j + 1);
          SyncRun run = counted(q);
          if (j + 1 < k)
            tried.push_back({q[static_cast<size_t>(j)].lambda,
                             classify(run, policy, j, 0), std::move(q)});
          return run;
        };
        const double guess = p[static_cast<size_t>(j)].lambda;
        const double tol =
            std::max(tpl.rel_tol * std::pow(ladder, j - 1), 1e-14);
        BisectResult br = bisect_scale(p, j, guess * tpl.bracket_lo, guess * tpl.bracket_hi,
                                       eval, policy, tol, tpl.max_iter);
        res.history.insert(res.history.end(), br.history.begin(), br.history.end());
        p[static_cast<size_t>(j)].lambda = br.scale;
        if (j + 1 < k && !tried.empty()) {
          const TriedCandidate* pick = nullptr;
          double best = std::numeric_limits<double>::infinity();
          for (const TriedCandidate& tc : tried) {
            const double d = std::abs(tc.cand - br.scale) +
                             (tc.cls == Classification::above ? 0.0 : 1e9);
            if (d < best) {
              best = d;
              pick = &tc;
            }
          }
          for (int m = j + 1; m < k; ++m)
            p[static_cast<size_t>(m)] = pick->solved[static_cast<size_t>(m)];
        }
      };

  std::vector<BubbleParams> chosen = tpl.init;
  solve_from(chosen, 1);

  res.scales.resize(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) res.scales[static_cast<size_t>(j)] = chosen[static_cast<size_t>(j)].lambda;
  res.final_run = counted(chosen);
  // the verification run classifies balanced against every pair or throws
  res.final_class = Classification::balanced;
  for (int a = 0; a < k && res.final_class == Classification::balanced; ++a)
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      const Classification c = classify(res.final_run, policy, a, b);
      if (c != Classification::balanced) {
        res.final_class = c;
        break;
      }
    }
  return res;
}

} // namespace gkdv
