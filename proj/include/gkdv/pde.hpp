#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gkdv/grid.hpp"
#include "gkdv/ground_state.hpp"
#include "gkdv/spectral.hpp"
#include "gkdv/weights.hpp"

namespace gkdv {

// Pseudospectral evolution of u_t + (u_xx + u|u|^{p-1})_x = 0 on a periodic
// box. The dispersion is integrated exactly in Fourier space (multiplier
// e^{i k^3 dt}); the nonlinear flux is advanced with classical RK4 on the
// integrating-factor variable, de-aliased by the 2/3 rule.

enum class EvolveStatus { completed, blow_up_detected, min_scale_reached, gradient_cap_reached };

inline const char* to_string(EvolveStatus s) {
  switch (s) {
    case EvolveStatus::completed: return "completed";
    case EvolveStatus::blow_up_detected: return "blow-up-detected";
    case EvolveStatus::min_scale_reached: return "min-scale-reached";
    case EvolveStatus::gradient_cap_reached: return "gradient-cap-reached";
  }
  return "unknown";
}

struct EvolutionConfig {
  double p = 5.0;
  Grid grid;
  double t_end = 1.0;
  double fixed_dt = 0.0;     // > 0 selects fixed steps, otherwise adaptive
  double safety = 0.5;       // adaptive step safety factor, in (0,1]
  double min_scale = 0.0;    // stop once the bubble scale estimate drops below (0 = off)
  double gradient_cap = 0.0; // stop once ||u_x||_{L2} exceeds this (0 = off)
  int diag_stride = 8;       // diagnostics every this many steps
  int observer_stride = 8;   // observer callbacks every this many steps
  long max_steps = 20000000;
  bool linear_only = false;  // test hook: keep only the dispersive term
  bool sponge = false;       // damping collar against radiation wrap-around
  double sponge_width_frac = 0.05;
  double sponge_strength = 1.0;
};

struct DiagnosticsSample {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double e2 = 0.0; // int u_xx^2 - (5p/3) int u_x^2 |u|^{p-1}
  double grad_norm = 0.0;
};

struct EvolveResult {
  EvolveStatus status = EvolveStatus::completed;
  bool partial = false; // an observer threw; series truncated, status not meaningful
  std::string observer_error;
  std::vector<DiagnosticsSample> series;
  double t_final = 0.0;
  long steps = 0;
  Field u_final;
};

using Observer = std::function<void(double t, const Field& u)>;

// Mass, energy, pseudo-energy E2 and gradient norm of a state. Periodic
// grids use spectral derivatives, bounded grids one-sided finite differences.
inline DiagnosticsSample invariants(const Field& u, double p) {
  DiagnosticsSample s;
  const Grid& g = u.grid;
  Field ux = derivative(u, 1, 6);
  Field uxx = derivative(u, 2, 6);
  Field m(g), en(g), e2(g), gr(g);
  for (int i = 0; i < g.n; ++i) {
    const double v = u[i], v1 = ux[i], v2 = uxx[i];
    const double av = std::abs(v);
    m[i] = v * v;
    en[i] = 0.5 * v1 * v1 - std::pow(av, p + 1.0) / (p + 1.0);
    e2[i] = v2 * v2 - (5.0 * p / 3.0) * v1 * v1 * std::pow(av, p - 1.0);
    gr[i] = v1 * v1;
  }
  s.mass = quadrature(m);
  s.energy = quadrature(en);
  s.e2 = quadrature(e2);
  s.grad_norm = std::sqrt(quadrature(gr));
  return s;
}

// Bubble scale from the peak height: u ~ lambda^{-2/(p-1)} Q(./lambda) gives
// lambda = (Q(0)/max|u|)^{(p-1)/2}.
inline double scale_estimate(double umax, double p) {
  const double q0 = std::pow(0.5 * (p + 1.0), 1.0 / (p - 1.0));
  if (!(umax > 0.0)) return std::numeric_limits<double>::infinity();
  return std::pow(q0 / umax, 0.5 * (p - 1.0));
}

class Stepper {
 public:
  Stepper(const Grid& grid, double p, bool linear_only = false)
      : ws_(grid), p_(p), linear_only_(linear_only), n_(grid.n), nk_(grid.n / 2 + 1) {
    if (!(p >= 2.0 && p <= 6.0)) throw domain_error("Stepper: exponent out of range");
    k_.resize(static_cast<size_t>(nk_));
    mask_.resize(static_cast<size_t>(nk_));
    for (int j = 0; j < nk_; ++j) {
      k_[static_cast<size_t>(j)] = ws_.wavenumber(j);
      mask_[static_cast<size_t>(j)] = (3 * j <= n_) ? 1.0 : 0.0; // keep |k| <= (2/3) k_max
    }
    uhat_.resize(static_cast<size_t>(nk_));
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &stage_, &zhat_}) v->resize(static_cast<size_t>(nk_));
    phys_.resize(static_cast<size_t>(n_));
    nl_.resize(static_cast<size_t>(n_));
  }
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  void set_state(const Field& u) {
    if (!(u.grid == ws_.grid())) throw domain_error("Stepper: field grid mismatch");
    ws_.forward(u.values.data(), uhat_.data());
    for (size_t j = 0; j < uhat_.size(); ++j) uhat_[j] *= mask_[j];
  }

  Field state() {
    Field out(ws_.grid());
    ws_.backward(uhat_.data(), out.values.data());
    return out;
  }

  // Physical state refreshed from the spectrum; also caches max|u|.
  const std::vector<double>& physical() {
    ws_.backward(uhat_.data(), phys_.data());
    umax_ = 0.0;
    for (double v : phys_) umax_ = std::max(umax_, std::abs(v));
    return phys_;
  }
  double max_abs() const { return umax_; }

  // One RK4 step of size dt on the integrating-factor variable, with the
  // dispersion applied exactly through e^{i k^3 dt}.
  void step(double dt) {
    const size_t nk = static_cast<size_t>(nk_);
    prop_full_.resize(nk);
    prop_half_.resize(nk);
    for (size_t j = 0; j < nk; ++j) {
      const double th = k_[j] * k_[j] * k_[j];
      prop_full_[j] = std::polar(1.0, th * dt);
      prop_half_[j] = std::polar(1.0, th * dt * 0.5);
    }
    const auto& E = prop_full_;
    const auto& E2 = prop_half_;
    nonlinear(uhat_, k1_);
    for (size_t j = 0; j < nk; ++j) stage_[j] = E2[j] * (uhat_[j] + 0.5 * dt * k1_[j]);
    nonlinear(stage_, k2_);
    for (size_t j = 0; j < nk; ++j) stage_[j] = E2[j] * uhat_[j] + 0.5 * dt * k2_[j];
    nonlinear(stage_, k3_);
    for (size_t j = 0; j < nk; ++j) stage_[j] = E[j] * uhat_[j] + dt * E2[j] * k3_[j];
    nonlinear(stage_, k4_);
    for (size_t j = 0; j < nk; ++j)
      uhat_[j] = E[j] * uhat_[j] +
                 dt / 6.0 * (E[j] * k1_[j] + 2.0 * E2[j] * (k2_[j] + k3_[j]) + k4_[j]);
  }

  // Pointwise damping collar, applied between steps when the sponge is on.
  void damp(const std::vector<double>& sigma, double dt) {
    ws_.backward(uhat_.data(), phys_.data());
    for (size_t i = 0; i < phys_.size(); ++i) phys_[i] *= std::exp(-sigma[i] * dt);
    ws_.forward(phys_.data(), uhat_.data());
    for (size_t j = 0; j < uhat_.size(); ++j) uhat_[j] *= mask_[j];
  }

  // ||u_x||_{L2} straight from the spectrum by Parseval; cheap enough to
  // evaluate every step for the gradient-cap stop rule.
  double grad_norm() const {
    const double L = ws_.grid().length();
    double s = 0.0;
    for (int j = 0; j < nk_; ++j) {
      const double kj = k_[static_cast<size_t>(j)];
      const double wgt = (j == 0 || 2 * j == n_) ? 1.0 : 2.0;
      s += wgt * kj * kj * std::norm(uhat_[static_cast<size_t>(j)]);
    }
    return std::sqrt(L * s) / n_;
  }

  const Grid& grid() const { return ws_.grid(); }
  double exponent() const { return p_; }

 private:
  // G(uhat) = -ik F[sign(u)|u|^p], de-aliased; zero under the linear-only hook.
  void nonlinear(const std::vector<std::complex<double>>& spec,
                 std::vector<std::complex<double>>& out) {
    if (linear_only_) {
      std::fill(out.begin(), out.end(), std::complex<double>(0.0, 0.0));
      return;
    }
    ws_.backward(spec.data(), phys_.data());
    for (size_t i = 0; i < phys_.size(); ++i) {
      const double v = phys_[i];
      nl_[i] = std::copysign(std::pow(std::abs(v), p_), v);
    }
    ws_.forward(nl_.data(), zhat_.data());
    for (int j = 0; j < nk_; ++j)
      out[static_cast<size_t>(j)] = std::complex<double>(0.0, -k_[static_cast<size_t>(j)]) *
                                    zhat_[static_cast<size_t>(j)] *
                                    mask_[static_cast<size_t>(j)];
  }

  SpectralWorkspace ws_;
  double p_;
  bool linear_only_;
  int n_, nk_;
  std::vector<double> k_, mask_;
  std::vector<std::complex<double>> uhat_, k1_, k2_, k3_, k4_, stage_, zhat_, prop_full_,
      prop_half_;
  std::vector<double> phys_, nl_;
  double umax_ = 0.0;
};

// Single step on a field; convenience wrapper over Stepper.
inline Field step(const Field& u, double dt, double p, bool linear_only = false) {
  if (!(dt > 0.0)) throw domain_error("step: dt must be positive");
  Stepper st(u.grid, p, linear_only);
  st.set_state(u);
  st.step(dt);
  return st.state();
}

namespace detail {

// Stability limit of the explicit nonlinear stage: frozen-coefficient
// advection at speed p max|u|^{p-1} through the retained modes gives
// dt <= 2.83 / (c (2/3) pi / h) = 1.35 h / c.
inline double advective_dt(double h, double p, double umax) {
  const double c = 1.0 + p * std::pow(umax, p - 1.0);
  return 1.35 * h / c;
}

} // namespace detail

inline EvolveResult evolve(const Field& u0, const EvolutionConfig& cfg,
                           const std::vector<Observer>& observers = {}) {
  if (!(u0.grid == cfg.grid)) throw domain_error("evolve: u0 not on cfg.grid");
  if (!cfg.grid.periodic) throw domain_error("evolve: periodic grid required");
  if (!(cfg.t_end > 0.0)) throw domain_error("evolve: t_end must be positive");
  if (cfg.fixed_dt < 0.0) throw domain_error("evolve: fixed_dt must be >= 0");
  if (cfg.fixed_dt == 0.0 && !(cfg.safety > 0.0 && cfg.safety <= 1.0))
    throw domain_error("evolve: safety factor must lie in (0,1]");
  if (cfg.diag_stride < 1 || cfg.observer_stride < 1)
    throw domain_error("evolve: strides must be >= 1");
  if (cfg.sponge && !(cfg.sponge_width_frac > 0.0 && cfg.sponge_width_frac <= 0.05))
    throw domain_error("evolve: sponge collar width must be in (0, 5%] of the box");

  Stepper st(cfg.grid, cfg.p, cfg.linear_only);
  st.set_state(u0);

  EvolveResult out;
  out.series.push_back(invariants(u0, cfg.p));
  out.series.back().t = 0.0;
  if (cfg.gradient_cap > 0.0 && out.series.back().grad_norm >= cfg.gradient_cap)
    throw domain_error("evolve: gradient cap must exceed the initial gradient norm");

  std::vector<double> sigma;
  if (cfg.sponge) {
    const double L = cfg.grid.length();
    const double w = cfg.sponge_width_frac * L;
    sigma.resize(static_cast<size_t>(cfg.grid.n));
    for (int i = 0; i < cfg.grid.n; ++i) {
      const double x = cfg.grid.point(i);
      const double edge = std::min(x - cfg.grid.x_min, cfg.grid.x_max - x);
      sigma[static_cast<size_t>(i)] = cfg.sponge_strength * (1.0 - smooth_step(edge / w));
    }
  }

  const double h = cfg.grid.h();
  double t = 0.0;
  long steps = 0;
  EvolveStatus status = EvolveStatus::completed;

  auto run_observers = [&](const Field& u) -> bool {
    for (const auto& ob : observers) {
      try {
        ob(t, u);
      } catch (const std::exception& e) {
        out.partial = true;
        out.observer_error = e.what();
        return false;
      }
    }
    return true;
  };

  if (!observers.empty() && !run_observers(u0)) {
    out.status = status;
    out.t_final = t;
    out.steps = steps;
    out.u_final = u0;
    return out;
  }

  while (true) {
    st.physical();
    const double umax = st.max_abs();
    if (!std::isfinite(umax)) {
      status = EvolveStatus::blow_up_detected;
      break;
    }
    if (cfg.min_scale > 0.0 && scale_estimate(umax, cfg.p) <= cfg.min_scale) {
      status = EvolveStatus::min_scale_reached;
      break;
    }
    if (cfg.gradient_cap > 0.0 && st.grad_norm() >= cfg.gradient_cap) {
      status = EvolveStatus::gradient_cap_reached;
      break;
    }
    if (t >= cfg.t_end * (1.0 - 1e-14)) {
      status = EvolveStatus::completed;
      break;
    }
    if (steps >= cfg.max_steps)
      throw domain_error("evolve: step budget exhausted before any stop rule");

    double dt = cfg.fixed_dt > 0.0 ? cfg.fixed_dt
                                   : cfg.safety * detail::advective_dt(h, cfg.p, umax);
    dt = std::min(dt, cfg.t_end - t);
    st.step(dt);
    if (cfg.sponge) st.damp(sigma, dt);
    t += dt;
    ++steps;

    const bool at_end = t >= cfg.t_end * (1.0 - 1e-14);
    const bool diag_due = (steps % cfg.diag_stride == 0) || at_end;
    const bool obs_due = !observers.empty() && ((steps % cfg.observer_stride == 0) || at_end);
    if (diag_due || obs_due) {
      Field cur = st.state();
      bool finite = true;
      for (double v : cur.values)
        if (!std::isfinite(v)) {
          finite = false;
          break;
        }
      if (!finite) {
        status = EvolveStatus::blow_up_detected;
        break;
      }
      if (diag_due) {
        DiagnosticsSample ds = invariants(cur, cfg.p);
        ds.t = t;
        out.series.push_back(ds);
      }
      if (obs_due && !run_observers(cur)) break;
    }
  }

  out.status = status;
  out.t_final = t;
  out.steps = steps;
  out.u_final = st.state();
  return out;
}

} // namespace gkdv
