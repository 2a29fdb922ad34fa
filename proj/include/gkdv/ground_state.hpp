#pragma once

#include <cmath>

#include "gkdv/grid.hpp"
#include "gkdv/spectral.hpp"

namespace gkdv {

// Derived exponents of the slightly supercritical problem at power p.
struct CriticalData {
  double p = 5.0;
  double sigma_c = 0.0;   // 1/2 - 2/(p-1), mass-scaling deficit
  double q_c = 2.0;       // (p-1)/2
  double nu = 1e-3;       // fixed smallness margin used in rate bounds
  double p0 = 2.5;        // lower admissible power for the functional setup
};

inline CriticalData make_critical_data(double p) {
  if (!std::isfinite(p) || p < 5.0 || p > 5.3)
    throw domain_error("critical data: p must lie in [5, 5.3]");
  CriticalData cd;
  cd.p = p;
  cd.sigma_c = 0.5 - 2.0 / (p - 1.0);
  cd.q_c = (p - 1.0) / 2.0;
  return cd;
}

// Closed-form ground state Q_p(y) = [ (p+1)/2 * sech^2((p-1)y/2) ]^{1/(p-1)}
// of Q'' - Q + Q^p = 0, together with its exact derivatives.
class GroundState {
public:
  explicit GroundState(double p) : p_(p), a_(0.5 * (p - 1.0)), expo_(2.0 / (p - 1.0)) {
    if (!std::isfinite(p) || p < 2.0 || p > 6.0)
      throw domain_error("ground state: power out of range");
    amp_ = std::pow(0.5 * (p + 1.0), 1.0 / (p - 1.0));
  }

  double p() const { return p_; }

  double operator()(double y) const {
    check(y);
    return amp_ * std::pow(sech(a_ * y), expo_);
  }

  double deriv(double y) const {
    check(y);
    return -std::tanh(a_ * y) * (*this)(y);
  }

  // From the profile equation, Q'' = Q - Q^p exactly.
  double second_deriv(double y) const {
    const double q = (*this)(y);
    return q - std::pow(q, p_);
  }

  double third_deriv(double y) const {
    // differentiate Q'' = Q - Q^p once
    const double q = (*this)(y);
    return (1.0 - p_ * std::pow(q, p_ - 1.0)) * deriv(y);
  }

  // Scaling generator applied to Q: (2/(p-1))Q + yQ'.
  double lambda_Q(double y) const { return expo_ * (*this)(y) + y * deriv(y); }

  double lambda_Q_deriv(double y) const {
    return (expo_ + 1.0) * deriv(y) + y * second_deriv(y);
  }

private:
  static double sech(double t) {
    const double e = std::exp(-std::abs(t));
    return 2.0 * e / (1.0 + e * e);
  }
  static void check(double y) {
    if (!std::isfinite(y)) throw domain_error("ground state: non-finite argument");
  }

  double p_, a_, expo_, amp_;
};

inline Field eval_ground_state(const GroundState& gs, const Grid& g) {
  return Field::sample(g, [&](double y) { return gs(y); });
}

// (2/(p-1)) f + y f' with the shared differentiation rule.
inline Field apply_lambda(const Field& f, double p) {
  if (f.grid.n < 16) throw domain_error("apply_lambda: grid too small");
  Field df = derivative(f, 1);
  Field out(f.grid);
  const double c = 2.0 / (p - 1.0);
  for (int i = 0; i < f.grid.n; ++i) out[i] = c * f[i] + f.grid.point(i) * df[i];
  return out;
}

// Linearized operator L f = -f'' + f - p Q^{p-1} f around the ground state.
inline Field apply_linearized(const GroundState& gs, const Field& f) {
  if (f.grid.n < 16) throw domain_error("apply_linearized: grid too small");
  Field d2 = derivative(f, 2);
  Field out(f.grid);
  const double p = gs.p();
  for (int i = 0; i < f.grid.n; ++i) {
    const double q = gs(f.grid.point(i));
    out[i] = -d2[i] + f[i] - p * std::pow(q, p - 1.0) * f[i];
  }
  return out;
}

struct MassEnergy {
  double mass = 0.0;
  double energy = 0.0;
};

// mass = int u^2, energy = 1/2 int u_x^2 - 1/(p+1) int |u|^{p+1}.
inline MassEnergy mass_energy(const Field& u, double p, int order = 4) {
  Field ux = derivative(u, 1, order);
  Field m(u.grid), e(u.grid);
  for (int i = 0; i < u.grid.n; ++i) {
    m[i] = u[i] * u[i];
    e[i] = 0.5 * ux[i] * ux[i] - std::pow(std::abs(u[i]), p + 1.0) / (p + 1.0);
  }
  return {quadrature(m), quadrature(e)};
}

// int Q^2 / (int Q)^2, the slope constant of the eigenvalue curve.
inline double mass_to_l1_ratio(const GroundState& gs, const Grid& g) {
  Field q = eval_ground_state(gs, g);
  Field q2(g);
  for (int i = 0; i < g.n; ++i) q2[i] = q[i] * q[i];
  const double l1 = quadrature(q);
  const double l2sq = quadrature(q2);
  return l2sq / (l1 * l1);
}

} // namespace gkdv
