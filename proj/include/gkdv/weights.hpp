#pragma once

#include <algorithm>
#include <cmath>

#include "gkdv/errors.hpp"

namespace gkdv {

// C-infinity step built from the exp(-1/t) bump: 0 for t <= 0, 1 for t >= 1,
// strictly increasing in between, flat to all orders at both ends.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

// Smooth cutoff: 1 on |z| <= 1, 0 on |z| >= 2.
inline double cutoff_chi(double z) { return smooth_step(2.0 - std::abs(z)); }

// Smooth decreasing plateau: 1 for y <= 1, 0 for y >= 2.
inline double eta0(double y) { return smooth_step(2.0 - y); }

namespace detail {

// One cubic Hermite piece on [a,b]; monotone for the endpoint data used
// below (Fritsch-Carlson region).
struct HermiteSegment {
  double a, b, fa, fb, ma, mb;

  double value(double y) const {
    const double h = b - a;
    const double t = (y - a) / h;
    const double t2 = t * t, t3 = t2 * t;
    return fa * (2 * t3 - 3 * t2 + 1) + h * ma * (t3 - 2 * t2 + t) +
           fb * (3 * t2 - 2 * t3) + h * mb * (t3 - t2);
  }

  double deriv(double y) const {
    const double h = b - a;
    const double t = (y - a) / h;
    const double t2 = t * t;
    return fa * (6 * t2 - 6 * t) / h + ma * (3 * t2 - 4 * t + 1) +
           fb * (6 * t - 6 * t2) / h + mb * (3 * t2 - 2 * t);
  }
};

} // namespace detail

// The weight pair (phi, psi) and the plateau eta0 used by the localized
// norm and the Lyapunov functional, plus their B-rescaled forms. phi is
// e^y below -1, 1+y on (-kappa,kappa) and 3 above 1, joined by monotone
// cubics; psi is built from phi by blending to the constant 1 on
// [blend_start, -kappa], which keeps phi <= psi <= (1+3 kappa) phi on
// y <= -kappa by construction.
class Weights {
public:
  explicit Weights(double b_c, double kappa = 0.1) : b_c_(b_c), kappa_(kappa) {
    if (!(b_c > 0.0) || b_c >= 1.0)
      throw domain_error("weights: b_c must lie in (0,1)");
    if (!(kappa > 0.0) || kappa >= 0.5)
      throw domain_error("weights: kappa must lie in (0,1/2)");
    B_ = std::pow(b_c, -0.05);
    const double e1 = std::exp(-1.0);
    left_ = {-1.0, -kappa_, e1, 1.0 - kappa_, e1, 1.0};
    right_ = {kappa_, 1.0, 1.0 + kappa_, 3.0, 1.0, 0.0};
    blend_start_ = -std::max(0.45, kappa_ + 0.1);
  }

  double b_c() const { return b_c_; }
  double kappa() const { return kappa_; }
  double B() const { return B_; }

  double phi(double y) const {
    if (y <= -1.0) return std::exp(y);
    if (y < -kappa_) return left_.value(y);
    if (y <= kappa_) return 1.0 + y;
    if (y < 1.0) return right_.value(y);
    return 3.0;
  }

  double phi_deriv(double y) const {
    if (y <= -1.0) return std::exp(y);
    if (y < -kappa_) return left_.deriv(y);
    if (y <= kappa_) return 1.0;
    if (y < 1.0) return right_.deriv(y);
    return 0.0;
  }

  double psi(double y) const {
    if (y >= -kappa_) return 1.0;
    if (y <= blend_start_) return phi(y);
    const double w = smooth_step((y - blend_start_) / (-kappa_ - blend_start_));
    const double p = phi(y);
    return p + w * (1.0 - p);
  }

  double eta(double y) const { return eta0(y); }

  double phi_B(double y) const { return phi(y / B_); }
  double phi_B_deriv(double y) const { return phi_deriv(y / B_) / B_; }
  double psi_B(double y) const {
    return psi(y / B_) * eta0(std::pow(b_c_, 10.0) * y);
  }
  double zeta_B(double y) const { return phi_B(y) * eta0(y / (B_ * B_)); }

private:
  double b_c_, kappa_, B_, blend_start_;
  detail::HermiteSegment left_, right_;
};

} // namespace gkdv
