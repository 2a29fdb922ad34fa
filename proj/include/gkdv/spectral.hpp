#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "gkdv/grid.hpp"

namespace gkdv {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW r2c/c2r plans plus buffers for one periodic grid. Plans use
// FFTW_ESTIMATE only, so identical grids always plan identically and runs
// stay reproducible.
class SpectralWorkspace {
public:
  explicit SpectralWorkspace(const Grid& g) : grid_(g), n_(g.n), nc_(g.n / 2 + 1) {
    if (!g.periodic) throw domain_error("spectral: periodic grid required");
    real_ = fftw_alloc_real(static_cast<size_t>(n_));
    cplx_ = fftw_alloc_complex(static_cast<size_t>(nc_));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(n_, real_, cplx_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(n_, cplx_, real_, FFTW_ESTIMATE);
  }

  ~SpectralWorkspace() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
    }
    fftw_free(real_);
    fftw_free(cplx_);
  }

  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  int modes() const { return nc_; }
  double wavenumber(int j) const { return 2.0 * std::numbers::pi * j / grid_.length(); }

  void forward(const double* u, std::complex<double>* out) {
    for (int i = 0; i < n_; ++i) real_[i] = u[i];
    fftw_execute(fwd_);
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
    for (int j = 0; j < nc_; ++j) out[j] = c[j];
  }

  // Inverse transform including the 1/n normalization.
  void backward(const std::complex<double>* in, double* out) {
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
    for (int j = 0; j < nc_; ++j) c[j] = in[j];
    fftw_execute(bwd_);
    const double scale = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] = real_[i] * scale;
  }

private:
  Grid grid_;
  int n_, nc_;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
};

namespace detail {

// Shared workspace cache for one-shot spectral ops (PDE steppers own theirs).
inline SpectralWorkspace& shared_workspace(const Grid& g) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, double>, std::unique_ptr<SpectralWorkspace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(g.n, g.x_min, g.x_max);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<SpectralWorkspace>(g)).first;
  return *it->second;
}

} // namespace detail

inline std::vector<std::complex<double>> fft(const Field& f) {
  auto& ws = detail::shared_workspace(f.grid);
  std::vector<std::complex<double>> out(static_cast<size_t>(ws.modes()));
  ws.forward(f.values.data(), out.data());
  return out;
}

inline Field ifft(const Grid& g, const std::vector<std::complex<double>>& spec) {
  auto& ws = detail::shared_workspace(g);
  if (static_cast<int>(spec.size()) != ws.modes())
    throw domain_error("ifft: mode count mismatch");
  Field out(g);
  ws.backward(spec.data(), out.values.data());
  return out;
}

inline Field spectral_derivative(const Field& f, int m) {
  auto& ws = detail::shared_workspace(f.grid);
  auto spec = fft(f);
  for (int j = 0; j < ws.modes(); ++j) {
    const std::complex<double> ik(0.0, ws.wavenumber(j));
    std::complex<double> mult = 1.0;
    for (int q = 0; q < m; ++q) mult *= ik;
    spec[static_cast<size_t>(j)] *= mult;
  }
  // The unpaired Nyquist mode has no well-defined odd derivative; drop it.
  if (f.grid.n % 2 == 0 && m % 2 == 1) spec.back() = 0.0;
  return ifft(f.grid, spec);
}

// Differentiation rule shared across the toolkit: spectral on periodic
// grids, centered 4th-order stencils with one-sided closures otherwise.
inline Field derivative(const Field& f, int m, int order = 4) {
  if (f.grid.periodic) return spectral_derivative(f, m);
  return fd_derivative(f, m, order);
}

} // namespace gkdv
