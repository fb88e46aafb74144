#pragma once

// Fourier differentiation on the periodic grid.
//
// d/dz^a    = (d/dx^a - i d/dy^a) / 2  ->  multiplier  pi i k_x + pi k_y
// d/dzbar^a = (d/dx^a + i d/dy^a) / 2  ->  multiplier  pi i k_x - pi k_y
// with integer wavenumbers k; the Nyquist mode is dropped so every first
// derivative is odd in k and all multipliers commute.

#include "hbl/grid_field.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace hbl {

namespace detail {

class FftPlans {
public:
  FftPlans(const Grid& grid, int howmany) : points_(grid.points()) {
    std::vector<int> dims(grid.real_dims(), grid.N);
    const std::size_t total = points_ * static_cast<std::size_t>(howmany);
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
    // ESTIMATE keeps plan selection (and hence rounding) reproducible run to run.
    const unsigned flags = FFTW_ESTIMATE;
    const int dist = static_cast<int>(points_);
    forward_ = fftw_plan_many_dft(grid.real_dims(), dims.data(), howmany, buf, nullptr, 1, dist,
                                  buf, nullptr, 1, dist, FFTW_FORWARD, flags);
    backward_ = fftw_plan_many_dft(grid.real_dims(), dims.data(), howmany, buf, nullptr, 1, dist,
                                   buf, nullptr, 1, dist, FFTW_BACKWARD, flags);
    fftw_free(buf);
    if (!forward_ || !backward_) throw Error("FFTW planning failed");
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  void forward(Complex* data) const {
    auto* d = aligned(data);
    fftw_execute_dft(forward_, d, d);
  }
  /// Unnormalised inverse transform.
  void backward(Complex* data) const {
    auto* d = aligned(data);
    fftw_execute_dft(backward_, d, d);
  }

private:
  static fftw_complex* aligned(Complex* data) {
    auto* d = reinterpret_cast<fftw_complex*>(data);
    if (fftw_alignment_of(reinterpret_cast<double*>(d)) != 0) throw Error("FFT buffer is not SIMD-aligned");
    return d;
  }

  std::size_t points_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

// FFTW planning is not thread-safe; execution of an existing plan is.
inline const FftPlans& plans_for(const Grid& grid, int howmany) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<FftPlans>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{grid.n, grid.N, howmany}];
  if (!slot) slot = std::make_unique<FftPlans>(grid, howmany);
  return *slot;
}

/// Per-point signed wavenumber along each real dimension, Nyquist zeroed.
inline const std::vector<std::vector<double>>& wavenumbers(const Grid& grid) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::vector<std::vector<double>>> cache;
  std::lock_guard lock(mutex);
  auto& k = cache[{grid.n, grid.N}];
  if (k.empty()) {
    k.assign(grid.real_dims(), std::vector<double>(grid.points()));
    for (std::size_t p = 0; p < grid.points(); ++p)
      for (int d = 0; d < grid.real_dims(); ++d) {
        const int i = grid.index(p, d);
        double w = 0.0;
        if (2 * i < grid.N) w = i;
        else if (2 * i > grid.N) w = i - grid.N;
        k[d][p] = w;
      }
  }
  return k;
}

}  // namespace detail

/// Fourier coefficients of every entry of a field (forward transform / N^{2n}).
class Spectrum {
public:
  explicit Spectrum(const GridField& f) : coeffs_(f) {
    detail::plans_for(f.grid(), f.rank() * f.rank()).forward(coeffs_.data());
  }

  /// factor * d/dz^a of the sampled field.
  GridField del(int a, double factor = 1.0) const { return apply(a, +1.0, factor); }
  /// factor * d/dzbar^a of the sampled field.
  GridField dbar(int a, double factor = 1.0) const { return apply(a, -1.0, factor); }

private:
  // coeffs_ holds the unnormalised forward transform; 1/N^{2n} goes into the multiplier.
  GridField apply(int a, double ysign, double factor) const {
    const Grid& grid = coeffs_.grid();
    if (a < 0 || a >= grid.n) throw ConfigError("derivative direction out of range");
    const auto& k = detail::wavenumbers(grid);
    const auto& kx = k[2 * a];
    const auto& ky = k[2 * a + 1];
    GridField out = GridField::uninitialized(grid, coeffs_.rank());
    const std::size_t P = coeffs_.points();
    const double s = pi * factor / static_cast<double>(P);
    const int entries = coeffs_.rank() * coeffs_.rank();
    for (int e = 0; e < entries; ++e) {
      const Complex* src = coeffs_.data() + e * P;
      Complex* dst = out.data() + e * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] = Complex(ysign * s * ky[p], s * kx[p]) * src[p];
    }
    detail::plans_for(grid, entries).backward(out.data());
    return out;
  }

  GridField coeffs_;
};

/// Keeps only Fourier modes with |k| <= band in every real direction.
inline GridField band_limit(const GridField& f, int band) {
  GridField c(f);
  const auto& plans = detail::plans_for(f.grid(), f.rank() * f.rank());
  plans.forward(c.data());
  const std::size_t P = f.points();
  const int N = f.grid().N;
  for (std::size_t p = 0; p < P; ++p) {
    bool keep = true;
    for (int d = 0; d < f.grid().real_dims(); ++d) {
      const int i = f.grid().index(p, d);
      const int w = (2 * i <= N) ? i : i - N;
      if (std::abs(w) > band || (2 * i == N)) keep = false;
    }
    if (!keep)
      for (int e = 0; e < f.rank() * f.rank(); ++e) c.data()[e * P + p] = 0.0;
  }
  plans.backward(c.data());
  c *= Complex(1.0 / static_cast<double>(P));
  return c;
}

}  // namespace hbl
