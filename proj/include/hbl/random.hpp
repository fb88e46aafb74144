#pragma once

// Seeded band-limited random fields for test inputs and experiments.

#include "hbl/spectral.hpp"

#include <cstdint>
#include <random>

namespace hbl {

/// Random complex matrix field whose Fourier modes satisfy |k| <= band in
/// every real direction. With `hermitian` the pointwise Hermitian part is
/// returned. Coefficients are standard complex normals; no normalisation.
inline GridField random_band_limited(const Grid& grid, int rank, std::uint64_t seed, int band,
                                     bool hermitian) {
  if (band < 0 || 2 * band >= grid.N) throw ConfigError("band must satisfy 0 <= band < N/2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GridField coeffs(grid, rank);
  const std::size_t P = grid.points();
  // Modes are drawn in point order so the stream is independent of rank layout.
  for (std::size_t p = 0; p < P; ++p) {
    bool inside = true;
    for (int d = 0; d < grid.real_dims() && inside; ++d) {
      const int i = grid.index(p, d);
      const int w = (2 * i < grid.N) ? i : i - grid.N;
      if (std::abs(w) > band) inside = false;
    }
    if (!inside) continue;
    for (int e = 0; e < rank * rank; ++e) {
      const double re = normal(rng);
      const double im = normal(rng);
      coeffs.data()[e * P + p] = Complex(re, im);
    }
  }
  detail::plans_for(grid, rank * rank).backward(coeffs.data());
  if (hermitian) {
    GridField adj = coeffs.adjoint();
    coeffs += adj;
    coeffs *= Complex(0.5);
  }
  return coeffs;
}

/// Random constant matrix with standard complex normal entries.
inline Mat random_matrix(int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rank, rank);
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < rank; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = Complex(re, im);
    }
  return m;
}

inline Mat random_hermitian_matrix(int rank, std::mt19937_64& rng) {
  const Mat a = random_matrix(rank, rng);
  return 0.5 * (a + a.adjoint());
}

}  // namespace hbl
