#pragma once

// The fixed geometric stage: a flat complex torus C^n / (Z + iZ)^n sampled on
// an N^{2n} grid, a constant Kaehler form and the model bundle
// E = L^m (x) O^r with central background curvature.
//
// Coordinate convention: z^a = x^a + i y^a, so dz^a ^ dzbar^a = -2i dx^a ^ dy^a
// and i dz^a ^ dzbar^a = 2 dx^a ^ dy^a. With g = Id the volume of the torus is 2^n.

#include "hbl/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace hbl {

/// Periodic grid over the 2n real coordinates (x^1, y^1, ..., x^n, y^n),
/// row-major with the last coordinate fastest.
struct Grid {
  int n = 2;   ///< complex dimension
  int N = 16;  ///< points per real dimension

  int real_dims() const { return 2 * n; }

  std::size_t points() const {
    std::size_t p = 1;
    for (int d = 0; d < real_dims(); ++d) p *= static_cast<std::size_t>(N);
    return p;
  }

  /// Integer index of point `p` along real dimension `d`.
  int index(std::size_t p, int d) const {
    const int shift = real_dims() - 1 - d;
    for (int s = 0; s < shift; ++s) p /= static_cast<std::size_t>(N);
    return static_cast<int>(p % static_cast<std::size_t>(N));
  }

  double coordinate(std::size_t p, int d) const {
    return static_cast<double>(index(p, d)) / N;
  }

  /// Point index of the grid point shifted by `offsets` (periodic).
  std::size_t shifted(std::size_t p, std::span<const int> offsets) const {
    std::size_t out = 0;
    for (int d = 0; d < real_dims(); ++d) {
      int i = index(p, d) + offsets[d];
      i = ((i % N) + N) % N;
      out = out * N + static_cast<std::size_t>(i);
    }
    return out;
  }

  void validate() const {
    if (n < 1 || n > 3) throw ConfigError("complex dimension must satisfy 1 <= n <= 3");
    if (!is_power_of_two(N) || N < 4) throw ConfigError("grid size N must be a power of two >= 4");
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct Background {
  Grid grid;
  int rank = 1;        ///< r
  int level = 0;       ///< m, the background Chern level
  Mat kaehler;         ///< g_{a bbar}, n x n Hermitian positive-definite
  double eps_pd = 1e-10;

  Background() = default;

  Background(int n, int N, int r, int m)
      : grid{n, N}, rank(r), level(m), kaehler(Mat::Identity(n, n)) {
    validate();
  }

  Background(int n, int N, int r, int m, Mat g)
      : grid{n, N}, rank(r), level(m), kaehler(std::move(g)) {
    validate();
  }

  int n() const { return grid.n; }
  int N() const { return grid.N; }

  void validate() const {
    grid.validate();
    if (rank < 1) throw ConfigError("bundle rank must be >= 1");
    if (kaehler.rows() != grid.n || kaehler.cols() != grid.n)
      throw ConfigError("Kaehler coefficient matrix must be n x n");
    if ((kaehler - kaehler.adjoint()).norm() > 1e-12 * (1.0 + kaehler.norm()))
      throw ConfigError("Kaehler coefficients must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(kaehler, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("Kaehler coefficients must be positive-definite");
    if (!(eps_pd > 0.0)) throw ConfigError("eps_pd must be positive");
  }

  /// Same geometry with a different bundle rank / level.
  Background with_bundle(int r, int m) const {
    Background b = *this;
    b.rank = r;
    b.level = m;
    b.validate();
    return b;
  }

  /// Volume of the torus measured by omega^n / n!, equal to 2^n det(g).
  double volume() const {
    return std::ldexp(kaehler.determinant().real(), grid.n);
  }

  bool same_stage(const Background& o) const {
    return grid == o.grid && rank == o.rank && level == o.level &&
           (kaehler - o.kaehler).norm() == 0.0;
  }
};

}  // namespace hbl
