#pragma once

// Independent reference implementations used as test oracles. Nothing here
// shares code with the library's form algebra.

#include "hbl/geometry.hpp"
#include "hbl/random.hpp"

#include <map>
#include <random>
#include <vector>

namespace hbl::testing {

// A differential monomial as a word over symbols: dz^a -> a, dzbar^b -> n + b.
using Word = std::vector<int>;

/// Sorts a word by adjacent transpositions; returns the sign or 0 on a repeat.
inline int bubble_sort(Word& w) {
  int sign = 1;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j + 1 < w.size() - i; ++j) {
      if (w[j] == w[j + 1]) return 0;
      if (w[j] > w[j + 1]) {
        std::swap(w[j], w[j + 1]);
        sign = -sign;
      }
    }
  for (std::size_t j = 0; j + 1 < w.size(); ++j)
    if (w[j] == w[j + 1]) return 0;
  return sign;
}

using WordForm = std::map<Word, Mat>;

inline WordForm to_words(const PointForm& f) {
  WordForm out;
  const int n = f.n();
  for (std::size_t c = 0; c < f.size(); ++c) {
    Word w;
    for (int a = 0; a < n; ++a)
      if (f.layout().holo(c) & (1u << a)) w.push_back(a);
    for (int b = 0; b < n; ++b)
      if (f.layout().anti(c) & (1u << b)) w.push_back(n + b);
    out[w] = f[c];
  }
  return out;
}

/// Wedge of two word forms by concatenation and re-sorting.
inline WordForm word_wedge(const WordForm& a, const WordForm& b, int r) {
  WordForm out;
  for (const auto& [wa, ca] : a)
    for (const auto& [wb, cb] : b) {
      Word w = wa;
      w.insert(w.end(), wb.begin(), wb.end());
      const int s = bubble_sort(w);
      if (s == 0) continue;
      auto it = out.find(w);
      if (it == out.end()) it = out.emplace(w, Mat::Zero(r, r)).first;
      it->second += static_cast<double>(s) * (ca * cb);
    }
  return out;
}

inline double word_distance(const WordForm& a, const WordForm& b) {
  double m = 0.0;
  for (const auto& [w, c] : a) {
    const auto it = b.find(w);
    m = std::max(m, it == b.end() ? c.cwiseAbs().maxCoeff() : (c - it->second).cwiseAbs().maxCoeff());
  }
  for (const auto& [w, c] : b)
    if (!a.count(w)) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

inline PointForm random_point_form(int n, int p, int q, int r, std::mt19937_64& rng) {
  PointForm f(n, p, q, Mat::Zero(r, r));
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = random_matrix(r, rng);
  return f;
}

/// Band-limited random sampled form with components scaled to sup-modulus `amp`.
inline EndForm random_form(const Grid& grid, int r, int p, int q, std::uint64_t seed, int band,
                           double amp = 1.0) {
  EndForm f = zero_form(grid, r, p, q);
  for (std::size_t c = 0; c < f.size(); ++c) {
    GridField g = random_band_limited(grid, r, seed * 1000003u + c, band, false);
    g *= Complex(amp / g.max_abs());
    f[c] = std::move(g);
  }
  return f;
}

inline double max_abs_diff(const EndForm& a, const EndForm& b) { return max_abs(a - b); }

inline double max_abs_diff(const GridField& a, const GridField& b) { return (a - b).max_abs(); }

}  // namespace hbl::testing
