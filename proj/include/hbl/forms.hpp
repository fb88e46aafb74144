#pragma once

// Exterior algebra of End(E)-valued (p,q)-forms on C^n, n <= 3.
//
// A (p,q)-form is stored as its coefficients on ordered multi-indices,
//   f = sum_{I,J} f_{IJ} dz^I ^ dzbar^J,   I = (a_1 < ... < a_p), J = (b_1 < ... < b_q),
// with all holomorphic differentials first. Components are kept in
// lexicographic (I, J) order. The coefficient type is a template parameter:
// GridField for sampled forms, Mat for forms at one point, Complex for
// constant scalar forms such as omega.

#include "hbl/common.hpp"

#include <bit>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

namespace hbl {

using IndexMask = unsigned;

namespace detail {

inline void combos(int n, int p, int start, IndexMask acc, std::vector<IndexMask>& out) {
  if (p == 0) {
    out.push_back(acc);
    return;
  }
  for (int a = start; a <= n - p; ++a) combos(n, p - 1, a + 1, acc | (1u << a), out);
}

}  // namespace detail

/// Ordered p-subsets of {0..n-1} in lexicographic order (empty when p > n).
inline std::vector<IndexMask> ordered_subsets(int n, int p) {
  std::vector<IndexMask> out;
  if (p < 0 || p > n) return out;
  detail::combos(n, p, 0, 0u, out);
  return out;
}

/// Sign of the shuffle that sorts the concatenation (A, B) of two disjoint
/// ordered index sets: (-1)^{#{(a, b) : a in A, b in B, a > b}}.
inline int merge_sign(IndexMask a, IndexMask b) {
  int inversions = 0;
  for (IndexMask rest = a; rest != 0; rest &= rest - 1) {
    const int i = std::countr_zero(rest);
    inversions += std::popcount(b & ((1u << i) - 1u));
  }
  return (inversions & 1) ? -1 : 1;
}

/// Sign of the permutation sorting an arbitrary index sequence; nullopt on repeats.
inline std::optional<std::pair<IndexMask, int>> sort_indices(std::span<const int> idx) {
  IndexMask mask = 0;
  int inversions = 0;
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const IndexMask bit = 1u << idx[s];
    if (mask & bit) return std::nullopt;
    inversions += std::popcount(mask & ~((bit << 1) - 1u));
    mask |= bit;
  }
  return std::make_pair(mask, (inversions & 1) ? -1 : 1);
}

/// Component bookkeeping for one bidegree.
class FormLayout {
public:
  FormLayout() = default;
  FormLayout(int n, int p, int q)
      : n_(n), p_(p), q_(q), holo_(ordered_subsets(n, p)), anti_(ordered_subsets(n, q)) {
    if (n < 1 || n > 3) throw ConfigError("form dimension must satisfy 1 <= n <= 3");
    if (p < 0 || q < 0) throw ConfigError("negative form degree");
    slot_.assign(1u << n, -1);
    for (std::size_t k = 0; k < holo_.size(); ++k) slot_[holo_[k]] = static_cast<int>(k);
    anti_slot_.assign(1u << n, -1);
    for (std::size_t k = 0; k < anti_.size(); ++k) anti_slot_[anti_[k]] = static_cast<int>(k);
  }

  int n() const { return n_; }
  int p() const { return p_; }
  int q() const { return q_; }
  std::size_t size() const { return holo_.size() * anti_.size(); }
  bool is_zero_degree() const { return size() == 0; }

  IndexMask holo(std::size_t c) const { return holo_[c / anti_.size()]; }
  IndexMask anti(std::size_t c) const { return anti_[c % anti_.size()]; }

  /// Component index of ordered masks (I, J); -1 if they do not match the bidegree.
  long index(IndexMask I, IndexMask J) const {
    if (I >= slot_.size() || J >= anti_slot_.size()) return -1;
    const int a = slot_[I];
    const int b = anti_slot_[J];
    if (a < 0 || b < 0) return -1;
    return static_cast<long>(a) * static_cast<long>(anti_.size()) + b;
  }

  friend bool operator==(const FormLayout& x, const FormLayout& y) {
    return x.n_ == y.n_ && x.p_ == y.p_ && x.q_ == y.q_;
  }

private:
  int n_ = 0, p_ = 0, q_ = 0;
  std::vector<IndexMask> holo_, anti_;
  std::vector<int> slot_, anti_slot_;
};

// Coefficient operations for the pointwise and scalar coefficient types.
inline Complex zero_like(const Complex&) { return Complex{}; }
inline void add_scaled(Complex& out, const Complex& a, Complex c) { out += c * a; }
inline void add_product(Complex& out, const Complex& a, const Complex& b, Complex c) { out += c * a * b; }

inline Mat zero_like(const Mat& m) { return Mat::Zero(m.rows(), m.cols()); }
inline void add_scaled(Mat& out, const Mat& a, Complex c) { out += c * a; }
inline void add_product(Mat& out, const Mat& a, const Mat& b, Complex c) { out.noalias() += c * (a * b); }

template <class Coeff>
class Form {
public:
  Form() = default;

  /// Zero (p,q)-form whose coefficients have the shape of `zero`.
  Form(int n, int p, int q, const Coeff& zero)
      : layout_(n, p, q), zero_(zero_like(zero)), comps_(layout_.size(), zero_) {}

  const FormLayout& layout() const { return layout_; }
  int n() const { return layout_.n(); }
  int p() const { return layout_.p(); }
  int q() const { return layout_.q(); }
  int degree() const { return p() + q(); }
  std::size_t size() const { return comps_.size(); }
  const Coeff& zero() const { return zero_; }

  Coeff& operator[](std::size_t c) { return comps_[c]; }
  const Coeff& operator[](std::size_t c) const { return comps_[c]; }

  /// Coefficient on ordered index sets given as lists.
  Coeff& at(std::initializer_list<int> holo, std::initializer_list<int> anti) {
    return comps_[checked_index(holo, anti)];
  }
  const Coeff& at(std::initializer_list<int> holo, std::initializer_list<int> anti) const {
    return comps_[checked_index(holo, anti)];
  }

  /// Unordered lookup: returns the stored component and the permutation sign
  /// relating it to dz^{holo} ^ dzbar^{anti}; nullopt when an index repeats.
  std::optional<std::pair<std::size_t, int>> lookup(std::span<const int> holo,
                                                    std::span<const int> anti) const {
    const auto a = sort_indices(holo);
    const auto b = sort_indices(anti);
    if (!a || !b) return std::nullopt;
    const long c = layout_.index(a->first, b->first);
    if (c < 0) return std::nullopt;
    return std::make_pair(static_cast<std::size_t>(c), a->second * b->second);
  }

  Form& operator+=(const Form& o) {
    require_same(o);
    for (std::size_t c = 0; c < comps_.size(); ++c) add_scaled(comps_[c], o.comps_[c], 1.0);
    return *this;
  }
  Form& operator-=(const Form& o) {
    require_same(o);
    for (std::size_t c = 0; c < comps_.size(); ++c) add_scaled(comps_[c], o.comps_[c], -1.0);
    return *this;
  }
  Form& operator*=(Complex s) {
    for (auto& c : comps_) {
      Coeff t = zero_;
      add_scaled(t, c, s);
      c = std::move(t);
    }
    return *this;
  }
  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator*(Complex s, Form a) { return a *= s; }

  void require_same(const Form& o) const {
    if (!(layout_ == o.layout_)) throw ConfigError("form bidegree mismatch");
  }

private:
  std::size_t checked_index(std::initializer_list<int> holo, std::initializer_list<int> anti) const {
    IndexMask I = 0, J = 0;
    int last = -1;
    for (int a : holo) {
      if (a <= last) throw ConfigError("Form::at expects strictly increasing indices");
      I |= 1u << a;
      last = a;
    }
    last = -1;
    for (int b : anti) {
      if (b <= last) throw ConfigError("Form::at expects strictly increasing indices");
      J |= 1u << b;
      last = b;
    }
    const long c = layout_.index(I, J);
    if (c < 0) throw ConfigError("Form::at index does not match the bidegree");
    return static_cast<std::size_t>(c);
  }

  FormLayout layout_;
  Coeff zero_{};
  std::vector<Coeff> comps_;
};

/// One term of a wedge product: out[out] += sign * a[a] * b[b].
struct WedgeTerm {
  std::size_t out, a, b;
  int sign;
};

/// Shuffle table for (p,q) ^ (p2,q2). Moving dz^K past dzbar^J costs
/// (-1)^{q * p2}; sorting I u K and J u L adds the two merge signs.
inline std::vector<WedgeTerm> wedge_terms(const FormLayout& a, const FormLayout& b,
                                          const FormLayout& out) {
  std::vector<WedgeTerm> terms;
  if (out.is_zero_degree()) return terms;
  const int cross = ((a.q() * b.p()) & 1) ? -1 : 1;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const IndexMask I = a.holo(i), J = a.anti(i), K = b.holo(j), L = b.anti(j);
      if ((I & K) || (J & L)) continue;
      const long o = out.index(I | K, J | L);
      terms.push_back({static_cast<std::size_t>(o), i, j, cross * merge_sign(I, K) * merge_sign(J, L)});
    }
  return terms;
}

/// Wedge product with coefficient multiplication a * b (coefficients do not commute).
template <class Coeff>
Form<Coeff> wedge(const Form<Coeff>& a, const Form<Coeff>& b) {
  if (a.n() != b.n()) throw ConfigError("wedge of forms on different dimensions");
  Form<Coeff> out(a.n(), a.p() + b.p(), a.q() + b.q(), a.zero());
  for (const auto& t : wedge_terms(a.layout(), b.layout(), out.layout()))
    add_product(out[t.out], a[t.a], b[t.b], static_cast<double>(t.sign));
  return out;
}

/// Wedge with a constant scalar form on the right.
template <class Coeff>
Form<Coeff> wedge(const Form<Coeff>& a, const Form<Complex>& s) {
  if (a.n() != s.n()) throw ConfigError("wedge of forms on different dimensions");
  Form<Coeff> out(a.n(), a.p() + s.p(), a.q() + s.q(), a.zero());
  for (const auto& t : wedge_terms(a.layout(), s.layout(), out.layout()))
    if (s[t.b] != Complex{}) add_scaled(out[t.out], a[t.a], static_cast<double>(t.sign) * s[t.b]);
  return out;
}

inline Form<Complex> wedge(const Form<Complex>& a, const Form<Complex>& b) {
  if (a.n() != b.n()) throw ConfigError("wedge of forms on different dimensions");
  Form<Complex> out(a.n(), a.p() + b.p(), a.q() + b.q(), Complex{});
  for (const auto& t : wedge_terms(a.layout(), b.layout(), out.layout()))
    out[t.out] += static_cast<double>(t.sign) * a[t.a] * b[t.b];
  return out;
}

/// k-fold wedge power; power 0 is the unit 0-form `one`.
template <class Coeff>
Form<Coeff> wedge_power(const Form<Coeff>& b, int k, const Coeff& one) {
  Form<Coeff> acc(b.n(), 0, 0, b.zero());
  acc[0] = one;
  for (int i = 0; i < k; ++i) acc = wedge(acc, b);
  return acc;
}

/// Constant scalar form omega = i g_{a bbar} dz^a ^ dzbar^b.
inline Form<Complex> kaehler_form(const Mat& g) {
  const int n = static_cast<int>(g.rows());
  Form<Complex> w(n, 1, 1, Complex{});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) w.at({a}, {b}) = I * g(a, b);
  return w;
}

/// omega^k / k! as a constant scalar form.
inline Form<Complex> kaehler_power(const Mat& g, int k) {
  const Form<Complex> w = kaehler_form(g);
  Form<Complex> acc(w.n(), 0, 0, Complex{});
  acc[0] = 1.0;
  for (int i = 0; i < k; ++i) acc = wedge(acc, w);
  acc *= Complex(1.0 / factorial(k));
  return acc;
}

/// Real-coordinate density of dz^1..dz^n ^ dzbar^1..dzbar^n relative to
/// dx^1 ^ dy^1 ^ ... ^ dx^n ^ dy^n: (-1)^{n(n-1)/2} (-2i)^n.
inline Complex top_density(int n) {
  Complex c = 1.0;
  for (int a = 0; a < n; ++a) c *= Complex(0.0, -2.0);
  if (((n * (n - 1)) / 2) & 1) c = -c;
  return c;
}

/// Weights w_c with [f ^ omega^{n-k}/(n-k)!] / [omega^n/n!] = sum_c w_c f_c
/// for an (k,k)-form f.
inline std::vector<Complex> contraction_weights(const Mat& g, int k) {
  const int n = static_cast<int>(g.rows());
  if (k < 0 || k > n) throw ConfigError("contraction degree out of range");
  const Form<Complex> complement = kaehler_power(g, n - k);
  const Form<Complex> volume = kaehler_power(g, n);
  const FormLayout lay(n, k, k);
  const FormLayout top(n, n, n);
  std::vector<Complex> w(lay.size(), Complex{});
  for (const auto& t : wedge_terms(lay, complement.layout(), top))
    w[t.a] += static_cast<double>(t.sign) * complement[t.b] / volume[0];
  return w;
}

/// [f ^ omega^{n-k}/(n-k)!] / [omega^n/n!] for a (k,k)-form f.
template <class Coeff>
Coeff contract_top(const Form<Coeff>& f, const Mat& g) {
  if (f.p() != f.q()) throw ConfigError("contract_top needs a (k,k)-form");
  if (f.n() != g.rows()) throw ConfigError("contract_top dimension mismatch");
  const auto w = contraction_weights(g, f.p());
  Coeff out = f.zero();
  for (std::size_t c = 0; c < f.size(); ++c)
    if (w[c] != Complex{}) add_scaled(out, f[c], w[c]);
  return out;
}

}  // namespace hbl
