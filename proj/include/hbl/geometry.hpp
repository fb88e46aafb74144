#pragma once

// Spectral exterior calculus of End(E)-valued forms on the flat torus.

#include "hbl/background.hpp"
#include "hbl/forms.hpp"
#include "hbl/grid_field.hpp"
#include "hbl/hermitian.hpp"
#include "hbl/spectral.hpp"

#include <type_traits>

namespace hbl {

using EndForm = Form<GridField>;   ///< sampled End(E)-valued form
using PointForm = Form<Mat>;       ///< End(E)-valued form at one point
using ScalarForm = Form<Complex>;  ///< constant scalar form

inline EndForm zero_form(const Grid& grid, int rank, int p, int q) {
  return EndForm(grid.n, p, q, GridField(grid, rank));
}

/// A field viewed as a (0,0)-form.
inline EndForm as_form(GridField f) {
  const int n = f.grid().n;
  EndForm out(n, 0, 0, zero_like(f));
  out[0] = std::move(f);
  return out;
}

inline const Grid& grid_of(const EndForm& f) { return f.zero().grid(); }
inline int rank_of(const EndForm& f) { return f.zero().rank(); }

/// Constant scalar form times the identity, sampled on the grid.
inline EndForm lift(const ScalarForm& s, const Grid& grid, int rank) {
  EndForm out(s.n(), s.p(), s.q(), GridField(grid, rank));
  for (std::size_t c = 0; c < s.size(); ++c) out[c] = GridField::scalar(grid, rank, s[c]);
  return out;
}

/// Holomorphic exterior derivative (spectral). Forms of degree p = n map to
/// the zero form of degree (n+1, q), which has no components.
inline EndForm del(const EndForm& f) {
  const int n = f.n();
  EndForm out(n, f.p() + 1, f.q(), f.zero());
  if (out.size() == 0) return out;
  std::vector<char> set(out.size(), 0);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const IndexMask I = f.layout().holo(c), J = f.layout().anti(c);
    const Spectrum spec(f[c]);
    for (int a = 0; a < n; ++a) {
      const IndexMask bit = 1u << a;
      if (I & bit) continue;
      const long o = out.layout().index(I | bit, J);
      const double sign = merge_sign(bit, I);
      if (set[o]) out[o] += spec.del(a, sign);
      else out[o] = spec.del(a, sign);
      set[o] = 1;
    }
  }
  return out;
}

/// Antiholomorphic exterior derivative (spectral).
inline EndForm dbar(const EndForm& f) {
  const int n = f.n();
  EndForm out(n, f.p(), f.q() + 1, f.zero());
  if (out.size() == 0) return out;
  std::vector<char> set(out.size(), 0);
  const double pass = (f.p() & 1) ? -1.0 : 1.0;  // dzbar^b moves past dz^I
  for (std::size_t c = 0; c < f.size(); ++c) {
    const IndexMask I = f.layout().holo(c), J = f.layout().anti(c);
    const Spectrum spec(f[c]);
    for (int b = 0; b < n; ++b) {
      const IndexMask bit = 1u << b;
      if (J & bit) continue;
      const long o = out.layout().index(I, J | bit);
      const double sign = pass * merge_sign(bit, J);
      if (set[o]) out[o] += spec.dbar(b, sign);
      else out[o] = spec.dbar(b, sign);
      set[o] = 1;
    }
  }
  return out;
}

/// Pointwise matrix trace of every component.
inline EndForm trace(const EndForm& f) {
  EndForm out(f.n(), f.p(), f.q(), GridField(grid_of(f), 1));
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = f[c].trace();
  return out;
}

inline ScalarForm trace(const PointForm& f) {
  ScalarForm out(f.n(), f.p(), f.q(), Complex{});
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = f[c].trace();
  return out;
}

/// [f ^ omega^{n-k}/(n-k)!] / [omega^n/n!] for a sampled (k,k)-form.
inline GridField contract_top(const EndForm& f, const Background& bg, int complement) {
  if (f.p() != f.q() || f.p() + complement != bg.n())
    throw ConfigError("contract_top needs a (k,k)-form with k + complement = n");
  return contract_top(f, bg.kaehler);
}

/// Integral of a scalar top-degree form over the unit torus.
inline Complex integrate(const EndForm& f) {
  if (f.p() != f.n() || f.q() != f.n()) throw ConfigError("integrate needs an (n,n)-form");
  if (rank_of(f) != 1) throw ConfigError("integrate needs a scalar (trace) form");
  return top_density(f.n()) * grid_mean(f[0]);
}

/// Integral of phi * omega^n / n! for a scalar function phi.
inline Complex integrate_volume(const GridField& phi, const Background& bg) {
  return bg.volume() * grid_mean(phi);
}

/// Integral of a real per-point density against omega^n / n!.
inline double integrate_volume(std::span<const double> phi, const Background& bg) {
  return bg.volume() * pairwise_mean(phi);
}

/// The form at a single grid point.
inline PointForm at_point(const EndForm& f, std::size_t p) {
  const int r = rank_of(f);
  PointForm out(f.n(), f.p(), f.q(), Mat::Zero(r, r));
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = f[c].matrix(p);
  return out;
}

/// H-adjoint of a (0,1)- or (1,0)-form: xi_b dzbar^b -> (xi_b)^{*H} dz^b with
/// A^{*H} = h^{-1} A^dagger h. Needs h and h^{-1} at every point.
inline EndForm adjoint_form(const EndForm& xi, const GridField& h, const GridField& h_inv) {
  if (!((xi.p() == 0 && xi.q() == 1) || (xi.p() == 1 && xi.q() == 0)))
    throw ConfigError("adjoint_form handles (0,1)- and (1,0)-forms");
  EndForm out(xi.n(), xi.q(), xi.p(), xi.zero());
  for (std::size_t c = 0; c < xi.size(); ++c) out[c] = multiply(multiply(h_inv, xi[c].adjoint()), h);
  return out;
}

inline PointForm adjoint_form(const PointForm& xi, const Mat& h) {
  if (!((xi.p() == 0 && xi.q() == 1) || (xi.p() == 1 && xi.q() == 0)))
    throw ConfigError("adjoint_form handles (0,1)- and (1,0)-forms");
  PointForm out(xi.n(), xi.q(), xi.p(), xi.zero());
  const Mat h_inv = h.inverse();
  for (std::size_t c = 0; c < xi.size(); ++c) out[c] = h_inv * xi[c].adjoint() * h;
  return out;
}

/// Left/right multiplication of every component by a 0-form.
inline EndForm left_multiply(const GridField& a, const EndForm& f) {
  EndForm out(f.n(), f.p(), f.q(), f.zero());
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = multiply(a, f[c]);
  return out;
}

inline EndForm right_multiply(const EndForm& f, const GridField& a) {
  EndForm out(f.n(), f.p(), f.q(), f.zero());
  for (std::size_t c = 0; c < f.size(); ++c) out[c] = multiply(f[c], a);
  return out;
}

/// Largest coefficient magnitude over all components.
template <class Coeff>
double max_abs(const Form<Coeff>& f) {
  double m = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) {
    if constexpr (std::is_same_v<Coeff, GridField>) m = std::max(m, f[c].max_abs());
    else if constexpr (std::is_same_v<Coeff, Mat>) m = std::max(m, f[c].cwiseAbs().maxCoeff());
    else m = std::max(m, std::abs(f[c]));
  }
  return m;
}

}  // namespace hbl
