#pragma once

// Hermitian metrics on E = L^m (x) O^r over the torus, their Chern
// connection and curvature, geodesics in the space of metrics and
// perturbation neighbourhoods.
//
// A metric is stored as the field h = H0^{-1} H. The background H0 carries
// the central curvature F0 = pi m sum_a dz^a ^ dzbar^a Id, so that
// i F0 = pi m omega for g = Id. Since F0 is central, End(E) is flat for H0
// and D_H = D_H0 + h^{-1} d h on endomorphisms.

#include "hbl/geometry.hpp"
#include "hbl/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace hbl {

struct Metric {
  GridField h;

  static Metric identity(const Background& bg) {
    return {GridField::identity(bg.grid, bg.rank)};
  }
  const Grid& grid() const { return h.grid(); }
  int rank() const { return h.rank(); }
};

/// Throws unless h is pointwise Hermitian with eigenvalues >= eps.
inline void validate_metric(const Background& bg, const Metric& H) {
  if (H.h.grid() != bg.grid || H.h.rank() != bg.rank)
    throw ConfigError("metric does not match the background grid/rank");
  const GridField& h = H.h;
  const int r = h.rank();
  const std::size_t P = h.points();
  double big = 0.0, asym = 0.0, low = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (std::size_t p = 0; p < P; ++p) {
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j) {
        const Complex a = h(p, i, j), b = h(p, j, i);
        finite = finite && std::isfinite(a.real()) && std::isfinite(a.imag()) && std::isfinite(b.real()) &&
                 std::isfinite(b.imag());
        big = std::max({big, std::abs(a.real()), std::abs(a.imag()), std::abs(b.real()), std::abs(b.imag())});
        asym = std::max({asym, std::abs(a.real() - b.real()), std::abs(a.imag() + b.imag())});
      }
    if (!finite) break;
    if (r == 2) {
      const auto m = detail::herm2(h(p, 0, 0), h(p, 0, 1), h(p, 1, 0), h(p, 1, 1));
      low = std::min(low, m.mu() - m.delta());
    } else {
      low = std::min(low, min_eigenvalue(h.matrix(p)));
    }
  }
  if (!finite) throw DegenerateMetricError("metric has non-finite entries");
  if (asym > 1e-12 * std::max(1.0, big)) throw DegenerateMetricError("metric is not Hermitian");
  if (!(low >= bg.eps_pd))
    throw DegenerateMetricError("metric eigenvalue " + std::to_string(low) + " below eps_pd");
}

/// Hermitian-part symmetrisation, (a + a^dagger)/2.
inline GridField hermitian_part(const GridField& a) {
  GridField out = a + a.adjoint();
  out *= Complex(0.5);
  return out;
}

/// Central background curvature F0 = pi m sum_a dz^a ^ dzbar^a Id.
inline EndForm background_curvature(const Background& bg) {
  ScalarForm b(bg.n(), 1, 1, Complex{});
  for (int a = 0; a < bg.n(); ++a) b.at({a}, {a}) = pi * bg.level;
  return lift(b, bg.grid, bg.rank);
}

/// F += F0 in place.
inline void add_background_curvature(const Background& bg, EndForm& F) {
  if (bg.level == 0) return;
  const double c = pi * bg.level;
  for (int a = 0; a < bg.n(); ++a) {
    GridField& f = F.at({a}, {a});
    for (int i = 0; i < bg.rank; ++i) {
      Complex* d = f.entry(i, i);
      for (std::size_t p = 0; p < f.points(); ++p) d[p] += c;
    }
  }
}

/// Chern data of a metric: h, h^{-1}, the connection form A = h^{-1} d h
/// and the full curvature F = F0 + dbar A.
struct Chern {
  GridField h, h_inv;
  EndForm A;
  EndForm F;

  /// i F
  EndForm iF() const { return Complex(0.0, 1.0) * F; }
};

inline Chern chern(const Background& bg, const Metric& H) {
  validate_metric(bg, H);
  Chern c;
  c.h = H.h;
  c.h_inv = pointwise_inverse(H.h);
  c.A = left_multiply(c.h_inv, del(as_form(H.h)));
  c.F = dbar(c.A);
  add_background_curvature(bg, c.F);
  return c;
}

inline EndForm curvature(const Background& bg, const Metric& H) { return chern(bg, H).F; }

/// d_H f = d f + A ^ f - (-1)^{deg f} f ^ A for an End(E)-valued form f.
inline EndForm chern_del(const EndForm& A, const EndForm& f) {
  EndForm out = del(f);
  if (out.size() == 0) return out;
  out += wedge(A, f);
  if (f.degree() & 1) out += wedge(f, A);
  else out -= wedge(f, A);
  return out;
}

inline EndForm chern_del(const Chern& c, const EndForm& f) { return chern_del(c.A, f); }

/// H-unitary frame: root = h^{1/2} and its inverse. An endomorphism A is
/// represented there by root A root^{-1}; H-adjoints become conjugate transposes.
struct UnitaryFrame {
  GridField root, root_inv;

  static UnitaryFrame of(const GridField& h, double floor = 0.0) {
    return {hermitian_function(h, HermFn::Sqrt, floor), hermitian_function(h, HermFn::InvSqrt, floor)};
  }
  GridField to_frame(const GridField& a) const { return multiply(multiply(root, a), root_inv); }
  GridField from_frame(const GridField& a) const { return multiply(multiply(root_inv, a), root); }
};

/// Pointwise H-norm of an End(E)-valued form: sqrt of the sum over components
/// of the squared Frobenius norm in an H-unitary frame (unit coframe dz^a).
inline std::vector<double> h_norm(const EndForm& f, const UnitaryFrame& u) {
  const std::size_t P = grid_of(f).points();
  std::vector<double> out(P, 0.0);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const GridField t = u.to_frame(f[c]);
    const int r = t.rank();
    for (int e = 0; e < r * r; ++e) {
      const Complex* d = t.data() + e * P;
      for (std::size_t p = 0; p < P; ++p) out[p] += std::norm(d[p]);
    }
  }
  for (auto& v : out) v = std::sqrt(v);
  return out;
}

inline std::vector<double> h_norm(const GridField& a, const UnitaryFrame& u) {
  return h_norm(as_form(a), u);
}

inline double sup(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

/// Geodesic H(t) = H e^{ts}, s = log H^{-1} K, through the Hermitian
/// similarity L = log(H^{-1/2} K H^{-1/2}), so H(t) = H^{1/2} e^{tL} H^{1/2}.
class Geodesic {
public:
  Geodesic(const Background& bg, const Metric& H, const Metric& K) : bg_(bg) {
    validate_metric(bg, H);
    validate_metric(bg, K);
    frame_ = UnitaryFrame::of(H.h, bg.eps_pd);
    const GridField m = multiply(multiply(frame_.root_inv, K.h), frame_.root_inv);
    L_ = hermitian_function(m, HermFn::Log, bg.eps_pd);
  }

  /// Hermitian generator in the H-unitary frame.
  const GridField& generator() const { return L_; }
  const UnitaryFrame& frame() const { return frame_; }

  /// s = H^{-1/2} L H^{1/2}, H-self-adjoint.
  GridField s() const { return frame_.from_frame(L_); }

  /// h(t) = H^{-1} H(t) = e^{ts}.
  GridField relative(double t) const {
    return frame_.from_frame(hermitian_function(t * L_, HermFn::Exp));
  }

  Metric at(double t) const {
    if (t == 0.0) return {multiply(frame_.root, frame_.root)};
    const GridField e = hermitian_function(t * L_, HermFn::Exp);
    Metric out{hermitian_part(multiply(multiply(frame_.root, e), frame_.root))};
    validate_metric(bg_, out);
    return out;
  }

private:
  Background bg_;
  UnitaryFrame frame_;
  GridField L_;
};

/// Band-limited Hermitian field with sup Frobenius norm `amplitude`.
inline GridField random_hermitian_field(const Grid& grid, int rank, std::uint64_t seed, int band,
                                        double amplitude) {
  GridField s = random_band_limited(grid, rank, seed, band, true);
  if (amplitude == 0.0) return GridField(grid, rank);
  s *= Complex(amplitude / s.sup_frobenius());
  return s;
}

/// h = exp(s) for a random band-limited Hermitian s with sup|s| = amplitude.
inline Metric random_metric(const Background& bg, std::uint64_t seed, double amplitude, int band) {
  if (amplitude == 0.0) return Metric::identity(bg);
  return {hermitian_function(random_hermitian_field(bg.grid, bg.rank, seed, band, amplitude), HermFn::Exp)};
}

/// H-self-adjoint direction s with the sup bounds that decide membership in
/// the neighbourhood B_{H,eps}: sup|s|_H and sup(|d_H s|_H + |dbar d_H s|_H).
struct Perturbation {
  GridField s;
  double sup_s = 0.0;
  double sup_derivatives = 0.0;
};

inline Perturbation perturbation(const Background& bg, const Metric& H, const GridField& s) {
  const Chern c = chern(bg, H);
  const UnitaryFrame u = UnitaryFrame::of(H.h, bg.eps_pd);
  Perturbation out;
  out.s = s;
  out.sup_s = sup(h_norm(s, u));
  const EndForm ds = chern_del(c, as_form(s));
  const auto n1 = h_norm(ds, u);
  const auto n2 = h_norm(dbar(ds), u);
  for (std::size_t p = 0; p < n1.size(); ++p) out.sup_derivatives = std::max(out.sup_derivatives, n1[p] + n2[p]);
  return out;
}

/// Turns a Hermitian field (unitary-frame representative) into the
/// H-self-adjoint direction s = H^{-1/2} a H^{1/2}.
inline GridField self_adjoint_direction(const Background& bg, const Metric& H, const GridField& a) {
  return UnitaryFrame::of(H.h, bg.eps_pd).from_frame(hermitian_part(a));
}

/// H e^{eps s} for an H-self-adjoint s.
inline Metric perturb(const Background& bg, const Metric& H, const GridField& s, double eps) {
  if (eps == 0.0) return H;
  const UnitaryFrame u = UnitaryFrame::of(H.h, bg.eps_pd);
  const GridField e = hermitian_function(eps * hermitian_part(u.to_frame(s)), HermFn::Exp);
  Metric out{hermitian_part(multiply(multiply(u.root, e), u.root))};
  validate_metric(bg, out);
  return out;
}

/// Result of the pointwise geodesic derivative bound
/// |dbar X(t)| + |X(t)| <= (|dbar d_H s| + |d_H s|) (e^{4tc} - 1)/(4c),
/// X(t) = h(t)^{-1} d_H h(t), c = |s| + |dbar s|, all norms taken in H.
struct BoundReport {
  std::vector<double> t;
  std::vector<double> lhs_max;    ///< sup over the grid of the left side
  std::vector<double> rhs_at_max; ///< right side at the same point
  std::vector<double> violation;  ///< sup over the grid of lhs - rhs
  double max_violation = 0.0;
};

inline double growth_factor(double t, double c) {
  const double x = 4.0 * t * c;
  // (e^x - 1)/(4c) = t * expm1(x)/x, continuous at c = 0
  return x == 0.0 ? t : t * std::expm1(x) / x;
}

inline BoundReport geodesic_derivative_bound_check(const Background& bg, const Metric& H, const Metric& K,
                                                   std::span<const double> ts) {
  const Chern c = chern(bg, H);
  const Geodesic geo(bg, H, K);
  const UnitaryFrame& u = geo.frame();
  const GridField s = geo.s();
  const EndForm ds = chern_del(c, as_form(s));
  const auto n_ds = h_norm(ds, u);
  const auto n_dbds = h_norm(dbar(ds), u);
  const auto n_s = h_norm(s, u);
  const auto n_dbs = h_norm(dbar(as_form(s)), u);

  BoundReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const GridField ht = geo.relative(t);
    const GridField ht_inv = u.from_frame(hermitian_function(-t * geo.generator(), HermFn::Exp));
    const EndForm X = left_multiply(ht_inv, chern_del(c, as_form(ht)));
    const auto nX = h_norm(X, u);
    const auto nY = h_norm(dbar(X), u);
    double worst = -std::numeric_limits<double>::infinity(), lmax = 0.0, ratmax = 0.0;
    for (std::size_t p = 0; p < nX.size(); ++p) {
      const double lhs = nX[p] + nY[p];
      const double rhs = (n_dbds[p] + n_ds[p]) * growth_factor(t, n_s[p] + n_dbs[p]);
      worst = std::max(worst, lhs - rhs);
      if (lhs >= lmax) {
        lmax = lhs;
        ratmax = rhs;
      }
    }
    rep.t.push_back(t);
    rep.lhs_max.push_back(lmax);
    rep.rhs_at_max.push_back(ratmax);
    rep.violation.push_back(worst);
    rep.max_violation = std::max(rep.max_violation, worst);
  }
  if (ts.empty()) rep.max_violation = 0.0;
  return rep;
}

}  // namespace hbl
