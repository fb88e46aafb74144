#pragma once

// Pointwise spectral calculus of Hermitian matrices: exp, log, sqrt and
// inverse sqrt through the eigendecomposition, plus eigenvalue queries.
// Rank 2 uses the closed-form two-eigenvalue expansion
//   f(A) = (f(l1) + f(l2))/2 Id + (f(l1) - f(l2))/(l1 - l2) (A - mu Id),
// with divided differences evaluated in cancellation-free form. Other ranks go
// through Eigen's self-adjoint solver. Every function acts on the Hermitian
// part of its argument.

#include "hbl/grid_field.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace hbl {

enum class HermFn { Exp, Log, Sqrt, InvSqrt };

namespace detail {

inline bool needs_positive(HermFn f) { return f == HermFn::Log || f == HermFn::InvSqrt; }

inline double scalar_fn(HermFn f, double x) {
  switch (f) {
    case HermFn::Exp: return std::exp(x);
    case HermFn::Log: return std::log(x);
    case HermFn::Sqrt: return std::sqrt(x);
    case HermFn::InvSqrt: return 1.0 / std::sqrt(x);
  }
  return 0.0;
}

/// (f(mu + d) + f(mu - d)) / 2 and (f(mu + d) - f(mu - d)) / (2 d).
inline std::pair<double, double> two_point(HermFn f, double mu, double d) {
  const double l1 = mu + d, l2 = mu - d;
  switch (f) {
    case HermFn::Exp: {
      const double e = std::exp(mu);
      const double shc = d < 1e-4 ? 1.0 + d * d / 6.0 + d * d * d * d / 120.0 : std::sinh(d) / d;
      return {e * std::cosh(d), e * shc};
    }
    case HermFn::Log: {
      const double x = d / mu;
      const double ath = x < 1e-4 ? 1.0 + x * x / 3.0 + x * x * x * x / 5.0 : std::atanh(x) / x;
      return {0.5 * (std::log(l1) + std::log(l2)), ath / mu};
    }
    case HermFn::Sqrt: {
      const double s1 = std::sqrt(l1), s2 = std::sqrt(std::max(l2, 0.0));
      return {0.5 * (s1 + s2), 1.0 / (s1 + s2)};
    }
    case HermFn::InvSqrt: {
      const double s1 = std::sqrt(l1), s2 = std::sqrt(l2);
      return {0.5 * (1.0 / s1 + 1.0 / s2), -1.0 / (s1 * s2 * (s1 + s2))};
    }
  }
  return {0.0, 0.0};
}

struct Herm2 {
  double a, d;
  Complex b;
  double mu() const { return 0.5 * (a + d); }
  double delta() const {
    const double x = 0.5 * (a - d);
    return std::sqrt(x * x + std::norm(b));
  }
};

inline Herm2 herm2(Complex a00, Complex a01, Complex a10, Complex a11) {
  return {a00.real(), a11.real(), 0.5 * (a01 + std::conj(a10))};
}

}  // namespace detail

/// Eigenvalues (ascending) of the Hermitian part of a.
inline Eigen::VectorXd hermitian_eigenvalues(const Mat& a) {
  const Mat h = 0.5 * (a + a.adjoint());
  if (h.rows() == 2) {
    const auto m = detail::herm2(h(0, 0), h(0, 1), h(1, 0), h(1, 1));
    Eigen::VectorXd ev(2);
    ev << m.mu() - m.delta(), m.mu() + m.delta();
    return ev;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Mat& a) { return hermitian_eigenvalues(a).minCoeff(); }

/// f applied to the Hermitian part of a. Throws DegenerateMetricError when f
/// needs positive eigenvalues and some eigenvalue is below `floor`.
inline Mat hermitian_function(const Mat& a, HermFn f, double floor = 0.0) {
  const Mat h = 0.5 * (a + a.adjoint());
  const auto r = h.rows();
  if (r == 1) {
    const double x = h(0, 0).real();
    if (detail::needs_positive(f) && !(x > floor))
      throw DegenerateMetricError("eigenvalue below floor: " + std::to_string(x));
    return Mat::Constant(1, 1, detail::scalar_fn(f, x));
  }
  if (r == 2) {
    const auto m = detail::herm2(h(0, 0), h(0, 1), h(1, 0), h(1, 1));
    const double mu = m.mu(), d = m.delta();
    if (detail::needs_positive(f) && !(mu - d > floor))
      throw DegenerateMetricError("eigenvalue below floor: " + std::to_string(mu - d));
    const auto [avg, dd] = detail::two_point(f, mu, d);
    Mat out = dd * h;
    out(0, 0) += avg - dd * mu;
    out(1, 1) += avg - dd * mu;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const auto& ev = es.eigenvalues();
  if (detail::needs_positive(f) && !(ev.minCoeff() > floor))
    throw DegenerateMetricError("eigenvalue below floor: " + std::to_string(ev.minCoeff()));
  Eigen::VectorXd fv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) fv(i) = detail::scalar_fn(f, ev(i));
  return es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
}

/// f applied pointwise to a Hermitian matrix field.
inline GridField hermitian_function(const GridField& a, HermFn f, double floor = 0.0) {
  GridField out(a.grid(), a.rank());
  const std::size_t P = a.points();
  if (a.rank() == 2) {
    const Complex *x00 = a.entry(0, 0), *x01 = a.entry(0, 1), *x10 = a.entry(1, 0), *x11 = a.entry(1, 1);
    Complex *y00 = out.entry(0, 0), *y01 = out.entry(0, 1), *y10 = out.entry(1, 0), *y11 = out.entry(1, 1);
    bool bad = false;
    double worst = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      const auto m = detail::herm2(x00[p], x01[p], x10[p], x11[p]);
      const double mu = m.mu(), d = m.delta();
      if (detail::needs_positive(f) && !(mu - d > floor)) {
        bad = true;
        worst = mu - d;
        break;
      }
      const auto [avg, dd] = detail::two_point(f, mu, d);
      y00[p] = avg + dd * (m.a - mu);
      y11[p] = avg + dd * (m.d - mu);
      y01[p] = dd * m.b;
      y10[p] = dd * std::conj(m.b);
    }
    if (bad) throw DegenerateMetricError("eigenvalue below floor: " + std::to_string(worst));
    return out;
  }
  for (std::size_t p = 0; p < P; ++p) out.set_matrix(p, hermitian_function(a.matrix(p), f, floor));
  return out;
}

/// Smallest eigenvalue of the Hermitian part at every grid point.
inline std::vector<double> min_eigenvalues(const GridField& a) {
  std::vector<double> out(a.points());
  if (a.rank() == 2) {
    for (std::size_t p = 0; p < a.points(); ++p) {
      const auto m = detail::herm2(a(p, 0, 0), a(p, 0, 1), a(p, 1, 0), a(p, 1, 1));
      out[p] = m.mu() - m.delta();
    }
    return out;
  }
  for (std::size_t p = 0; p < a.points(); ++p) out[p] = min_eigenvalue(a.matrix(p));
  return out;
}

/// log det of a positive-definite Hermitian field as the sum of eigenvalue logs.
inline std::vector<double> log_det(const GridField& a, double floor = 0.0) {
  std::vector<double> out(a.points());
  for (std::size_t p = 0; p < a.points(); ++p) {
    Eigen::VectorXd ev;
    if (a.rank() == 2) {
      const auto m = detail::herm2(a(p, 0, 0), a(p, 0, 1), a(p, 1, 0), a(p, 1, 1));
      ev.resize(2);
      ev << m.mu() - m.delta(), m.mu() + m.delta();
    } else {
      ev = hermitian_eigenvalues(a.matrix(p));
    }
    if (!(ev.minCoeff() > floor))
      throw DegenerateMetricError("eigenvalue below floor in log det: " + std::to_string(ev.minCoeff()));
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) s += std::log(ev(i));
    out[p] = s;
  }
  return out;
}

/// Pointwise matrix inverse (general, not necessarily Hermitian).
inline GridField pointwise_inverse(const GridField& a) {
  GridField out(a.grid(), a.rank());
  const std::size_t P = a.points();
  if (a.rank() == 1) {
    for (std::size_t p = 0; p < P; ++p) out.data()[p] = 1.0 / a.data()[p];
    return out;
  }
  if (a.rank() == 2) {
    const Complex *x00 = a.entry(0, 0), *x01 = a.entry(0, 1), *x10 = a.entry(1, 0), *x11 = a.entry(1, 1);
    Complex *y00 = out.entry(0, 0), *y01 = out.entry(0, 1), *y10 = out.entry(1, 0), *y11 = out.entry(1, 1);
    for (std::size_t p = 0; p < P; ++p) {
      const Complex inv = 1.0 / (x00[p] * x11[p] - x01[p] * x10[p]);
      y00[p] = x11[p] * inv;
      y11[p] = x00[p] * inv;
      y01[p] = -x01[p] * inv;
      y10[p] = -x10[p] * inv;
    }
    return out;
  }
  for (std::size_t p = 0; p < P; ++p) out.set_matrix(p, a.matrix(p).inverse());
  return out;
}

}  // namespace hbl
