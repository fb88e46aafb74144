#pragma once

// The k-Hessian operator Psi_k, the equation residual, and the curvature
// quadratic forms whose positivity defines the sigma_k, strongly sigma_2,
// Nakano and dual Nakano cones.

#include "hbl/bundle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace hbl {

inline void require_degree(const Background& bg, int k) {
  if (k < 1 || k > bg.n()) throw ConfigError("k must satisfy 1 <= k <= n, got k=" + std::to_string(k));
}

/// F^k as a sampled (k,k)-form.
inline EndForm curvature_power(const Chern& c, int k) {
  EndForm acc = c.F;
  for (int i = 1; i < k; ++i) acc = wedge(acc, c.F);
  return acc;
}

/// Psi_k(H) = [(iF)^k ^ omega^{n-k}/(n-k)!] / [omega^n/n!].
inline GridField psi_k(const Background& bg, const Chern& c, int k) {
  require_degree(bg, k);
  GridField out = contract_top(curvature_power(c, k), bg, bg.n() - k);
  static constexpr Complex i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  out *= i_pow[k % 4];
  return out;
}

inline GridField psi_k(const Background& bg, const Metric& H, int k) { return psi_k(bg, chern(bg, H), k); }

/// Average of tr Psi_k / r, i.e. int tr((iF)^k) ^ omega^{n-k}/(n-k)! / (r vol).
inline double chern_weil_lambda(const Background& bg, const GridField& psi) {
  return grid_mean(psi.trace()).real() / bg.rank;
}

struct Residual {
  GridField R;                       ///< Psi_k - lambda Id
  double sup_norm = 0.0;             ///< sup over the grid of |R|_H
  double l2_norm = 0.0;              ///< (int |R|_H^2 omega^n/n!)^{1/2}
  double self_adjoint_defect = 0.0;  ///< |h Psi - (h Psi)^dagger| / |h Psi|, max-entry norms
};

/// Residual from a precomputed Psi_k at the metric h.
inline Residual residual_of(const Background& bg, const GridField& h, const GridField& psi, double lambda,
                            const UnitaryFrame& u) {
  Residual out;
  const GridField hp = multiply(h, psi);
  const double scale = hp.max_abs();
  out.self_adjoint_defect = scale > 0.0 ? (hp - hp.adjoint()).max_abs() / scale : 0.0;
  out.R = psi - GridField::scalar(bg.grid, bg.rank, lambda);
  const auto nr = h_norm(out.R, u);
  out.sup_norm = sup(nr);
  std::vector<double> sq(nr.size());
  for (std::size_t p = 0; p < nr.size(); ++p) sq[p] = nr[p] * nr[p];
  out.l2_norm = std::sqrt(integrate_volume(sq, bg));
  return out;
}

inline Residual residual(const Background& bg, const Chern& c, int k, double lambda, const UnitaryFrame& u) {
  return residual_of(bg, c.h, psi_k(bg, c, k), lambda, u);
}

inline Residual residual(const Background& bg, const Metric& H, int k, double lambda) {
  return residual(bg, chern(bg, H), k, lambda, UnitaryFrame::of(H.h, bg.eps_pd));
}

// ---------------------------------------------------------------------------
// Pointwise quadratic forms on End(E)-valued (0,1)-forms.
//
// Everything is expressed in an H-unitary frame, where xi^{*H} is the
// conjugate transpose. The xi-space has basis X_b = E_ij dzbar^b with index
// (b r + i) r + j.

/// iF at one grid point, conjugated into the H-unitary frame.
inline PointForm frame_form(const EndForm& f, const GridField& h, std::size_t p) {
  PointForm out = at_point(f, p);
  const Mat hp = h.matrix(p);
  const Mat root = hermitian_function(hp, HermFn::Sqrt);
  const Mat root_inv = hermitian_function(hp, HermFn::InvSqrt);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = root * out[c] * root_inv;
  return out;
}

inline int xi_dimension(int n, int r) { return n * r * r; }

/// Hermitian matrix of
///   Q(xi) = [omega^{n-k}/(n-k)! ^ i tr(sum_{t in terms} (iF)^t ^ xi^* ^ (iF)^{k-1-t} ^ xi)] / [omega^n/n!],
/// assembled entry by entry as the sesquilinear form B(e_a, e_b) (conjugate-linear in the first slot).
inline Mat sesquilinear_form(const PointForm& iF, const Mat& g, int k, std::span<const int> terms) {
  const int n = iF.n();
  const int r = static_cast<int>(iF.zero().rows());
  if (k < 1 || k > n) throw ConfigError("form degree out of range");
  if (iF.p() != 1 || iF.q() != 1) throw ConfigError("curvature must be a (1,1)-form");
  const int D = xi_dimension(n, r);

  std::vector<PointForm> P;
  P.emplace_back(n, 0, 0, Mat::Zero(r, r));
  P[0][0] = Mat::Identity(r, r);
  for (int i = 1; i < k; ++i) P.push_back(wedge(P.back(), iF));

  const auto w = contraction_weights(g, k);
  const FormLayout top(n, k, k);
  Mat Q = Mat::Zero(D, D);

  auto basis = [&](int a, bool holomorphic) {
    const int b = a / (r * r), i = (a / r) % r, j = a % r;
    PointForm e(n, holomorphic ? 1 : 0, holomorphic ? 0 : 1, Mat::Zero(r, r));
    // the adjoint of E_ij dzbar^b is E_ji dz^b
    if (holomorphic) e.at({b}, {})(j, i) = 1.0;
    else e.at({}, {b})(i, j) = 1.0;
    return e;
  };

  for (int t : terms) {
    if (t < 0 || t >= k) throw ConfigError("term index out of range");
    std::vector<PointForm> L, R;
    for (int a = 0; a < D; ++a) L.push_back(wedge(P[t], basis(a, true)));
    for (int b = 0; b < D; ++b) R.push_back(wedge(P[k - 1 - t], basis(b, false)));
    const auto table = wedge_terms(L[0].layout(), R[0].layout(), top);
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        Complex v{};
        for (const auto& e : table) {
          if (w[e.out] == Complex{}) continue;
          v += static_cast<double>(e.sign) * w[e.out] * (L[a][e.a].cwiseProduct(R[b][e.b].transpose())).sum();
        }
        Q(a, b) += I * v;
      }
  }
  // aliasing leaves a small anti-Hermitian part on rough metrics; sign or index slips are O(1)
  const double asym = (Q - Q.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-3 * std::max(1.0, Q.cwiseAbs().maxCoeff()))
    throw ConsistencyError("quadratic form is not Hermitian (defect " + format_number(asym) + ")");
  return 0.5 * (Q + Q.adjoint());
}

/// sigma_k test form: all terms t = 0..k-1.
inline Mat sigma_k_form(const PointForm& iF, const Mat& g, int k) {
  std::vector<int> terms(k);
  for (int t = 0; t < k; ++t) terms[t] = t;
  return sesquilinear_form(iF, g, k, terms);
}

/// The two one-sided k=2 forms: tr(iF ^ xi^* ^ xi) and tr(xi^* ^ iF ^ xi).
inline std::pair<Mat, Mat> strongly_sigma2_forms(const PointForm& iF, const Mat& g) {
  if (iF.n() < 2) throw ConfigError("strongly sigma_2 forms need n >= 2");
  const int first[] = {1}, second[] = {0};
  return {sesquilinear_form(iF, g, 2, first), sesquilinear_form(iF, g, 2, second)};
}

/// |xi|^2_{omega,H}: the k=1 form, which does not depend on the curvature.
inline Mat xi_norm_form(const Mat& g, int r) {
  const int n = static_cast<int>(g.rows());
  const int only[] = {0};
  return sesquilinear_form(PointForm(n, 1, 1, Mat::Zero(r, r)), g, 1, only);
}

/// Smallest eigenvalue of Q relative to the norm form N (generalised problem Q v = mu N v).
inline double min_relative_eigenvalue(const Mat& Q, const Mat& N) {
  if (N.isIdentity(1e-14)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Q, N, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Components F_{ab} re-expressed in coordinates where omega = i sum dw^a ^ dwbar^a.
inline PointForm orthonormal_components(const PointForm& F, const Mat& g) {
  const int n = F.n();
  const Eigen::LLT<Mat> llt(g);
  const Mat M = Mat(llt.matrixL()).inverse().transpose();  // dz = M dw
  PointForm out(n, 1, 1, F.zero());
  for (int c = 0; c < n; ++c)
    for (int d = 0; d < n; ++d)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) out.at({c}, {d}) += M(a, c) * std::conj(M(b, d)) * F.at({a}, {b});
  return out;
}

/// Nakano form sum <F_{ab} u^a, u^b> on n-tuples u of fibre vectors; F in an H-unitary frame.
inline Mat nakano_form(const PointForm& F, const Mat& g) {
  const PointForm f = orthonormal_components(F, g);
  const int n = f.n(), r = static_cast<int>(f.zero().rows());
  Mat out(n * r, n * r);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.block(b * r, a * r, r, r) = f.at({a}, {b});
  return 0.5 * (out + out.adjoint());
}

/// Dual Nakano form sum <F_{ab} v^b, v^a>.
inline Mat dual_nakano_form(const PointForm& F, const Mat& g) {
  const PointForm f = orthonormal_components(F, g);
  const int n = f.n(), r = static_cast<int>(f.zero().rows());
  Mat out(n * r, n * r);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.block(a * r, b * r, r, r) = f.at({a}, {b});
  return 0.5 * (out + out.adjoint());
}

inline double min_eigenvalue_of(const Mat& Q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Q, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Explicit index sums for the two one-sided forms with omega = i dz^a ^ dzbar^a,
/// F = F_{ab} dz^a ^ dzbar^b and xi = xi_b dzbar^b, all in an H-unitary frame.
/// Returns the coefficients of omega^n/n!.
inline std::pair<double, double> n1_n3_index_oracle(const PointForm& F, const PointForm& xi) {
  const int n = F.n(), r = static_cast<int>(F.zero().rows());
  auto inner = [](const Vec& x, const Vec& y) { return y.dot(x); };  // <x, y> = y^dagger x
  Complex n1{}, n3{};
  for (int i = 0; i < r; ++i) {
    const Vec e = Vec::Unit(r, i);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const Mat& Faa = F.at({a}, {a});
        const Mat& Fab = F.at({a}, {b});
        const Mat& Fba = F.at({b}, {a});
        const Mat& Fbb = F.at({b}, {b});
        const Vec sa = xi.at({}, {a}).adjoint() * e, sb = xi.at({}, {b}).adjoint() * e;
        n1 += inner(Faa * sb, sb) - inner(Fab * sb, sa) + inner(Fbb * sa, sa) - inner(Fba * sa, sb);
        const Vec ta = xi.at({}, {a}) * e, tb = xi.at({}, {b}) * e;
        n3 += inner(Fbb * ta, ta) - inner(Fba * tb, ta) + inner(Faa * tb, tb) - inner(Fab * ta, tb);
      }
  }
  return {n1.real(), n3.real()};
}

// ---------------------------------------------------------------------------
// Cone membership on a grid sample.

enum class Cone { SigmaK, StronglySigma2, Nakano, DualNakano };

inline std::string cone_name(Cone c) {
  switch (c) {
    case Cone::SigmaK: return "sigma_k";
    case Cone::StronglySigma2: return "strongly_sigma_2";
    case Cone::Nakano: return "nakano";
    case Cone::DualNakano: return "dual_nakano";
  }
  return "?";
}

struct PositivityReport {
  Cone cone = Cone::SigmaK;
  int k = 0;
  std::vector<std::size_t> points;
  std::vector<double> min_eig;
  double global_min = 0.0;
  bool positive = false;
};

/// All points for N <= 16, otherwise one seeded point per stratum of `count` equal strata.
inline std::vector<std::size_t> default_sample(const Grid& grid, std::size_t count = 4096, std::uint64_t seed = 1) {
  const std::size_t P = grid.points();
  std::vector<std::size_t> out;
  if (grid.N <= 16 || P <= count) {
    out.resize(P);
    for (std::size_t p = 0; p < P; ++p) out[p] = p;
    return out;
  }
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t lo = s * P / count, hi = (s + 1) * P / count;
    out.push_back(lo + rng() % (hi - lo));
  }
  return out;
}

/// Evenly strided sample of at most `count` points.
inline std::vector<std::size_t> strided_sample(const Grid& grid, std::size_t count) {
  const std::size_t P = grid.points();
  std::vector<std::size_t> out;
  const std::size_t step = std::max<std::size_t>(1, P / std::max<std::size_t>(1, count));
  for (std::size_t p = 0; p < P && out.size() < count; p += step) out.push_back(p);
  return out;
}

/// Smallest eigenvalue of the cone's form at one point.
inline double cone_min_eigenvalue(const Background& bg, const Chern& c, const EndForm& iF, Cone cone, int k,
                                  std::size_t p, const Mat& norm) {
  switch (cone) {
    case Cone::SigmaK:
      return min_relative_eigenvalue(sigma_k_form(frame_form(iF, c.h, p), bg.kaehler, k), norm);
    case Cone::StronglySigma2: {
      const auto [q1, q2] = strongly_sigma2_forms(frame_form(iF, c.h, p), bg.kaehler);
      return std::min(min_relative_eigenvalue(q1, norm), min_relative_eigenvalue(q2, norm));
    }
    case Cone::Nakano:
      return min_eigenvalue_of(nakano_form(frame_form(c.F, c.h, p), bg.kaehler));
    case Cone::DualNakano:
      return min_eigenvalue_of(dual_nakano_form(frame_form(c.F, c.h, p), bg.kaehler));
  }
  return 0.0;
}

inline PositivityReport positivity(const Background& bg, const Chern& c, Cone cone, int k,
                                   std::span<const std::size_t> sample) {
  if (cone == Cone::SigmaK) require_degree(bg, k);
  if (cone == Cone::StronglySigma2) {
    if (bg.n() < 2) throw ConfigError("strongly sigma_2 positivity needs n >= 2");
    k = 2;
  }
  PositivityReport rep;
  rep.cone = cone;
  rep.k = k;
  rep.points.assign(sample.begin(), sample.end());
  rep.min_eig.assign(sample.size(), 0.0);
  const EndForm iF = c.iF();
  const Mat norm = xi_norm_form(bg.kaehler, bg.rank);
  parallel_for(sample.size(), [&](std::size_t i) {
    rep.min_eig[i] = cone_min_eigenvalue(bg, c, iF, cone, k, sample[i], norm);
  });
  rep.global_min = rep.min_eig.empty() ? 0.0 : *std::min_element(rep.min_eig.begin(), rep.min_eig.end());
  rep.positive = !rep.min_eig.empty() && rep.global_min > 0.0;
  return rep;
}

}  // namespace hbl
