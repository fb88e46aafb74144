#pragma once

// Executable checks of the identities behind the functional: path
// independence, cocycle, variations, the two-parameter identity, the curvature
// difference identity, the k=2 integration-by-parts identity, the geodesic
// derivative bound, Nakano positivity and local minimality.

#include "hbl/solver.hpp"

#include "json.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hbl {

struct Check {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  std::string relation = "<=";  ///< value <= tol, value >= tol, or value > tol
  bool pass = false;
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  std::vector<SuiteResult> children;
  std::string error;

  void le(const std::string& what, double value, double tol) {
    checks.push_back({what, value, tol, "<=", value <= tol});
  }
  void ge(const std::string& what, double value, double bound) {
    checks.push_back({what, value, bound, ">=", value >= bound});
  }
  void gt(const std::string& what, double value, double bound) {
    checks.push_back({what, value, bound, ">", value > bound});
  }

  bool pass() const {
    if (!error.empty()) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    for (const auto& s : children)
      if (!s.pass()) return false;
    return true;
  }

  const SuiteResult* find(const std::string& suite) const {
    if (name == suite) return this;
    for (const auto& s : children)
      if (const SuiteResult* f = s.find(suite)) return f;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["suite"] = name;
    j["pass"] = pass();
    if (!error.empty()) j["error"] = error;
    nlohmann::ordered_json cs = nlohmann::ordered_json::array();
    for (const auto& c : checks)
      cs.push_back({{"check", c.name}, {"value", c.value}, {"relation", c.relation}, {"tol", c.tol}, {"pass", c.pass}});
    j["checks"] = std::move(cs);
    if (!children.empty()) {
      nlohmann::ordered_json ch = nlohmann::ordered_json::array();
      for (const auto& s : children) ch.push_back(s.to_json());
      j["suites"] = std::move(ch);
    }
    return j;
  }
};

/// |a - b| / max(|a|, |b|), zero when both vanish.
inline double relative_gap(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Central difference with step d, Richardson-extrapolated once against step 2d.
inline double richardson_derivative(const std::function<double(double)>& f, double d) {
  const double d1 = (f(d) - f(-d)) / (2 * d);
  const double d2 = (f(2 * d) - f(-2 * d)) / (4 * d);
  return (4 * d1 - d2) / 3;
}

/// Second central difference, Richardson-extrapolated once. `inc(t)` must
/// return g(t) - g(0).
inline double richardson_second(const std::function<double(double)>& inc, double d) {
  const double d1 = (inc(d) + inc(-d)) / (d * d);
  const double d2 = (inc(2 * d) + inc(-2 * d)) / (4 * d * d);
  return (4 * d1 - d2) / 3;
}

/// d/dt M(H0, H e^{t s}) at t = 0 by finite differences.
inline double fd_first_variation(const Background& bg, const Metric& H0, const Metric& H, const GridField& s, int k,
                                 double lambda, const PathSpec& path, double d) {
  return richardson_derivative(
      [&](double t) { return donaldson_M(bg, H0, perturb(bg, H, s, t), k, path, lambda).M; }, d);
}

/// d^2/dt^2 M(H0, H(t)) along the geodesic from H to K, from the increments
/// M(H(t), H(t + d)), which equal M(H0, H(t+d)) - M(H0, H(t)) by the cocycle identity.
inline double fd_second_variation(const Background& bg, const Metric& H, const Metric& K, int k, double t,
                                  double lambda, const PathSpec& path, double d) {
  const Geodesic g(bg, H, K);
  const Metric Ht = g.at(t);
  PathSpec geo = path;
  geo.kind = PathKind::Geodesic;
  geo.waypoints.clear();
  return richardson_second([&](double e) { return donaldson_M(bg, Ht, g.at(t + e), k, geo, lambda).M; }, d);
}

// ---------------------------------------------------------------------------
// Shared helpers for the form identities.

/// (iF)^j for j = 0..k, index 0 unused (empty).
inline std::vector<EndForm> i_curvature_powers(const Background& bg, const Chern& c, int k) {
  std::vector<EndForm> P;
  P.push_back(EndForm(bg.n(), 0, 0, GridField(bg.grid, bg.rank)));
  if (k == 0) return P;
  const EndForm iF = c.iF();
  P.push_back(iF);
  for (int j = 2; j <= k; ++j) P.push_back(wedge(P.back(), iF));
  return P;
}

/// a ^ b with the convention that index 0 of a power table means the identity.
inline EndForm wedge_power_left(const std::vector<EndForm>& P, int j, const EndForm& b) {
  return j == 0 ? b : wedge(P[j], b);
}
inline EndForm wedge_power_right(const EndForm& a, const std::vector<EndForm>& P, int j) {
  return j == 0 ? a : wedge(a, P[j]);
}

/// e^{-X} Dexp_X[Y] for pointwise Hermitian X, via divided differences in the eigenbasis of X.
inline GridField exp_log_derivative(const GridField& X, const GridField& Y) {
  const int r = X.rank();
  GridField out(X.grid(), r);
  parallel_for(X.points(), [&](std::size_t p) {
    Eigen::SelfAdjointEigenSolver<Mat> es(X.matrix(p));
    const Mat& U = es.eigenvectors();
    const Eigen::VectorXd& l = es.eigenvalues();
    Mat W = U.adjoint() * Y.matrix(p) * U;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const double d = l(i) - l(j);
        W(i, j) *= std::abs(d) < 1e-12 ? 1.0 - 0.5 * d : -std::expm1(-d) / d;
      }
    out.set_matrix(p, U * W * U.adjoint());
  });
  return out;
}

/// Random Hermitian curvature tensor in a unitary frame: F_{ab} = block (b, a) of
/// spread * W + c Id, W a random Hermitian (nr x nr) matrix. This block matrix is
/// exactly the Nakano form, so F_{ab}^dagger = F_{ba}.
inline PointForm random_curvature_tensor(int n, int r, std::mt19937_64& rng, double spread, double c) {
  const Mat N = spread * random_hermitian_matrix(n * r, rng) + c * Mat::Identity(n * r, n * r);
  PointForm F(n, 1, 1, Mat::Zero(r, r));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) F.at({a}, {b}) = N.block(b * r, a * r, r, r);
  return F;
}

// ---------------------------------------------------------------------------
// The two-parameter identity.

/// H(tau, s) = H0^{1/2} exp(tau a + s b + tau s c) H0^{1/2}, with a, b, c
/// Hermitian in the H0-unitary frame.
struct TwoParameterFamily {
  Metric H0;
  GridField a, b, c;
};

struct FamilyPoint {
  Chern chern;
  GridField Vs, Vtau;  ///< h^{-1} dh/ds and h^{-1} dh/dtau
};

inline FamilyPoint family_point(const Background& bg, const TwoParameterFamily& f, double tau, double s) {
  const UnitaryFrame u = UnitaryFrame::of(f.H0.h, bg.eps_pd);
  GridField X = tau * f.a + s * f.b;
  X.add_scaled(f.c, tau * s);
  const GridField e = hermitian_function(X, HermFn::Exp);
  FamilyPoint out;
  out.chern = chern(bg, Metric{hermitian_part(multiply(multiply(u.root, e), u.root))});
  GridField ys = f.b;
  ys.add_scaled(f.c, tau);
  GridField yt = f.a;
  yt.add_scaled(f.c, s);
  // h^{-1} dh = R^{-1} e^{-X} Dexp_X[Y] R with R = H0^{1/2}
  out.Vs = multiply(multiply(u.root_inv, exp_log_derivative(X, ys)), u.root);
  out.Vtau = multiply(multiply(u.root_inv, exp_log_derivative(X, yt)), u.root);
  return out;
}

/// tr{(iF)^k V} as a scalar (k,k)-form.
inline EndForm trace_power_times(const Background& bg, const Chern& c, int k, const GridField& V) {
  const auto P = i_curvature_powers(bg, c, k);
  return trace(right_multiply(P[k], V));
}

inline double integrate_kk(const Background& bg, const EndForm& scalar_kk, int k) {
  return integrate_volume(contract_top(scalar_kk, bg, bg.n() - k), bg).real();
}

struct TwoParameterOptions {
  int k = 2;
  double tau = 0.0, s = 0.4;
  int nodes = 8;
  double fd_step = 1e-4;
  double tol_integrated = 1e-7;
  double tol_pointwise = 1e-7;
  double tol_stokes = 1e-9;
};

/// Measures the identity in three ways: pointwise as (k,k)-forms, the integral
/// of both sides over M, and the integrated consequence
/// d/dtau int_0^1 int_M G_s ds = [int_M G_tau]_{s=0}^{1}.
inline SuiteResult check_two_parameter(const Background& bg, const TwoParameterFamily& fam, const TwoParameterOptions& o) {
  SuiteResult res;
  res.name = "two_parameter_k" + std::to_string(o.k);
  require_degree(bg, o.k);
  const int k = o.k;
  auto Gs = [&](double tau, double s) {
    const FamilyPoint fp = family_point(bg, fam, tau, s);
    return trace_power_times(bg, fp.chern, k, fp.Vs);
  };
  auto Gt = [&](double tau, double s) {
    const FamilyPoint fp = family_point(bg, fam, tau, s);
    return trace_power_times(bg, fp.chern, k, fp.Vtau);
  };
  const double d = o.fd_step;
  // pointwise left side by Richardson differences of the forms
  auto form_derivative = [&](const std::function<EndForm(double)>& g) {
    const EndForm d1 = (1.0 / (2 * d)) * (g(d) - g(-d));
    const EndForm d2 = (1.0 / (4 * d)) * (g(2 * d) - g(-2 * d));
    return (1.0 / 3.0) * (4.0 * d1 - d2);
  };
  const EndForm dGs_dtau = form_derivative([&](double e) { return Gs(o.tau + e, o.s); });
  const EndForm dGt_ds = form_derivative([&](double e) { return Gt(o.tau, o.s + e); });
  const EndForm lhs = dGs_dtau - dGt_ds;

  const FamilyPoint fp = family_point(bg, fam, o.tau, o.s);
  const auto P = i_curvature_powers(bg, fp.chern, k);
  EndForm eta = zero_form(bg.grid, bg.rank, k - 1, k - 1), phi = eta;
  for (int i = 0; i < k; ++i) {
    eta += wedge_power_right(wedge_power_left(P, i, as_form(fp.Vtau)), P, k - 1 - i);
    phi += wedge_power_right(wedge_power_left(P, i, as_form(fp.Vs)), P, k - 1 - i);
  }
  EndForm t1 = trace(right_multiply(dbar(eta), fp.Vs));
  t1 *= I;
  EndForm t2 = trace(right_multiply(chern_del(fp.chern, phi), fp.Vtau));
  t2 *= I;
  const EndForm rhs = Complex(-1.0) * (del(t1) + dbar(t2));

  const double scale = std::max(max_abs(dGs_dtau), max_abs(dGt_ds));
  res.le("pointwise_mismatch_rel", scale > 0.0 ? max_abs(lhs - rhs) / scale : max_abs(lhs - rhs), o.tol_pointwise);
  const double int_l = integrate_kk(bg, lhs, k), int_r = integrate_kk(bg, rhs, k);
  res.le("integral_of_sides_gap", std::abs(int_l - int_r) / std::max(1.0, scale), o.tol_stokes);

  const Quadrature q = gauss_legendre(o.nodes);
  auto I_of = [&](double tau) {
    double acc = 0.0;
    for (std::size_t j = 0; j < q.nodes.size(); ++j) acc += q.weights[j] * integrate_kk(bg, Gs(tau, q.nodes[j]), k);
    return acc;
  };
  const double left = richardson_derivative([&](double e) { return I_of(o.tau + e); }, d);
  const double right = integrate_kk(bg, Gt(o.tau, 1.0), k) - integrate_kk(bg, Gt(o.tau, 0.0), k);
  res.le("integrated_mismatch", std::abs(left - right) / std::max(1.0, std::max(std::abs(left), std::abs(right))),
         o.tol_integrated);
  return res;
}

// ---------------------------------------------------------------------------
// Curvature difference identity.

/// Both sides of (iF_H)^k - (iF_K)^k = sum_i (iF_H)^{k-i} ^ i dbar(h^{-1} d_K h) ^ (iF_K)^{i-1}, h = K^{-1} H.
inline std::pair<EndForm, EndForm> curvature_difference_sides(const Background& bg, const Metric& H,
                                                              const Metric& K, int k) {
  const Chern cH = chern(bg, H), cK = chern(bg, K);
  const auto PH = i_curvature_powers(bg, cH, k), PK = i_curvature_powers(bg, cK, k);
  const GridField h = multiply(cK.h_inv, H.h);
  const GridField h_inv = multiply(cH.h_inv, K.h);
  EndForm D = dbar(left_multiply(h_inv, chern_del(cK, as_form(h))));
  D *= I;
  EndForm rhs = zero_form(bg.grid, bg.rank, k, k);
  for (int i = 1; i <= k; ++i) rhs += wedge_power_right(wedge_power_left(PH, k - i, D), PK, i - 1);
  return {PH[k] - PK[k], std::move(rhs)};
}

inline SuiteResult check_curvature_difference(const Background& bg, const Metric& H, const Metric& K, int k, double tol = 1e-9) {
  SuiteResult res;
  res.name = "curvature_difference_k" + std::to_string(k);
  require_degree(bg, k);
  const auto [lhs, rhs] = curvature_difference_sides(bg, H, K, k);
  // relative to the size of the curvature powers; both sides vanish when H = K
  const double ref = std::pow(std::max(max_abs(curvature(bg, H)), max_abs(curvature(bg, K))), k);
  res.le("pointwise_mismatch_rel", max_abs(lhs - rhs) / ref, tol);
  return res;
}

// ---------------------------------------------------------------------------
// k = 2 integration-by-parts identity.

struct IbpTerms {
  double lhs = 0.0;   ///< int tr{[(iF_H)^2 - (iF_K)^2] h} ^ omega^{n-2}/(n-2)!
  double term1 = 0.0; ///< int tr{iF_H ^ (i d_H h h^{-1/2}) ^ h^{-1/2} dbar h}
  double term2 = 0.0; ///< int tr{(i h^{-1/2} d_K h) ^ iF_K ^ dbar h h^{-1/2}}
};

inline IbpTerms ibp_terms(const Background& bg, const Metric& H, const Metric& K) {
  if (bg.n() < 2) throw ConfigError("the k=2 identity needs n >= 2");
  const Chern cH = chern(bg, H), cK = chern(bg, K);
  const GridField h = multiply(cK.h_inv, H.h);
  // h = K^{-1/2} m K^{1/2}, m = K^{-1/2} H K^{-1/2} Hermitian
  const UnitaryFrame uK = UnitaryFrame::of(K.h, bg.eps_pd);
  const GridField m = hermitian_part(multiply(multiply(uK.root_inv, H.h), uK.root_inv));
  const GridField h_isqrt = multiply(multiply(uK.root_inv, hermitian_function(m, HermFn::InvSqrt, bg.eps_pd)), uK.root);
  const EndForm iFH = cH.iF(), iFK = cK.iF();
  const EndForm dbh = dbar(as_form(h));
  IbpTerms t;
  t.lhs = integrate_kk(bg, trace(right_multiply(wedge(iFH, iFH) - wedge(iFK, iFK), h)), 2);
  EndForm a = right_multiply(chern_del(cH, as_form(h)), h_isqrt);
  a *= I;
  t.term1 = integrate_kk(bg, trace(wedge(wedge(iFH, a), left_multiply(h_isqrt, dbh))), 2);
  EndForm b = left_multiply(h_isqrt, chern_del(cK, as_form(h)));
  b *= I;
  t.term2 = integrate_kk(bg, trace(wedge(wedge(b, iFK), right_multiply(dbh, h_isqrt))), 2);
  return t;
}

inline SuiteResult check_ibp_identity(const Background& bg, const Metric& H, const Metric& K, double tol = 1e-8,
                                       double tol_abs = 1e-10, double residual_tol = 1e-8) {
  SuiteResult res;
  res.name = "k2_integration_by_parts";
  const IbpTerms t = ibp_terms(bg, H, K);
  const double scale = std::max({std::abs(t.lhs), std::abs(t.term1), std::abs(t.term2)});
  if (scale <= tol_abs) {
    res.le("all_terms_abs", scale, tol_abs);
  } else {
    res.le("identity_rel", std::abs(t.lhs - t.term1 - t.term2) / scale, tol);
  }
  const double lam = lambda_k(bg, 2);
  const double rH = residual(bg, H, 2, lam).sup_norm, rK = residual(bg, K, 2, lam).sup_norm;
  if (rH < residual_tol && rK < residual_tol) res.le("lhs_at_solutions_abs", std::abs(t.lhs), tol_abs);
  return res;
}

// ---------------------------------------------------------------------------
// Nakano implication.

struct NakanoOptions {
  int n = 2, r = 2;
  int samples = 1000;
  std::uint64_t seed = 1;
  double spread = 1.0;
  double shift = 1.5;     ///< c in spread * W + c Id
  double oracle_tol = 1e-12;
  double central_c = 1.7;
  double central_tol = 1e-12;
};

struct NakanoReport {
  int accepted = 0, attempts = 0;
  int counterexamples = 0;
  int exempt = 0;                 ///< Nakano-positive, dual-Nakano indefinite
  int exempt_not_strong = 0;      ///< of those, how many also fail strong sigma_2
  double min_margin = 0.0;        ///< smallest strongly-sigma_2 eigenvalue over accepted samples
  double oracle_gap = 0.0;        ///< max relative gap between index sums and forms
  double central_margin = 0.0;    ///< min eigenvalue of the summed forms for F = c Id
};

inline NakanoReport nakano_experiment(const NakanoOptions& o) {
  if (o.n < 2) throw ConfigError("the Nakano experiment needs n >= 2");
  std::mt19937_64 rng(o.seed);
  const Mat g = Mat::Identity(o.n, o.n);
  const Mat norm = xi_norm_form(g, o.r);
  NakanoReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const int D = xi_dimension(o.n, o.r);
  while (rep.accepted < o.samples) {
    ++rep.attempts;
    if (rep.attempts >= 1000 && rep.accepted < rep.attempts / 1000)
      throw ConfigError("Nakano sampler starved: " + std::to_string(rep.accepted) + " accepted of " +
                        std::to_string(rep.attempts));
    const PointForm F = random_curvature_tensor(o.n, o.r, rng, o.spread, o.shift);
    const bool nak = min_eigenvalue_of(nakano_form(F, g)) > 0.0;
    const bool dual = min_eigenvalue_of(dual_nakano_form(F, g)) > 0.0;
    if (!nak) continue;
    PointForm iF = F;
    for (std::size_t c = 0; c < iF.size(); ++c) iF[c] *= I;
    const auto [q1, q2] = strongly_sigma2_forms(iF, g);
    const double margin = std::min(min_relative_eigenvalue(q1, norm), min_relative_eigenvalue(q2, norm));
    if (!dual) {
      ++rep.exempt;
      if (!(margin > 0.0)) ++rep.exempt_not_strong;
      continue;
    }
    ++rep.accepted;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (!(margin > 0.0)) ++rep.counterexamples;
    // index sums against the assembled forms on a random xi
    std::normal_distribution<double> nd;
    PointForm xi(o.n, 0, 1, Mat::Zero(o.r, o.r));
    Vec x(D);
    for (int b = 0; b < o.n; ++b)
      for (int i = 0; i < o.r; ++i)
        for (int j = 0; j < o.r; ++j) {
          const double re = nd(rng);
          const double im = nd(rng);
          xi.at({}, {b})(i, j) = Complex(re, im);
          x((b * o.r + i) * o.r + j) = Complex(re, im);
        }
    const auto [n1, n3] = n1_n3_index_oracle(F, xi);
    const double v1 = x.dot(q1 * x).real(), v3 = x.dot(q2 * x).real();
    rep.oracle_gap = std::max({rep.oracle_gap, std::abs(v1 - n1) / (1.0 + std::abs(n1)),
                               std::abs(v3 - n3) / (1.0 + std::abs(n3))});
  }
  if (rep.accepted == 0) rep.min_margin = 0.0;
  PointForm Fc(o.n, 1, 1, Mat::Zero(o.r, o.r));
  for (int a = 0; a < o.n; ++a) Fc.at({a}, {a}) = o.central_c * Mat::Identity(o.r, o.r);
  for (std::size_t c = 0; c < Fc.size(); ++c) Fc[c] *= I;
  const auto [c1, c2] = strongly_sigma2_forms(Fc, g);
  rep.central_margin = min_relative_eigenvalue(c1 + c2, norm);
  return rep;
}

inline SuiteResult check_nakano_implication(const NakanoOptions& o) {
  SuiteResult res;
  res.name = "nakano_implication";
  const NakanoReport rep = nakano_experiment(o);
  res.ge("samples", rep.accepted, o.samples);
  res.le("counterexamples", rep.counterexamples, 0);
  res.gt("min_strong_sigma2_margin", rep.min_margin, 0.0);
  res.le("index_oracle_gap", rep.oracle_gap, o.oracle_tol);
  // the summed one-sided forms at F = c Id: 2c for n = 2, c (n-1) each in general
  res.le("central_margin_gap", std::abs(rep.central_margin - 2.0 * o.central_c * (o.n - 1)), o.central_tol);
  res.ge("exempt_recorded", rep.exempt, 0);
  res.ge("exempt_not_strong_recorded", rep.exempt_not_strong, 0);
  return res;
}

// ---------------------------------------------------------------------------
// Full run.

struct Tolerances {
  double path = 1e-8;
  double cocycle = 1e-8;
  double scaling = 1e-10;
  double lambda = 1e-8;
  double first_variation = 1e-6;
  double second_variation = 1e-5;
  double curvature_difference = 1e-9;
  double two_parameter_integrated = 1e-7;
  double two_parameter_pointwise = 1e-7;
  double two_parameter_stokes = 1e-9;
  double integration_by_parts = 1e-8;
  double geodesic_bound = 1e-8;
  double sigma_const = 1e-8;
  double oracle = 1e-12;
  double local_min = 1e-10;
  double geometry = 1e-12;
};

struct VerifyConfig {
  int n = 2, N = 16, r = 2, m = 1;
  std::vector<int> ks{1, 2};
  std::uint64_t seed = 20240611;
  double amplitude = 0.2;
  int band = 1;
  int nodes = 8;
  PathKind path = PathKind::Geodesic;  ///< path used by the cocycle and local-min suites
  int pairs = 20;
  int directions = 10;
  int geodesics = 10;
  int t_samples = 11;
  int nakano_samples = 1000;
  int local_trials = 100;
  double local_eps = 0.01;
  double fd_step = 1e-4;
  double tol_scale = 1.0;  ///< multiplies the discretisation-limited tolerances
  Tolerances tol;
  std::vector<std::string> only;  ///< suites to run; empty runs all

  Background background() const { return Background(n, N, r, m); }
  bool wants(const std::string& s) const {
    return only.empty() || std::find(only.begin(), only.end(), s) != only.end();
  }
};

namespace detail {

inline Metric random_metric_for(const Background& bg, const VerifyConfig& c, std::uint64_t salt) {
  return random_metric(bg, c.seed * 1000003ULL + salt, c.amplitude, c.band);
}

inline GridField random_direction(const Background& bg, const Metric& H, const VerifyConfig& c, std::uint64_t salt) {
  return self_adjoint_direction(bg, H, random_hermitian_field(bg.grid, bg.rank, c.seed * 1000003ULL + salt, c.band, 1.0));
}

template <class Fn>
SuiteResult guarded(const std::string& name, Fn&& fn) {
  try {
    SuiteResult r = fn();
    r.name = name;
    return r;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    SuiteResult r;
    r.name = name;
    r.error = e.what();
    return r;
  }
}

}  // namespace detail

inline SuiteResult suite_geometry(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  const GridField f = random_hermitian_field(bg.grid, bg.rank, c.seed + 1, c.band, 1.0);
  const EndForm a = dbar(del(as_form(f))) + del(dbar(as_form(f)));
  res.le("ddbar_anticommute", max_abs(a), c.tol.geometry);
  // single mode e^{2 pi i x^1}: del gives pi i e^{2 pi i x^1} dz^1, dbar the same on dzbar^1
  GridField mode(bg.grid, 1);
  for (std::size_t p = 0; p < bg.grid.points(); ++p) mode(p, 0, 0) = std::exp(Complex(0.0, 2 * pi * bg.grid.coordinate(p, 0)));
  const EndForm dm = del(as_form(mode)), bm = dbar(as_form(mode));
  double gap = 0.0;
  for (std::size_t p = 0; p < bg.grid.points(); ++p) {
    const Complex expect = I * pi * mode(p, 0, 0);
    gap = std::max({gap, std::abs(dm.at({0}, {})(p, 0, 0) - expect), std::abs(bm.at({}, {0})(p, 0, 0) - expect)});
  }
  res.le("single_mode_derivative", gap, c.tol.geometry);
  return res;
}

inline SuiteResult suite_chern_weil(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  for (int k : c.ks) {
    const double a = lambda_analytic(bg, k), v = lambda_k(bg, k);
    res.le("lambda_k" + std::to_string(k) + "_vs_analytic_rel", relative_gap(v, a), c.tol.lambda);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
      worst = std::max(worst, relative_gap(lambda_k(bg, k, detail::random_metric_for(bg, c, 100 + i)), v));
    res.le("lambda_k" + std::to_string(k) + "_metric_invariance_rel", worst, c.tol.lambda);
  }
  if (bg.n() == 2 && bg.level == 1 && bg.kaehler.isIdentity(0.0)) {
    res.le("lambda_1_is_2pi_rel", relative_gap(lambda_k(bg, 1), 2 * pi), c.tol.lambda);
    res.le("lambda_2_is_2pi2_rel", relative_gap(lambda_k(bg, 2), 2 * pi * pi), c.tol.lambda);
  }
  return res;
}

inline SuiteResult suite_path_independence(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  for (int k : c.ks) {
    const double lam = lambda_k(bg, k);
    double worst = 0.0;
    for (int i = 0; i < c.pairs; ++i) {
      const Metric H0 = detail::random_metric_for(bg, c, 200 + 3 * i), H = detail::random_metric_for(bg, c, 201 + 3 * i);
      const Metric W = detail::random_metric_for(bg, c, 202 + 3 * i);
      const double lin = donaldson_M(bg, H0, H, k, {PathKind::Linear, c.nodes, {}}, lam).M;
      const double geo = donaldson_M(bg, H0, H, k, {PathKind::Geodesic, c.nodes, {}}, lam).M;
      const double way = donaldson_M(bg, H0, H, k, {PathKind::Waypoint, c.nodes, {W}}, lam).M;
      worst = std::max({worst, relative_gap(lin, geo), relative_gap(lin, way), relative_gap(geo, way)});
    }
    res.le("k" + std::to_string(k) + "_max_pairwise_spread_rel", worst, c.tol.path * c.tol_scale);
  }
  return res;
}

inline SuiteResult suite_cocycle(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  PathSpec geo{c.path, c.nodes, {}};
  if (c.path == PathKind::Waypoint) geo.waypoints.push_back(detail::random_metric_for(bg, c, 399));
  for (int k : c.ks) {
    const double lam = lambda_k(bg, k);
    double worst = 0.0, worst_scale = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Metric H0 = detail::random_metric_for(bg, c, 300 + 3 * i), H1 = detail::random_metric_for(bg, c, 301 + 3 * i),
                   H2 = detail::random_metric_for(bg, c, 302 + 3 * i);
      const double a = donaldson_M(bg, H0, H1, k, geo, lam).M, b = donaldson_M(bg, H1, H2, k, geo, lam).M,
                   m = donaldson_M(bg, H0, H2, k, geo, lam).M;
      const double scale = std::max({std::abs(a), std::abs(b), std::abs(m)});
      worst = std::max(worst, std::abs(a + b - m) / scale);
      for (double f : {0.5, 2.0})
        worst_scale = std::max(worst_scale, std::abs(donaldson_M(bg, H0, Metric{f * H0.h}, k, geo, lam).M));
    }
    res.le("k" + std::to_string(k) + "_cocycle_rel", worst, c.tol.cocycle * c.tol_scale);
    res.le("k" + std::to_string(k) + "_scaling_abs", worst_scale, c.tol.scaling * c.tol_scale);
  }
  return res;
}

inline SuiteResult suite_variations(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  const PathSpec geo{PathKind::Geodesic, c.nodes, {}};
  for (int k : c.ks) {
    const double lam = lambda_k(bg, k);
    double w1 = 0.0, w2 = 0.0;
    for (int i = 0; i < c.directions; ++i) {
      const Metric H0 = detail::random_metric_for(bg, c, 400 + 4 * i), H = detail::random_metric_for(bg, c, 401 + 4 * i);
      const GridField s = detail::random_direction(bg, H, c, 402 + 4 * i);
      const double exact1 = first_variation(bg, H, s, k, lam);
      w1 = std::max(w1, relative_gap(fd_first_variation(bg, H0, H, s, k, lam, geo, c.fd_step), exact1));
      const Metric K = perturb(bg, H, detail::random_direction(bg, H, c, 403 + 4 * i), 0.5);
      const double t = 0.1 + 0.8 * (i + 0.5) / c.directions;
      const double exact2 = second_variation_geodesic(bg, H, K, k, t);
      w2 = std::max(w2, relative_gap(fd_second_variation(bg, H, K, k, t, lam, geo, c.fd_step), exact2));
    }
    res.le("k" + std::to_string(k) + "_first_variation_rel", w1, c.tol.first_variation * c.tol_scale);
    res.le("k" + std::to_string(k) + "_second_variation_rel", w2, c.tol.second_variation * c.tol_scale);
  }
  // criticality at the constant solution and flatness of central directions
  const Metric Id = Metric::identity(bg);
  for (int k : c.ks) {
    const double lam = lambda_k(bg, k);
    const double v = first_variation(bg, Id, detail::random_direction(bg, Id, c, 499), k, lam);
    res.le("k" + std::to_string(k) + "_first_variation_at_solution_abs", std::abs(v), c.tol.scaling);
  }
  return res;
}

inline SuiteResult suite_geodesic_bound(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  std::vector<double> ts;
  for (int i = 0; i < c.t_samples; ++i) ts.push_back(c.t_samples == 1 ? 0.0 : static_cast<double>(i) / (c.t_samples - 1));
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.geodesics; ++i) {
    const Metric H = detail::random_metric_for(bg, c, 500 + 2 * i);
    const Metric K = perturb(bg, H, detail::random_direction(bg, H, c, 501 + 2 * i), 0.1 + 0.4 * i / std::max(1, c.geodesics));
    worst = std::max(worst, geodesic_derivative_bound_check(bg, H, K, ts).max_violation);
  }
  res.le("max_violation", std::max(worst, 0.0), c.tol.geodesic_bound);
  return res;
}

inline SuiteResult suite_identities(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  const Metric H = detail::random_metric_for(bg, c, 600), K = detail::random_metric_for(bg, c, 601);
  for (int k : c.ks) {
    res.children.push_back(check_curvature_difference(bg, H, K, k, c.tol.curvature_difference * c.tol_scale));
    SuiteResult same = check_curvature_difference(bg, H, H, k, c.tol.curvature_difference);
    same.name += "_equal_metrics";
    res.children.push_back(std::move(same));
  }
  auto field = [&](std::uint64_t salt, double amp) {
    return random_hermitian_field(bg.grid, bg.rank, c.seed * 1000003ULL + salt, c.band, amp);
  };
  for (int k : c.ks) {
    TwoParameterOptions o;
    o.k = k;
    o.nodes = c.nodes;
    o.fd_step = c.fd_step;
    o.tol_integrated = c.tol.two_parameter_integrated * c.tol_scale;
    o.tol_pointwise = c.tol.two_parameter_pointwise * c.tol_scale;
    o.tol_stokes = c.tol.two_parameter_stokes * c.tol_scale;
    const TwoParameterFamily fam{H, field(610, 0.3), field(611, 0.3), field(612, 0.2)};
    res.children.push_back(check_two_parameter(bg, fam, o));
  }
  {
    TwoParameterOptions o;
    o.k = 1;
    o.nodes = c.nodes;
    o.fd_step = c.fd_step;
    const GridField id = GridField::identity(bg.grid, bg.rank);
    const TwoParameterFamily fam{H, 0.3 * id, -0.2 * id, 0.1 * id};
    SuiteResult r = check_two_parameter(bg, fam, o);
    r.name += "_commuting";
    res.children.push_back(std::move(r));
  }
  if (bg.n() >= 2) {
    res.children.push_back(check_ibp_identity(bg, H, K, c.tol.integration_by_parts * c.tol_scale));
    SuiteResult same = check_ibp_identity(bg, H, H, c.tol.integration_by_parts);
    same.name += "_equal_metrics";
    res.children.push_back(std::move(same));
    const Metric Id = Metric::identity(bg);
    SuiteResult scal = check_ibp_identity(bg, Id, Metric{std::exp(0.7) * Id.h}, c.tol.integration_by_parts);
    scal.name += "_scalar_solutions";
    const IbpTerms t = ibp_terms(bg, Id, Metric{std::exp(0.7) * Id.h});
    scal.le("term1_abs", std::abs(t.term1), 1e-10);
    scal.le("term2_abs", std::abs(t.term2), 1e-10);
    res.children.push_back(std::move(scal));
  }
  return res;
}

inline SuiteResult suite_positivity(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  if (bg.n() >= 2) {
    const Chern ch = chern(bg, Metric::identity(bg));
    const PositivityReport rep = positivity(bg, ch, Cone::SigmaK, 2, default_sample(bg.grid));
    // constant model: Q = 2 pi m (n-1) on |xi|^2... for n=2, m=1 this is 2 pi
    const double expect = 2 * pi * bg.level * (bg.n() - 1);
    res.le("constant_sigma2_min_eig_gap", std::abs(rep.global_min - expect), c.tol.sigma_const);
  }
  NakanoOptions o;
  o.n = std::max(2, bg.n());
  o.r = bg.rank;
  o.samples = c.nakano_samples;
  o.seed = c.seed + 700;
  o.oracle_tol = c.tol.oracle;
  res.children.push_back(check_nakano_implication(o));
  return res;
}

inline SuiteResult suite_local_min(const Background& bg, const VerifyConfig& c) {
  SuiteResult res;
  const int k = std::find(c.ks.begin(), c.ks.end(), 2) != c.ks.end() && bg.n() >= 2 ? 2 : c.ks.front();
  const Metric H = Metric::identity(bg);
  const Metric H0 = detail::random_metric_for(bg, c, 800);
  LocalMinOptions o;
  o.k = k;
  o.eps = c.local_eps;
  o.trials = c.local_trials;
  o.seed = c.seed + 801;
  o.band = c.band;
  o.path = {c.path, c.nodes, {}};
  if (c.path == PathKind::Waypoint) o.path.waypoints.push_back(detail::random_metric_for(bg, c, 802));
  const LocalMinReport rep = local_min_experiment(bg, H, H0, o);
  res.ge("min_difference", rep.min_difference, -c.tol.local_min);
  res.gt("min_noncentral_difference", rep.min_noncentral, 0.0);
  LocalMinOptions zero = o;
  zero.eps = 0.0;
  zero.trials = 1;
  res.le("eps0_difference_abs", std::abs(local_min_experiment(bg, H, H0, zero).min_difference), 0.0);
  res.le("central_direction_abs", std::abs(central_difference(bg, H, H0, k, 0.01, o.path)), c.tol.local_min);
  return res;
}

/// Runs every suite; the tree's pass() is the aggregate verdict.
inline SuiteResult run_all(const VerifyConfig& c) {
  const Background bg = c.background();
  for (int k : c.ks) require_degree(bg, k);
  SuiteResult root;
  root.name = "verify";
  struct Entry {
    const char* name;
    SuiteResult (*fn)(const Background&, const VerifyConfig&);
  };
  const Entry entries[] = {
      {"geometry", suite_geometry},         {"chern_weil", suite_chern_weil},
      {"path_independence", suite_path_independence}, {"cocycle", suite_cocycle},
      {"variations", suite_variations},     {"geodesic_bound", suite_geodesic_bound},
      {"identities", suite_identities},     {"positivity", suite_positivity},
      {"local_min", suite_local_min},
  };
  for (const auto& e : entries)
    if (c.wants(e.name)) root.children.push_back(detail::guarded(e.name, [&] { return e.fn(bg, c); }));
  return root;
}

}  // namespace hbl
