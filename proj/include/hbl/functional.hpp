#pragma once

// The constant lambda_{E,k}, k-omega degrees and slopes of split bundles,
// the generalised Donaldson functional by quadrature along a path of
// metrics, and its first and second variations.

#include "hbl/hessian.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace hbl {

/// Gauss-Legendre rule on [0,1]: nodes ascending, weights summing to 1.
struct Quadrature {
  std::vector<double> nodes, weights;
};

inline Quadrature gauss_legendre(int Q) {
  if (Q < 2) throw ConfigError("quadrature needs at least 2 nodes");
  Quadrature out;
  out.nodes.resize(Q);
  out.weights.resize(Q);
  for (int i = 0; i < (Q + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (Q + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= Q; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = Q * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= Q; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = Q * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 1.0 / ((1.0 - x * x) * dp * dp);  // half of the [-1,1] weight
    out.nodes[i] = 0.5 * (1.0 - x);
    out.nodes[Q - 1 - i] = 0.5 * (1.0 + x);
    out.weights[i] = out.weights[Q - 1 - i] = w;
  }
  return out;
}

/// lambda_{E,k} by Chern-Weil from the metric H.
inline double lambda_k(const Background& bg, int k, const Metric& H) {
  require_degree(bg, k);
  return chern_weil_lambda(bg, psi_k(bg, H, k));
}

/// lambda_{E,k} by Chern-Weil from the background metric.
inline double lambda_k(const Background& bg, int k) { return lambda_k(bg, k, Metric::identity(bg)); }

/// Constant-curvature value (pi m)^k [omega_0^k ^ omega^{n-k}/(n-k)!]/[omega^n/n!],
/// omega_0 = i sum dz^a ^ dzbar^a.
inline double lambda_analytic(const Background& bg, int k) {
  require_degree(bg, k);
  const ScalarForm w0 = kaehler_form(Mat::Identity(bg.n(), bg.n()));
  const ScalarForm p = wedge_power(w0, k, Complex(1.0));
  return std::pow(pi * bg.level, k) * contract_top(p, bg.kaehler).real();
}

// ---------------------------------------------------------------------------
// Split model E = L_{m_1} + ... + L_{m_r}.

/// deg_{k,omega}(L_m) = int ch_k(L_m) ^ omega^{n-k}/(n-k)!, with ch_k = (iF/2pi)^k/k!.
inline double line_degree(const Background& bg, int m, int k) {
  require_degree(bg, k);
  const ScalarForm w0 = kaehler_form(Mat::Identity(bg.n(), bg.n()));
  const double c = contract_top(wedge_power(w0, k, Complex(1.0)), bg.kaehler).real();
  return std::pow(0.5 * m, k) / factorial(k) * c * bg.volume();
}

struct Slope {
  double degree = 0.0;
  double slope = 0.0;        ///< degree / rank
  double normalized = 0.0;   ///< (2 pi)^k k! slope / vol, the scale of lambda
};

inline Slope deg_slope(const Background& bg, std::span<const int> levels, std::span<const std::size_t> subset,
                       int k) {
  if (subset.empty()) throw ConfigError("deg_slope needs a non-empty sub-sum");
  Slope s;
  for (std::size_t i : subset) {
    if (i >= levels.size()) throw ConfigError("sub-sum index out of range");
    s.degree += line_degree(bg, levels[i], k);
  }
  s.slope = s.degree / static_cast<double>(subset.size());
  s.normalized = std::pow(2 * pi, k) * factorial(k) * s.slope / bg.volume();
  return s;
}

enum class Stability { Stable, StrictlySemistable, Unstable };

inline std::string stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::StrictlySemistable: return "strictly_semistable";
    case Stability::Unstable: return "unstable";
  }
  return "?";
}

struct StabilityReport {
  Slope total;
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<Slope> slopes;
  std::vector<std::vector<std::size_t>> destabilizing;  ///< sub-sums with slope > total slope
  Stability verdict = Stability::Stable;
};

/// Compares every proper sub-sum against the whole; `rel` absorbs roundoff in the comparison.
inline StabilityReport stability(const Background& bg, std::span<const int> levels, int k, double rel = 1e-12) {
  const std::size_t r = levels.size();
  if (r == 0 || r > 20) throw ConfigError("split model needs 1..20 line factors");
  std::vector<std::size_t> all(r);
  for (std::size_t i = 0; i < r; ++i) all[i] = i;
  StabilityReport rep;
  rep.total = deg_slope(bg, levels, all, k);
  bool equal = false;
  const double tol = rel * std::max(1.0, std::abs(rep.total.slope));
  for (std::uint32_t mask = 1; mask + 1 < (1u << r); ++mask) {
    std::vector<std::size_t> sub;
    for (std::size_t i = 0; i < r; ++i)
      if (mask & (1u << i)) sub.push_back(i);
    const Slope s = deg_slope(bg, levels, sub, k);
    if (s.slope > rep.total.slope + tol) rep.destabilizing.push_back(sub);
    else if (s.slope >= rep.total.slope - tol) equal = true;
    rep.subsets.push_back(std::move(sub));
    rep.slopes.push_back(s);
  }
  rep.verdict = !rep.destabilizing.empty() ? Stability::Unstable
                : equal                    ? Stability::StrictlySemistable
                                           : Stability::Stable;
  return rep;
}

// ---------------------------------------------------------------------------
// The functional M_{E,k}(H0, H).

enum class PathKind { Linear, Geodesic, Waypoint };

inline std::string path_name(PathKind k) {
  switch (k) {
    case PathKind::Linear: return "linear";
    case PathKind::Geodesic: return "geodesic";
    case PathKind::Waypoint: return "waypoint";
  }
  return "?";
}

inline PathKind parse_path_kind(const std::string& s) {
  if (s == "linear") return PathKind::Linear;
  if (s == "geodesic") return PathKind::Geodesic;
  if (s == "waypoint") return PathKind::Waypoint;
  throw ConfigError("unknown path kind '" + s + "'");
}

struct PathSpec {
  PathKind kind = PathKind::Geodesic;
  int nodes = 8;
  std::vector<Metric> waypoints;  ///< interior metrics, joined by linear segments
};

struct FunctionalReport {
  int k = 0;
  PathKind kind = PathKind::Geodesic;
  int nodes = 0;
  std::size_t segments = 1;
  double M0 = 0.0;
  double logdet_term = 0.0;
  double M = 0.0;
  double lambda = 0.0;
  double M0_imag = 0.0;  ///< imaginary part of the quadrature, a consistency diagnostic
};

/// int tr(Psi_k(H) v) omega^n/n! for the velocity v = H^{-1} dH/ds.
inline Complex psi_pairing(const Background& bg, const Metric& H, const GridField& v, int k) {
  const GridField psi = psi_k(bg, H, k);
  return integrate_volume(multiply(psi, v).trace(), bg);
}

/// Quadrature of int_0^1 int_M tr(Psi_k(H(s)) H(s)^{-1} H'(s)) over one segment.
inline Complex segment_M0(const Background& bg, const Metric& A, const Metric& B, int k, bool geodesic,
                          const Quadrature& q) {
  Complex acc{};
  if (geodesic) {
    const Geodesic geo(bg, A, B);
    const GridField s = geo.s();
    for (std::size_t j = 0; j < q.nodes.size(); ++j)
      acc += q.weights[j] * psi_pairing(bg, geo.at(q.nodes[j]), s, k);
    return acc;
  }
  const GridField dh = B.h - A.h;
  for (std::size_t j = 0; j < q.nodes.size(); ++j) {
    const double s = q.nodes[j];
    Metric Hs{(1.0 - s) * A.h + s * B.h};
    const GridField v = multiply(pointwise_inverse(Hs.h), dh);
    acc += q.weights[j] * psi_pairing(bg, Hs, v, k);
  }
  return acc;
}

/// lambda int log det(H0^{-1} H) omega^n/n!, log det as sums of eigenvalue logs.
inline double logdet_integral(const Background& bg, const Metric& H0, const Metric& H) {
  const auto a = log_det(H.h, 0.0), b = log_det(H0.h, 0.0);
  std::vector<double> d(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) d[p] = a[p] - b[p];
  return integrate_volume(d, bg);
}

inline FunctionalReport donaldson_M(const Background& bg, const Metric& H0, const Metric& H, int k,
                                    const PathSpec& path, double lambda) {
  require_degree(bg, k);
  validate_metric(bg, H0);
  validate_metric(bg, H);
  for (const auto& w : path.waypoints) validate_metric(bg, w);
  const Quadrature q = gauss_legendre(path.nodes);
  FunctionalReport rep;
  rep.k = k;
  rep.kind = path.kind;
  rep.nodes = path.nodes;
  rep.lambda = lambda;
  Complex m0{};
  if (path.kind == PathKind::Waypoint) {
    std::vector<const Metric*> chain{&H0};
    for (const auto& w : path.waypoints) chain.push_back(&w);
    chain.push_back(&H);
    rep.segments = chain.size() - 1;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) m0 += segment_M0(bg, *chain[i], *chain[i + 1], k, false, q);
  } else {
    m0 = segment_M0(bg, H0, H, k, path.kind == PathKind::Geodesic, q);
  }
  rep.M0 = m0.real();
  rep.M0_imag = m0.imag();
  rep.logdet_term = lambda * logdet_integral(bg, H0, H);
  rep.M = rep.M0 - rep.logdet_term;
  return rep;
}

inline FunctionalReport donaldson_M(const Background& bg, const Metric& H0, const Metric& H, int k,
                                    const PathSpec& path = {}) {
  return donaldson_M(bg, H0, H, k, path, lambda_k(bg, k));
}

/// dM/dt along H^{-1} dH/dt = sdot: int tr[(Psi_k(H) - lambda Id) sdot] omega^n/n!.
inline double first_variation(const Background& bg, const Metric& H, const GridField& sdot, int k, double lambda) {
  const GridField psi = psi_k(bg, H, k) - GridField::scalar(bg.grid, bg.rank, lambda);
  return integrate_volume(multiply(psi, sdot).trace(), bg).real();
}

/// d^2/dt^2 M(H0, H(t)) along H(t) = H e^{ts}, s = log H^{-1} K:
/// int omega^{n-k}/(n-k)! ^ tr[sum_i (iF)^i ^ i d_{H(t)} s ^ (iF)^{k-1-i} ^ dbar s].
inline double second_variation_geodesic(const Background& bg, const Metric& H, const Metric& K, int k, double t) {
  require_degree(bg, k);
  const Geodesic geo(bg, H, K);
  const GridField s = geo.s();
  const Chern c = chern(bg, geo.at(t));
  EndForm ds = chern_del(c, as_form(s));
  ds *= I;
  const EndForm dbs = dbar(as_form(s));
  const EndForm iF = c.iF();
  std::vector<EndForm> P;  // P[i] = (iF)^i for i >= 1
  P.push_back(EndForm(bg.n(), 0, 0, GridField(bg.grid, bg.rank)));
  for (int i = 1; i < k; ++i) P.push_back(i == 1 ? iF : wedge(P.back(), iF));
  EndForm acc = zero_form(bg.grid, bg.rank, k, k);
  for (int i = 0; i < k; ++i) {
    EndForm left = i == 0 ? ds : wedge(P[i], ds);
    if (k - 1 - i > 0) left = wedge(left, P[k - 1 - i]);
    acc += wedge(left, dbs);
  }
  return integrate_volume(contract_top(trace(acc), bg, bg.n() - k), bg).real();
}

// ---------------------------------------------------------------------------
// CSV emission.

inline std::string functional_csv_header() { return "k,path_kind,Q,M0,logdet_term,M,lambda"; }

inline std::string functional_csv_row(const FunctionalReport& r) {
  return std::to_string(r.k) + "," + path_name(r.kind) + "," + std::to_string(r.nodes) + "," +
         format_number(r.M0) + "," + format_number(r.logdet_term) + "," + format_number(r.M) + "," +
         format_number(r.lambda);
}

}  // namespace hbl
