#pragma once

// Gradient flow H^{-1} dH/dt = -(Psi_k(H) - lambda Id) descending M_{E,k},
// by explicit exponential Euler steps with a monotone test on M.

#include "hbl/functional.hpp"

#include <limits>
#include <string>
#include <vector>

namespace hbl {

struct FlowOptions {
  int k = 2;
  double tol = 1e-6;                ///< stop once sup |Psi_k - lambda|_H < tol
  int max_steps = 5000;             ///< accepted-step budget
  double dt0 = 0.0;                 ///< 0: 0.1 / sup|Psi_k - lambda|
  double growth = 1.25;
  double min_dt = 1e-12;
  double stability = 1.8;           ///< dt <= stability / rho, rho the stiffest grid mode's rate; 0 disables
  std::size_t cone_points = 16;     ///< strided sample for the sigma_k margin, 0 disables
};

struct FlowState {
  Metric H;
  int iter = 0;                     ///< accepted steps
  int rejected = 0;
  double M_value = 0.0;             ///< M(H_start, H), accumulated step by step
  double residual_sup = 0.0;
  double residual_l2 = 0.0;
  double dt = 0.0;                  ///< step size to try next
  double last_dt = 0.0;             ///< step size of the last accepted step
  double cone_margin = 0.0;
  double trace_drift = 0.0;         ///< mean tr log h change of the last step before re-centering
  bool monotone_ok = true;
  double lambda = 0.0;
  double dt_max = std::numeric_limits<double>::infinity();
  GridField R;                      ///< Psi_k(H) - lambda Id
  UnitaryFrame frame;               ///< H-unitary frame of H
};

namespace detail {

inline double mean_log_det(const GridField& h) {
  const auto ld = log_det(h, 0.0);
  return pairwise_mean(std::span<const double>(ld));
}

/// h e^{-c/r} with c the grid mean of tr log h.
inline double recenter(GridField& h) {
  const double c = mean_log_det(h);
  if (c != 0.0) h *= Complex(std::exp(-c / h.rank()));
  return c;
}

inline double cone_margin(const Background& bg, const Chern& c, int k, std::size_t points) {
  if (points == 0) return std::numeric_limits<double>::quiet_NaN();
  const auto sample = strided_sample(bg.grid, points);
  return positivity(bg, c, Cone::SigmaK, k, sample).global_min;
}

inline void refresh(const Background& bg, FlowState& st, const GridField& psi) {
  st.frame = UnitaryFrame::of(st.H.h, bg.eps_pd);
  Residual res = residual_of(bg, st.H.h, psi, st.lambda, st.frame);
  st.R = std::move(res.R);
  st.residual_sup = res.sup_norm;
  st.residual_l2 = res.l2_norm;
}

}  // namespace detail

/// Decay rate of the highest non-Nyquist mode under the linearised flow at H:
/// sup|Psi_k(H e^{e phi}) - Psi_k(H e^{-e phi})| / (2 e sup|phi|), phi = cos(2 pi w sum x_d) Id.
inline double stiffest_rate(const Background& bg, const Metric& H, int k) {
  const int w = bg.N() / 2 - 1;
  if (w < 1) return 0.0;
  GridField phi(bg.grid, bg.rank);
  for (std::size_t p = 0; p < bg.grid.points(); ++p) {
    int sum = 0;
    for (int d = 0; d < bg.grid.real_dims(); ++d) sum += bg.grid.index(p, d);
    const double v = std::cos(2 * pi * w * static_cast<double>(sum % bg.N()) / bg.N());
    for (int i = 0; i < bg.rank; ++i) phi(p, i, i) = v;
  }
  const double e = 1e-4;
  const GridField up = psi_k(bg, Metric{multiply(H.h, hermitian_function(e * phi, HermFn::Exp))}, k);
  const GridField down = psi_k(bg, Metric{multiply(H.h, hermitian_function((-e) * phi, HermFn::Exp))}, k);
  return (up - down).sup_frobenius() / (2 * e * phi.sup_frobenius());
}

/// Start state: re-centred metric, residual, lambda and the initial step size.
inline FlowState flow_start(const Background& bg, const Metric& H, const FlowOptions& opt) {
  require_degree(bg, opt.k);
  if (!(opt.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (opt.max_steps < 0) throw ConfigError("solver step budget must be >= 0");
  if (!(opt.growth >= 1.0) || !(opt.min_dt > 0.0)) throw ConfigError("invalid step-size controls");
  validate_metric(bg, H);
  FlowState st;
  st.H = H;
  detail::recenter(st.H.h);
  st.lambda = lambda_k(bg, opt.k);
  const Chern c = chern(bg, st.H);
  detail::refresh(bg, st, psi_k(bg, c, opt.k));
  st.cone_margin = detail::cone_margin(bg, c, opt.k, opt.cone_points);
  if (opt.stability > 0.0) {
    const double rho = stiffest_rate(bg, st.H, opt.k);
    if (rho > 0.0) st.dt_max = opt.stability / rho;
  }
  st.dt = opt.dt0 > 0.0 ? opt.dt0 : (st.residual_sup > 0.0 ? 0.1 / st.residual_sup : 1.0);
  st.dt = std::min(st.dt, st.dt_max);
  return st;
}

/// One accepted step: H <- H exp(-dt Sym_H R), halving dt until M decreases.
/// Throws StallError when dt drops below min_dt.
inline FlowState flow_step(const Background& bg, const FlowState& st, const FlowOptions& opt) {
  if (st.residual_sup == 0.0) return st;
  const UnitaryFrame& u = st.frame;
  const GridField Rf = hermitian_part(u.to_frame(st.R));
  // f(0) = int tr(R S) with S = -dt s, s the H-self-adjoint part of R
  std::vector<double> sq(bg.grid.points());
  {
    const GridField rs = multiply(u.to_frame(st.R), Rf).trace();
    for (std::size_t p = 0; p < sq.size(); ++p) sq[p] = rs(p, 0, 0).real();
  }
  const double rr = integrate_volume(sq, bg);
  const GridField s = u.from_frame(Rf);
  const double before = detail::mean_log_det(st.H.h);

  FlowState next = st;
  double dt = st.dt;
  int rejected = 0;
  while (true) {
    if (dt < opt.min_dt)
      throw StallError("flow stalled: dt " + format_number(dt) + " below " + format_number(opt.min_dt) +
                       " at step " + std::to_string(st.iter) + ", residual " + format_number(st.residual_sup));
    bool ok = false;
    try {
      const GridField e = hermitian_function((-dt) * Rf, HermFn::Exp);
      Metric cand{hermitian_part(multiply(multiply(u.root, e), u.root))};
      const double drift = detail::mean_log_det(cand.h) - before;
      detail::recenter(cand.h);
      const Chern c = chern(bg, cand);
      const GridField psi = psi_k(bg, c, opt.k);
      FlowState trial = st;
      trial.H = std::move(cand);
      detail::refresh(bg, trial, psi);
      const GridField ps = multiply(trial.R, s).trace();
      for (std::size_t p = 0; p < sq.size(); ++p) sq[p] = ps(p, 0, 0).real();
      // trapezoid along the geodesic H e^{-sigma dt s}, sigma in [0,1]
      const double dM = -0.5 * dt * (rr + integrate_volume(sq, bg));
      if (dM < 0.0 || trial.residual_sup < opt.tol) {
        trial.M_value = st.M_value + dM;
        trial.monotone_ok = st.monotone_ok && !(dM > 0.0);
        trial.trace_drift = drift;
        trial.cone_margin = detail::cone_margin(bg, c, opt.k, opt.cone_points);
        next = std::move(trial);
        ok = true;
      }
    } catch (const DegenerateMetricError&) {
    }
    if (ok) break;
    ++rejected;
    dt *= 0.5;
  }
  next.iter = st.iter + 1;
  next.rejected = st.rejected + rejected;
  next.last_dt = dt;
  next.dt = std::min(dt * opt.growth, st.dt_max);
  return next;
}

struct TraceRow {
  int iter = 0;
  double dt = 0.0, M = 0.0, residual_sup = 0.0, residual_l2 = 0.0, cone_margin = 0.0;
};

inline std::string trace_csv_header() { return "iter,dt,M,residual_sup,residual_l2,cone_margin"; }

inline std::string trace_csv_row(const TraceRow& r) {
  return std::to_string(r.iter) + "," + format_number(r.dt) + "," + format_number(r.M) + "," +
         format_number(r.residual_sup) + "," + format_number(r.residual_l2) + "," + format_number(r.cone_margin);
}

struct SolveReport {
  FlowState state;
  bool converged = false;
  std::string reason;  ///< converged | budget | stall
  std::vector<TraceRow> trace;
};

/// Runs flow_step until the residual drops below tol or the budget is spent.
/// Row 0 is the start; row i the state after accepted step i with the dt it used.
inline SolveReport solve(const Background& bg, const Metric& H, const FlowOptions& opt) {
  SolveReport rep;
  FlowState st = flow_start(bg, H, opt);
  auto row = [&](const FlowState& s, double dt) {
    rep.trace.push_back({s.iter, dt, s.M_value, s.residual_sup, s.residual_l2, s.cone_margin});
  };
  row(st, 0.0);
  while (!(st.residual_sup < opt.tol) && st.iter < opt.max_steps) {
    try {
      st = flow_step(bg, st, opt);
      row(st, st.last_dt);
    } catch (const StallError& e) {
      rep.reason = std::string("stall: ") + e.what();
      break;
    }
  }
  rep.converged = st.residual_sup < opt.tol;
  if (rep.converged) rep.reason = "converged";
  else if (rep.reason.empty()) rep.reason = "budget";
  rep.state = std::move(st);
  return rep;
}

/// True when M never increases between consecutive accepted steps.
inline bool trace_monotone(const std::vector<TraceRow>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i].M > trace[i - 1].M) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Comparing solutions.

struct GaugeComparison {
  double scalar_distance = 0.0;    ///< sup |h1 - e^a h2|, best constant a from mean log det
  double constant_distance = 0.0;  ///< sup |h2^{-1} h1 - mean|, zero iff h1 = h2 c for a constant c
};

inline GaugeComparison compare_gauge(const Metric& A, const Metric& B) {
  GaugeComparison out;
  const double a = (detail::mean_log_det(A.h) - detail::mean_log_det(B.h)) / A.rank();
  GridField scaled = B.h;
  scaled *= Complex(std::exp(a));
  out.scalar_distance = (A.h - scaled).sup_frobenius();
  const GridField q = multiply(pointwise_inverse(B.h), A.h);
  out.constant_distance = (q - GridField::constant(q.grid(), grid_mean_matrix(q))).sup_frobenius();
  return out;
}

// ---------------------------------------------------------------------------
// Local minimality around a solution.

struct LocalMinOptions {
  int k = 2;
  double eps = 0.01;
  int trials = 100;
  std::uint64_t seed = 1;
  int band = 1;
  PathSpec path{};
};

struct LocalMinTrial {
  double difference = 0.0;  ///< M(H0, H~) - M(H0, H)
  double sup_s = 0.0, sup_derivatives = 0.0;
  bool central = false;
};

struct LocalMinReport {
  double base = 0.0;  ///< M(H0, H)
  std::vector<LocalMinTrial> trials;
  double min_difference = 0.0;
  double min_noncentral = 0.0;
};

/// Random H~ = H e^{s} with s scaled so that sup|s|_H and
/// sup(|d_H s|_H + |dbar d_H s|_H) are both 0.99 eps (inside B_{H,eps}).
inline LocalMinReport local_min_experiment(const Background& bg, const Metric& H, const Metric& H0,
                                           const LocalMinOptions& opt) {
  require_degree(bg, opt.k);
  if (opt.eps < 0.0 || opt.trials < 0) throw ConfigError("local minimality needs eps >= 0 and trials >= 0");
  const double lambda = lambda_k(bg, opt.k);
  LocalMinReport rep;
  rep.base = donaldson_M(bg, H0, H, opt.k, opt.path, lambda).M;
  rep.min_difference = rep.min_noncentral = std::numeric_limits<double>::infinity();
  for (int t = 0; t < opt.trials; ++t) {
    const GridField a = random_hermitian_field(bg.grid, bg.rank, opt.seed + 7919 * t, opt.band, 1.0);
    const GridField s = self_adjoint_direction(bg, H, a);
    Perturbation pb = perturbation(bg, H, s);
    const double size = std::max(pb.sup_s, pb.sup_derivatives);
    LocalMinTrial tr;
    double scale = size > 0.0 ? 0.99 * opt.eps / size : 0.0;
    tr.sup_s = scale * pb.sup_s;
    tr.sup_derivatives = scale * pb.sup_derivatives;
    tr.central = pb.sup_derivatives <= 1e-12 * std::max(1.0, pb.sup_s);
    const Metric Ht = perturb(bg, H, s, scale);
    tr.difference = scale == 0.0 ? 0.0 : donaldson_M(bg, H0, Ht, opt.k, opt.path, lambda).M - rep.base;
    rep.min_difference = std::min(rep.min_difference, tr.difference);
    if (!tr.central) rep.min_noncentral = std::min(rep.min_noncentral, tr.difference);
    rep.trials.push_back(tr);
  }
  if (rep.trials.empty()) rep.min_difference = rep.min_noncentral = 0.0;
  return rep;
}

/// Same trial but along s = c Id (a flat direction).
inline double central_difference(const Background& bg, const Metric& H, const Metric& H0, int k, double c,
                                 const PathSpec& path = {}) {
  const double lambda = lambda_k(bg, k);
  const Metric Ht{std::exp(c) * H.h};
  return donaldson_M(bg, H0, Ht, k, path, lambda).M - donaldson_M(bg, H0, H, k, path, lambda).M;
}

}  // namespace hbl
