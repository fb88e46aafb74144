#pragma once

// Run configuration (schema "hbl-config/1"), the five subcommands and the
// per-run manifest. Commands return the process exit code.

#include "hbl/snapshot.hpp"
#include "hbl/verify.hpp"

#include "json.hpp"

#include <Eigen/Core>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace hbl {

inline constexpr const char* config_schema = "hbl-config/1";
inline constexpr const char* hbl_version = "1.0.0";

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_io = 2, exit_failure = 3 };

struct SolverConfig {
  FlowOptions flow;
  std::string start_snapshot;   ///< empty: perturb the identity metric
  double start_amplitude = 0.1; ///< H = Id e^{amplitude s}
  std::uint64_t start_seed = 900;
  int start_band = 1;
};

struct FunctionalConfig {
  std::vector<PathKind> paths{PathKind::Linear, PathKind::Geodesic, PathKind::Waypoint};
  std::string waypoint_snapshot;  ///< empty: a seeded random metric
  double waypoint_amplitude = 0.3;
  std::uint64_t waypoint_seed = 17;
};

struct PositivityConfig {
  int k = 2;
  std::size_t sample = 0;  ///< 0: the default sample (every point for N <= 16)
};

struct RunConfig {
  int n = 2, N = 16, r = 2, m = 1;
  std::vector<int> levels;  ///< optional split levels m_i for the slope report
  int k = 2;
  std::uint64_t seed = 20240611;
  int nodes = 8;
  PathKind path = PathKind::Geodesic;
  std::string output_dir = "runs/default";
  VerifyConfig verify;
  SolverConfig solver;
  FunctionalConfig functional;
  PositivityConfig positivity;

  Background background() const { return Background(n, N, r, m); }
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

using json = nlohmann::json;

class Fields {
public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void no_extras() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError("unknown key " + where_ + "." + it.key());
  }

private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

inline void positive(const std::string& what, double v) {
  if (!(v > 0.0)) throw ConfigError(what + " must be > 0");
}

inline void parse_tolerances(const json& j, Tolerances& t) {
  Fields f(j, "verify.tolerances");
  const std::pair<const char*, double*> items[] = {
      {"path", &t.path},           {"cocycle", &t.cocycle},
      {"scaling", &t.scaling},     {"lambda", &t.lambda},
      {"first_variation", &t.first_variation}, {"second_variation", &t.second_variation},
      {"curvature_difference", &t.curvature_difference},               {"two_parameter_integrated", &t.two_parameter_integrated},
      {"two_parameter_pointwise", &t.two_parameter_pointwise}, {"two_parameter_stokes", &t.two_parameter_stokes},
      {"integration_by_parts", &t.integration_by_parts},           {"geodesic_bound", &t.geodesic_bound},
      {"sigma_const", &t.sigma_const}, {"oracle", &t.oracle},
      {"local_min", &t.local_min}, {"geometry", &t.geometry},
  };
  for (auto [key, ptr] : items) {
    f.get(key, *ptr);
    positive(std::string("verify.tolerances.") + key, *ptr);
  }
  f.no_extras();
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"geometry",   "chern_weil",     "path_independence",
                                              "cocycle",    "variations",     "geodesic_bound",
                                              "identities", "positivity",     "local_min"};
  return names;
}

}  // namespace detail

/// Parses and validates a config document. Throws ConfigError with a
/// message naming the offending field.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::Fields;
  RunConfig c;
  Fields top(j, "config");
  std::string schema;
  top.get("schema", schema);
  if (schema != config_schema) throw ConfigError("config.schema must be \"" + std::string(config_schema) + "\"");
  if (const auto* b = top.child("background")) {
    Fields f(*b, "background");
    f.get("n", c.n);
    f.get("N", c.N);
    f.get("r", c.r);
    f.get("m", c.m);
    f.get("levels", c.levels);
    f.no_extras();
  }
  top.get("k", c.k);
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  if (const auto* p = top.child("path")) {
    Fields f(*p, "path");
    std::string kind = path_name(c.path);
    f.get("kind", kind);
    c.path = parse_path_kind(kind);
    f.get("nodes", c.nodes);
    f.no_extras();
  }
  VerifyConfig& v = c.verify;
  if (const auto* p = top.child("verify")) {
    Fields f(*p, "verify");
    f.get("ks", v.ks);
    f.get("amplitude", v.amplitude);
    f.get("band", v.band);
    f.get("pairs", v.pairs);
    f.get("directions", v.directions);
    f.get("geodesics", v.geodesics);
    f.get("t_samples", v.t_samples);
    f.get("nakano_samples", v.nakano_samples);
    f.get("local_trials", v.local_trials);
    f.get("local_eps", v.local_eps);
    f.get("fd_step", v.fd_step);
    f.get("tol_scale", v.tol_scale);
    f.get("suites", v.only);
    if (const auto* t = f.child("tolerances")) detail::parse_tolerances(*t, v.tol);
    f.no_extras();
  }
  SolverConfig& s = c.solver;
  if (const auto* p = top.child("solver")) {
    Fields f(*p, "solver");
    f.get("tol", s.flow.tol);
    f.get("max_steps", s.flow.max_steps);
    f.get("dt0", s.flow.dt0);
    f.get("growth", s.flow.growth);
    f.get("min_dt", s.flow.min_dt);
    f.get("stability", s.flow.stability);
    f.get("cone_points", s.flow.cone_points);
    f.get("start_snapshot", s.start_snapshot);
    f.get("start_amplitude", s.start_amplitude);
    f.get("start_seed", s.start_seed);
    f.get("start_band", s.start_band);
    f.no_extras();
  }
  if (const auto* p = top.child("functional")) {
    Fields f(*p, "functional");
    std::vector<std::string> kinds;
    f.get("paths", kinds);
    if (!kinds.empty()) {
      c.functional.paths.clear();
      for (const auto& kname : kinds) c.functional.paths.push_back(parse_path_kind(kname));
    }
    f.get("waypoint_snapshot", c.functional.waypoint_snapshot);
    f.get("waypoint_amplitude", c.functional.waypoint_amplitude);
    f.get("waypoint_seed", c.functional.waypoint_seed);
    f.no_extras();
  }
  if (const auto* p = top.child("positivity")) {
    Fields f(*p, "positivity");
    f.get("k", c.positivity.k);
    f.get("sample", c.positivity.sample);
    f.no_extras();
  }
  top.no_extras();

  // invariants
  if (c.n < 1 || c.n > 3) throw ConfigError("background.n must satisfy 1 <= n <= 3");
  if (c.N < 8 || !is_power_of_two(c.N)) throw ConfigError("background.N must be a power of two >= 8");
  if (c.r < 1) throw ConfigError("background.r must be >= 1");
  if (c.k < 1 || c.k > c.n) throw ConfigError("k must satisfy 1 <= k <= n (k=" + std::to_string(c.k) +
                                              ", n=" + std::to_string(c.n) + ")");
  if (!c.levels.empty() && static_cast<int>(c.levels.size()) != c.r)
    throw ConfigError("background.levels must have r entries");
  if (c.nodes < 1) throw ConfigError("path.nodes must be >= 1");
  if (v.ks.empty()) throw ConfigError("verify.ks must not be empty");
  for (int k : v.ks)
    if (k < 1 || k > c.n) throw ConfigError("verify.ks entries must satisfy 1 <= k <= n");
  if (c.positivity.k < 1 || c.positivity.k > c.n) throw ConfigError("positivity.k must satisfy 1 <= k <= n");
  for (const auto& name : v.only)
    if (std::find(detail::suite_names().begin(), detail::suite_names().end(), name) == detail::suite_names().end())
      throw ConfigError("unknown suite '" + name + "' in verify.suites");
  detail::positive("verify.amplitude", v.amplitude);
  detail::positive("verify.fd_step", v.fd_step);
  detail::positive("verify.tol_scale", v.tol_scale);
  detail::positive("verify.local_eps", v.local_eps);
  detail::positive("solver.tol", s.flow.tol);
  detail::positive("solver.min_dt", s.flow.min_dt);
  detail::positive("solver.start_amplitude", s.start_amplitude);
  if (v.band < 1 || v.pairs < 1 || v.directions < 1 || v.geodesics < 1 || v.t_samples < 1 ||
      v.nakano_samples < 1 || v.local_trials < 1)
    throw ConfigError("verify sample counts and band must be >= 1");
  if (s.flow.max_steps < 0) throw ConfigError("solver.max_steps must be >= 0");
  if (!(s.flow.growth >= 1.0)) throw ConfigError("solver.growth must be >= 1");
  if (s.flow.dt0 < 0.0 || s.flow.stability < 0.0) throw ConfigError("solver.dt0 and solver.stability must be >= 0");
  if (c.functional.paths.empty()) throw ConfigError("functional.paths must not be empty");

  v.n = c.n;
  v.N = c.N;
  v.r = c.r;
  v.m = c.m;
  v.seed = c.seed;
  v.nodes = c.nodes;
  v.path = c.path;
  s.flow.k = c.k;
  c.background();  // throws on an invalid stage
  return c;
}

/// Canonical JSON form of a parsed config, used for hashing and the manifest.
inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["schema"] = config_schema;
  j["background"] = {{"n", c.n}, {"N", c.N}, {"r", c.r}, {"m", c.m}};
  if (!c.levels.empty()) j["background"]["levels"] = c.levels;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["path"] = {{"kind", path_name(c.path)}, {"nodes", c.nodes}};
  const VerifyConfig& v = c.verify;
  const Tolerances& t = v.tol;
  j["verify"] = {{"ks", v.ks},
                 {"amplitude", v.amplitude},
                 {"band", v.band},
                 {"pairs", v.pairs},
                 {"directions", v.directions},
                 {"geodesics", v.geodesics},
                 {"t_samples", v.t_samples},
                 {"nakano_samples", v.nakano_samples},
                 {"local_trials", v.local_trials},
                 {"local_eps", v.local_eps},
                 {"fd_step", v.fd_step},
                 {"tol_scale", v.tol_scale},
                 {"suites", v.only},
                 {"tolerances",
                  {{"path", t.path},
                   {"cocycle", t.cocycle},
                   {"scaling", t.scaling},
                   {"lambda", t.lambda},
                   {"first_variation", t.first_variation},
                   {"second_variation", t.second_variation},
                   {"curvature_difference", t.curvature_difference},
                   {"two_parameter_integrated", t.two_parameter_integrated},
                   {"two_parameter_pointwise", t.two_parameter_pointwise},
                   {"two_parameter_stokes", t.two_parameter_stokes},
                   {"integration_by_parts", t.integration_by_parts},
                   {"geodesic_bound", t.geodesic_bound},
                   {"sigma_const", t.sigma_const},
                   {"oracle", t.oracle},
                   {"local_min", t.local_min},
                   {"geometry", t.geometry}}}};
  const SolverConfig& s = c.solver;
  j["solver"] = {{"tol", s.flow.tol},           {"max_steps", s.flow.max_steps},
                 {"dt0", s.flow.dt0},           {"growth", s.flow.growth},
                 {"min_dt", s.flow.min_dt},     {"stability", s.flow.stability},
                 {"cone_points", s.flow.cone_points}, {"start_snapshot", s.start_snapshot},
                 {"start_amplitude", s.start_amplitude}, {"start_seed", s.start_seed},
                 {"start_band", s.start_band}};
  nlohmann::ordered_json paths = nlohmann::ordered_json::array();
  for (PathKind p : c.functional.paths) paths.push_back(path_name(p));
  j["functional"] = {{"paths", paths},
                     {"waypoint_snapshot", c.functional.waypoint_snapshot},
                     {"waypoint_amplitude", c.functional.waypoint_amplitude},
                     {"waypoint_seed", c.functional.waypoint_seed}};
  j["positivity"] = {{"k", c.positivity.k}, {"sample", c.positivity.sample}};
  return j;
}

/// Applies "a.b.c=value" overrides to a raw config document. Values parse as
/// JSON when possible, otherwise as strings. Only scalar fields may be set.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  if (value.is_structured()) throw ConfigError("overrides only set scalar fields: " + key);
  nlohmann::json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    nlohmann::json& next = (*node)[parts[i]];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError("override path crosses a non-object: " + key);
    node = &next;
  }
  nlohmann::json& leaf = (*node)[parts.back()];
  if (leaf.is_structured()) throw ConfigError("overrides only set scalar fields: " + key);
  leaf = value;
}

inline nlohmann::json read_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers.

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  const std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw IoError("cannot create output directory " + dir);
  // probe writability up front so no command leaves a partial run behind
  const auto probe = p / ".write_probe";
  {
    std::ofstream t(probe);
    if (!t) throw IoError("output directory is not writable: " + dir);
  }
  std::filesystem::remove(probe, ec);
  return p;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_file(path, j.dump(2) + "\n");
}

struct RunContext {
  std::string command;
  std::filesystem::path out;
  nlohmann::ordered_json config;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  std::vector<std::string> outputs;

  void time(const std::string& what, std::chrono::steady_clock::time_point t0) {
    timings[what] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void write(const std::string& name, const std::string& bytes) {
    write_file(out / name, bytes);
    outputs.push_back(name);
  }

  /// manifest.json: config hash, versions, timings. Timings vary run to run;
  /// every other output is a pure function of the config.
  void manifest(int exit_code) const {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["config_sha256"] = sha256_hex(config.dump());
    m["config"] = config;
    m["exit_code"] = exit_code;
    m["outputs"] = outputs;
    m["versions"] = {{"hbl", hbl_version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__},
                     {"cxx_standard", static_cast<long>(__cplusplus)}};
    m["threads"] = thread_count();
    nlohmann::ordered_json t = timings;
    t["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m["timings"] = t;
    write_json(out / "manifest.json", m);
  }
};

inline RunContext make_context(const std::string& command, const RunConfig& c) {
  RunContext ctx;
  ctx.command = command;
  ctx.config = config_to_json(c);
  ctx.out = prepare_output_dir(c.output_dir);
  return ctx;
}

// ---------------------------------------------------------------------------
// Commands.

inline int cmd_verify(const RunConfig& c) {
  RunContext ctx = make_context("verify", c);
  const auto t0 = std::chrono::steady_clock::now();
  const SuiteResult res = run_all(c.verify);
  ctx.time("verify_seconds", t0);
  ctx.write("verdict.json", res.to_json().dump(2) + "\n");
  const int code = res.pass() ? exit_ok : exit_failure;
  ctx.manifest(code);
  return code;
}

inline Metric start_metric(const Background& bg, const RunConfig& c) {
  if (!c.solver.start_snapshot.empty()) return load_metric(c.solver.start_snapshot, bg);
  const Metric Id = Metric::identity(bg);
  const GridField s = self_adjoint_direction(
      bg, Id, random_hermitian_field(bg.grid, bg.rank, c.solver.start_seed, c.solver.start_band, 1.0));
  return perturb(bg, Id, s, c.solver.start_amplitude);
}

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = trace_csv_header() + "\n";
  for (const auto& r : trace) out += trace_csv_row(r) + "\n";
  return out;
}

inline int cmd_solve(const RunConfig& c) {
  RunContext ctx = make_context("solve", c);
  const Background bg = c.background();
  const Metric H = start_metric(bg, c);
  const auto t0 = std::chrono::steady_clock::now();
  const SolveReport rep = solve(bg, H, c.solver.flow);
  ctx.time("solve_seconds", t0);
  ctx.write("trace.csv", trace_csv(rep.trace));
  save_metric(ctx.out / "metric.hbl", bg, rep.state.H);
  ctx.outputs.push_back("metric.hbl");
  ctx.outputs.push_back("metric.hbl.json");
  nlohmann::ordered_json j;
  j["converged"] = rep.converged;
  j["reason"] = rep.reason;
  j["k"] = c.k;
  j["lambda"] = rep.state.lambda;
  j["iterations"] = rep.state.iter;
  j["rejected"] = rep.state.rejected;
  j["M"] = rep.state.M_value;
  j["residual_sup"] = rep.state.residual_sup;
  j["residual_l2"] = rep.state.residual_l2;
  j["cone_margin"] = rep.state.cone_margin;
  j["monotone"] = trace_monotone(rep.trace);
  j["dt_max"] = rep.state.dt_max;
  ctx.write("solve.json", j.dump(2) + "\n");
  const int code = rep.converged ? exit_ok : exit_failure;
  ctx.manifest(code);
  return code;
}

inline int cmd_functional(const RunConfig& c, const std::string& h0_path, const std::string& h_path) {
  const Background bg = c.background();
  if (h0_path.empty() || h_path.empty()) throw ConfigError("functional needs --h0 and --metric snapshots");
  const Metric H0 = load_metric(h0_path, bg), H = load_metric(h_path, bg);
  RunContext ctx = make_context("functional", c);
  const double lambda = lambda_k(bg, c.k);
  std::string csv = functional_csv_header() + "\n";
  const auto t0 = std::chrono::steady_clock::now();
  for (PathKind kind : c.functional.paths) {
    PathSpec spec{kind, c.nodes, {}};
    if (kind == PathKind::Waypoint)
      spec.waypoints.push_back(c.functional.waypoint_snapshot.empty()
                                   ? random_metric(bg, c.functional.waypoint_seed, c.functional.waypoint_amplitude, 1)
                                   : load_metric(c.functional.waypoint_snapshot, bg));
    csv += functional_csv_row(donaldson_M(bg, H0, H, c.k, spec, lambda)) + "\n";
  }
  ctx.time("functional_seconds", t0);
  ctx.write("functional.csv", csv);
  if (!c.levels.empty()) {
    const StabilityReport st = stability(bg, c.levels, c.k);
    nlohmann::ordered_json j;
    j["levels"] = c.levels;
    j["k"] = c.k;
    j["classification"] = stability_name(st.verdict);
    ctx.write("stability.json", j.dump(2) + "\n");
  }
  ctx.manifest(exit_ok);
  return exit_ok;
}

inline int cmd_positivity(const RunConfig& c, const std::string& h_path) {
  const Background bg = c.background();
  if (h_path.empty()) throw ConfigError("positivity needs --metric");
  const Metric H = load_metric(h_path, bg);
  RunContext ctx = make_context("positivity", c);
  const Chern ch = chern(bg, H);
  const auto sample = c.positivity.sample == 0 ? default_sample(bg.grid) : strided_sample(bg.grid, c.positivity.sample);
  std::string csv = "cone,k,point,min_eig\n";
  nlohmann::ordered_json cones = nlohmann::ordered_json::array();
  const auto t0 = std::chrono::steady_clock::now();
  for (Cone cone : {Cone::SigmaK, Cone::StronglySigma2, Cone::Nakano, Cone::DualNakano}) {
    if (cone == Cone::StronglySigma2 && bg.n() < 2) continue;
    const PositivityReport rep = positivity(bg, ch, cone, c.positivity.k, sample);
    cones.push_back({{"cone", cone_name(cone)},
                     {"k", rep.k},
                     {"points", rep.points.size()},
                     {"global_min", rep.global_min},
                     {"positive", rep.positive}});
    for (std::size_t i = 0; i < rep.points.size(); ++i)
      csv += cone_name(cone) + "," + std::to_string(rep.k) + "," + std::to_string(rep.points[i]) + "," +
             format_number(rep.min_eig[i]) + "\n";
  }
  ctx.time("positivity_seconds", t0);
  ctx.write("positivity.json", nlohmann::ordered_json{{"cones", cones}}.dump(2) + "\n");
  ctx.write("positivity.csv", csv);
  ctx.manifest(exit_ok);
  return exit_ok;
}

/// Collects every trace.csv under run_dir into three long-format CSVs
/// (run, iter, value): M, residual and cone margin against iteration.
inline int cmd_report(const std::string& run_dir) {
  const std::filesystem::path root(run_dir);
  if (!std::filesystem::is_directory(root)) throw IoError("no such run directory " + run_dir);
  std::vector<std::filesystem::path> traces;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "trace.csv") traces.push_back(e.path());
  if (traces.empty()) throw IoError("no trace.csv under " + run_dir);
  std::sort(traces.begin(), traces.end());
  std::string m = "run,iter,M\n", res = "run,iter,residual_sup,residual_l2\n", cone = "run,iter,cone_margin\n";
  for (const auto& t : traces) {
    std::string run = std::filesystem::relative(t.parent_path(), root).generic_string();
    if (run.empty() || run == ".") run = ".";
    std::ifstream in(t);
    if (!in) throw IoError("cannot read " + t.string());
    std::string line;
    std::getline(in, line);
    if (line != trace_csv_header()) throw IoError("unexpected trace header in " + t.string());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() != 6) throw IoError("malformed trace row in " + t.string());
      m += run + "," + f[0] + "," + f[2] + "\n";
      res += run + "," + f[0] + "," + f[3] + "," + f[4] + "\n";
      cone += run + "," + f[0] + "," + f[5] + "\n";
    }
  }
  write_file(root / "report_M.csv", m);
  write_file(root / "report_residual.csv", res);
  write_file(root / "report_cone_margin.csv", cone);
  return exit_ok;
}

/// Maps library errors onto exit codes, printing the message to stderr.
template <class Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace hbl
