// hbl: verify | solve | functional | positivity | report

#include "hbl/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

hbl::RunConfig load(const std::string& path, const std::vector<std::string>& sets, const std::string& out,
                    const std::optional<std::uint64_t>& seed) {
  nlohmann::json doc = path.empty() ? nlohmann::json{{"schema", hbl::config_schema}} : hbl::read_config_document(path);
  for (const auto& s : sets) hbl::apply_override(doc, s);
  if (!out.empty()) doc["output_dir"] = out;
  if (seed) doc["seed"] = *seed;
  return hbl::parse_config(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalised Donaldson functional toolkit on flat tori"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 config error, 2 IO error, 3 failed suite / non-converged solve.\n"
      "HBL_THREADS caps the number of worker threads.");

  std::string config, out, h0, h, run_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "JSON config (schema hbl-config/1)");
    sub->add_option("-o,--out", out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--set", sets, "override a scalar field, e.g. --set background.N=8")->take_all();
  };

  CLI::App* verify = app.add_subcommand("verify", "run every identity suite and write verdict.json");
  common(verify);
  CLI::App* solve = app.add_subcommand("solve", "run the gradient flow; write trace.csv, metric.hbl, solve.json");
  common(solve);
  CLI::App* functional = app.add_subcommand("functional", "evaluate M(H0, H) over the configured paths");
  common(functional);
  functional->add_option("--h0", h0, "reference metric snapshot")->required();
  functional->add_option("--metric", h, "metric snapshot")->required();
  CLI::App* positivity = app.add_subcommand("positivity", "cone margins of a metric for all four cones");
  common(positivity);
  positivity->add_option("--metric", h, "metric snapshot")->required();
  CLI::App* report = app.add_subcommand("report", "collect trace.csv files into plot-ready CSVs");
  report->add_option("run_dir", run_dir, "directory searched for trace.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hbl::exit_config;
  }

  return hbl::run_guarded([&]() -> int {
    if (report->parsed()) return hbl::cmd_report(run_dir);
    const hbl::RunConfig c = load(config, sets, out, seed);
    if (verify->parsed()) {
      const int code = hbl::cmd_verify(c);
      std::cout << "verify: " << (code == 0 ? "PASS" : "FAIL") << " (" << c.output_dir << "/verdict.json)\n";
      return code;
    }
    if (solve->parsed()) {
      const int code = hbl::cmd_solve(c);
      std::cout << "solve: " << (code == 0 ? "converged" : "not converged") << " (" << c.output_dir << ")\n";
      return code;
    }
    if (functional->parsed()) return hbl::cmd_functional(c, h0, h);
    return hbl::cmd_positivity(c, h);
  });
}
