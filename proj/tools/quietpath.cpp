// Command-line front end: solve, sweep, compare and evaluate.
// Exit status: 0 when every solve is optimal (and, for compare, the noise
// optimum does not exceed the fuel reference's level), 1 otherwise, 2 on
// usage or configuration errors.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "quietpath/run.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out = "out";
  std::string variant;
  std::string observers;
  std::string controls;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_feas;
  std::optional<double> tol_opt;
  std::optional<int> intervals;
};

quietpath::RunConfig load(const Overrides& o, bool sweep) {
  using namespace quietpath;
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = parse_config(o.config);
  }
  Scenario& s = cfg.scenario;
  if (!o.variant.empty()) s.variant = parse_variant(o.variant);
  if (!o.observers.empty() && !sweep) s.observers = parse_observer_list(o.observers);
  if (o.seed) {
    s.seed = *o.seed;
    cfg.solver.seed = *o.seed;
  }
  if (o.tol_feas) cfg.solver.feasibility_tolerance = *o.tol_feas;
  if (o.tol_opt) cfg.solver.optimality_tolerance = *o.tol_opt;
  if (o.intervals) s.intervals = *o.intervals;
  if (sweep) s.variant = Variant::noise;
  s.validate();
  cfg.solver.validate();
  return cfg;
}

void summarize(const char* command, const quietpath::RunReport& r) {
  std::cout << command << ": " << (r.success ? "ok" : "FAILED");
  if (r.body.contains("result")) {
    const auto& solve = r.body["result"]["solve"];
    std::cout << " status=" << solve["status"].get<std::string>()
              << " objective=" << solve["objective"].dump()
              << " max_error=" << solve["max_error"].dump();
  }
  if (r.body.contains("comparison")) {
    const auto& c = r.body["comparison"];
    std::cout << " J=" << c["J_dB"].dump() << " J1=" << c["J1_dB"].dump();
  }
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-abatement descent trajectories by direct transcription"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Scenario file (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--variant", o.variant, "noise | fuel | noise_fuel_capped | minimax");
    sub->add_option("--observers", o.observers, "grid12 | minimax5 | x:y[,x:y...]");
    sub->add_option("--jobs", o.jobs, "Parallel solves in a sweep")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Seed for the perturbed starts");
    sub->add_option("--tol-feas", o.tol_feas, "Feasibility tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol-opt", o.tol_opt, "Optimality tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--N", o.intervals, "Number of grid intervals")->check(CLI::Range(2, 100000));
  };
  CLI::App* solve = app.add_subcommand("solve", "Solve the configured variant");
  CLI::App* sweep = app.add_subcommand("sweep", "Noise optimum per observer against one fuel reference");
  CLI::App* compare = app.add_subcommand("compare", "Noise optimum versus the fuel-optimal reference");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Simulate a control file and report noise and fuel");
  for (CLI::App* sub : {solve, sweep, compare, evaluate}) add_common(sub);
  evaluate->add_option("--controls", o.controls, "CSV with alpha, delta_x, mu columns")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    using namespace quietpath;
    if (solve->parsed()) {
      const RunReport r = run_solve(load(o, false), o.out);
      summarize("solve", r);
      return r.exit_code();
    }
    if (sweep->parsed()) {
      const RunConfig cfg = load(o, true);
      const auto list = parse_observer_list(o.observers.empty() ? "grid12" : o.observers);
      const RunReport r = run_sweep(cfg, list, o.out, o.jobs);
      summarize("sweep", r);
      std::cout << read_file(fs::path(o.out) / "summary.csv");
      return r.exit_code();
    }
    if (compare->parsed()) {
      const RunReport r = run_compare(load(o, false), o.out);
      summarize("compare", r);
      return r.exit_code();
    }
    if (evaluate->parsed()) {
      const RunReport r = run_evaluate(load(o, false), o.controls, o.out);
      std::cout << "evaluate: " << r.body["observers"].dump()
                << " consumption_kg=" << r.body["consumption_kg"].dump() << '\n';
      return r.exit_code();
    }
  } catch (const quietpath::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
