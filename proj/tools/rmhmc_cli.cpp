#include "experiment.hpp"
#include "verification.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace rmhmc::app;

namespace {

// Flag values land here first; only flags the user actually passed are
// applied on top of the config file.
struct Overrides {
  std::string config;
  std::string model, solver, integrator, out, sweep, heart_csv;
  double eps{0}, delta{0}, kappa{0}, corruption{0};
  int steps{0};
  long samples{0}, burnin{0}, points{0};
  std::uint64_t seed{0};
  bool synthetic_fallback{false};
  bool ergodicity{false};
};

void add_experiment_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Config file (flags override its values)");
  cmd->add_option("--model", o.model, "banana | funnel | student-t | logistic");
  cmd->add_option("--eps", o.eps, "Integrator step size");
  cmd->add_option("--steps", o.steps, "Integration steps per trajectory");
  cmd->add_option("--delta", o.delta, "Convergence threshold");
  cmd->add_option("--solver", o.solver, "fp | newton | newton-both");
  cmd->add_option("--integrator", o.integrator, "leapfrog | glf | midpoint");
  cmd->add_option("--samples", o.samples, "Chain length");
  cmd->add_option("--burnin", o.burnin, "Burn-in transitions");
  cmd->add_option("--points", o.points, "Test points for per-trajectory diagnostics");
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--sweep", o.sweep, "Comma-separated thresholds");
  cmd->add_option("--kappa", o.kappa, "Tuner target digits of similarity");
  cmd->add_option("--heart-csv", o.heart_csv, "Heart dataset for the logistic model");
  cmd->add_flag("--synthetic-fallback", o.synthetic_fallback,
                "Use synthetic logistic data when --heart-csv is missing");
  cmd->add_option("--ergodicity", o.ergodicity, "Chain-vs-reference metrics in diagnose (true/false)");
  cmd->add_option("--corruption", o.corruption, "Banana metric-gradient corruption magnitude");
}

ExperimentConfig build_config(const CLI::App* cmd, const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--model")) c.model = o.model;
  if (given("--eps")) c.step_size = o.eps;
  if (given("--steps")) c.num_steps = o.steps;
  if (given("--delta")) c.threshold = o.delta;
  if (given("--solver")) c.solver = o.solver;
  if (given("--integrator")) c.integrator = o.integrator;
  if (given("--samples")) c.n_samples = o.samples;
  if (given("--burnin")) c.n_burnin = o.burnin;
  if (given("--points")) c.n_points = o.points;
  if (given("--seed")) c.seed = o.seed;
  if (given("--out")) c.out_dir = o.out;
  if (given("--kappa")) c.kappa = o.kappa;
  if (given("--heart-csv")) c.heart_csv = o.heart_csv;
  if (given("--synthetic-fallback")) c.synthetic_fallback = true;
  if (given("--corruption")) c.corruption = o.corruption;
  if (given("--ergodicity")) c.ergodicity = o.ergodicity;
  if (given("--sweep")) {
    std::istringstream in("[experiment]\nsweep = " + o.sweep + "\n");
    c.sweep = parse_config(in).sweep;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian-manifold HMC with implicit integrators"};
  app.require_subcommand(1);

  Overrides o;
  auto* sample = app.add_subcommand("sample", "Run a chain and write positions.csv + trace.json");
  auto* diagnose = app.add_subcommand("diagnose", "Threshold sweep; writes metrics.csv + report.json");
  auto* tune = app.add_subcommand("tune", "Robbins-Monro threshold tuning; writes tuner.csv");
  for (auto* cmd : {sample, diagnose, tune}) add_experiment_options(cmd, o);

  auto* verify = app.add_subcommand("verify", "Run the property suite");
  bool full = false;
  std::uint64_t verify_seed = 20240607;
  std::vector<int> only;
  verify->add_flag("--full", full, "Use full acceptance sample sizes");
  verify->add_option("--seed", verify_seed, "Root seed");
  verify->add_option("--only", only, "Check ids to run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) {
      const auto scale = full ? VerificationScale::full() : VerificationScale::reduced();
      const auto results = run_verification(scale, verify_seed, std::cout, only);
      const bool ok = std::all_of(results.begin(), results.end(), [](const CheckOutcome& r) { return r.pass; });
      return ok ? 0 : 1;
    }
    CLI::App* cmd = *sample ? sample : *diagnose ? diagnose : tune;
    const ExperimentConfig cfg = build_config(cmd, o);
    std::vector<std::filesystem::path> written;
    if (cmd == sample) written = cmd_sample(cfg);
    if (cmd == diagnose) written = cmd_diagnose(cfg);
    if (cmd == tune) written = cmd_tune(cfg);
    for (const auto& p : written) std::cout << p.string() << '\n';
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
