#ifndef RMHMC_TOOLS_EXPERIMENT_HPP
#define RMHMC_TOOLS_EXPERIMENT_HPP

#include "rmhmc/diagnostics.hpp"
#include "rmhmc/samplers.hpp"
#include "rmhmc/tuner.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rmhmc::app {

/// Thrown for anything the user can fix on the command line or in the
/// config file; the message names the offending field.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unset optionals resolve to per-model defaults in `resolve`.
struct ExperimentConfig {
  std::string model{"banana"};
  std::optional<double> student_t_variance;
  std::optional<double> funnel_alpha;
  std::optional<double> corruption;
  std::optional<double> logistic_alpha;
  std::string heart_csv;
  bool synthetic_fallback{false};

  std::optional<std::string> integrator;  // leapfrog | glf | midpoint
  std::optional<std::string> solver;      // fp | newton | newton-both
  std::optional<double> step_size;
  std::optional<int> num_steps;
  std::optional<double> threshold;
  std::optional<int> max_iters;

  std::optional<long> n_samples;
  std::optional<long> n_burnin;
  std::optional<long> n_points;
  std::uint64_t seed{1};
  std::vector<double> sweep;
  std::optional<double> baseline_delta;
  std::optional<bool> ergodicity;  // chain-vs-reference metrics in diagnose
  std::string out_dir{"out"};

  std::optional<double> kappa;
  std::optional<int> tuner_iterations;
  std::optional<double> initial_delta;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Section/key=value text. Blank lines and lines starting with '#' or ';'
/// are ignored; unknown sections or keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Writes only fields that are set, so parse(write(c)) == c.
void write_config(std::ostream& os, const ExperimentConfig& cfg);

/// Fields after defaults have been applied.
struct ResolvedExperiment {
  ExperimentConfig config;
  ModelPtr model;                            // what the integrator sees
  ModelPtr target;                           // the posterior itself
  std::shared_ptr<const LogisticData> data;  // logistic only
  IntegratorConfig integrator;
  long n_samples{0};
  long n_burnin{0};
  long n_points{0};
  std::vector<double> sweep;
  double baseline_delta{1e-10};
  bool ergodicity{false};
  TunerConfig tuner;
};

ResolvedExperiment resolve(const ExperimentConfig& cfg);

std::vector<std::string> known_models();
std::vector<double> default_sweep();

/// Long-format result rows in insertion order.
struct ResultRow {
  std::string model;
  double delta{0};
  std::string metric;
  std::string statistic;
  double value{0};
  std::uint64_t seed{0};
};

struct ResultTable {
  std::vector<ResultRow> rows;
  void add(const std::string& model, double delta, const std::string& metric,
           const std::string& statistic, double value, std::uint64_t seed) {
    rows.push_back({model, delta, metric, statistic, value, seed});
  }
  void write_csv(std::ostream& os) const;
};

/// "%.17g"
std::string format_double(double x);

struct SampleOutput {
  MatrixXd positions;
  std::vector<TransitionRecord> records;
  std::vector<double> alphas;  // logistic only
};

SampleOutput run_sample(const ResolvedExperiment& ex);
ResultTable run_diagnose(const ResolvedExperiment& ex);
TunerTrace run_tune(const ResolvedExperiment& ex);

/// Subcommand bodies: run and write files under cfg.out_dir. Return the
/// list of files written.
std::vector<std::filesystem::path> cmd_sample(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> cmd_diagnose(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> cmd_tune(const ExperimentConfig& cfg);

}  // namespace rmhmc::app

#endif  // RMHMC_TOOLS_EXPERIMENT_HPP
