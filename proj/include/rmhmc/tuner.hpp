#ifndef RMHMC_TUNER_HPP
#define RMHMC_TUNER_HPP

#include "rmhmc/core.hpp"
#include "rmhmc/integrators.hpp"
#include "rmhmc/random.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace rmhmc {

inline constexpr double kNoSimilarityDigits = -16.0;

/// log10 of the phase-space distance between the endpoints of the integrator
/// run at cfg.threshold and at the baseline threshold; -16 when the
/// threshold does not exceed the baseline or the endpoints coincide.
double digits_of_similarity(const TargetModel& model, const PhasePointd& z,
                            const IntegratorConfig& cfg, double baseline_threshold);

struct TunerConfig {
  double kappa{8.0};
  double omega{0.75};
  double gain{1.0};
  double baseline_delta{1e-10};
  int n_max{1000};
  double initial_delta{1e-2};

  /// Throws ConfigError unless omega is in (1/2, 1), gain > 0, kappa > 0 and
  /// baseline < initial.
  void validate() const;
};

struct TunerStep {
  int n{0};
  double delta{0};      // delta_n used at iteration n
  double delta_bar{0};  // exp of the running mean of log delta_1..delta_n
  double loss{0};       // L_n = G + kappa
  double loss_bar{0};   // running mean of L_1..L_n
  bool clamped{false};  // delta_{n+1} was clamped into (1e-16, 1)
};

struct TunerTrace {
  std::vector<TunerStep> steps;

  double final_delta() const { return steps.empty() ? 0.0 : steps.back().delta_bar; }
  double final_loss_bar() const { return steps.empty() ? 0.0 : steps.back().loss_bar; }
  bool any_clamped() const;
  void write_csv(std::ostream& os) const;
};

/// Robbins-Monro iteration on log delta with gains D n^-omega and Ruppert
/// averaging. `loss(delta, n)` returns L at the current threshold.
TunerTrace robbins_monro(const std::function<double(double, int)>& loss, const TunerConfig& cfg);

/// Produces the next position at which the tuner evaluates L.
using StateSource = std::function<VectorXd(RandomStream&)>;

/// RMHMC chain advanced by one transition per call, after `burnin` transitions.
StateSource make_chain_source(ModelPtr model, VectorXd q0, IntegratorConfig cfg, int burnin,
                              RandomStream& rng);
/// Independent draws from the model's analytic sampler.
StateSource make_exact_source(ModelPtr model);

/// Each iteration draws q from `source`, fresh p ~ N(0, G(q)), and evaluates
/// L = digits_of_similarity + kappa at delta_n.
TunerTrace tune_threshold(const TargetModel& model, const StateSource& source,
                          const TunerConfig& cfg, const IntegratorConfig& base, RandomStream& rng);

struct BPoint {
  double delta{0};
  double value{0};
  Index points_used{0};
};

/// B(delta) averaged over fixed phase points for every delta in the grid.
/// Points whose trajectory diverges at any grid delta are dropped.
std::vector<BPoint> monte_carlo_B(const TargetModel& model, const std::vector<double>& deltas,
                                  const std::vector<PhasePointd>& points,
                                  const IntegratorConfig& base, double kappa,
                                  double baseline_delta = 1e-10);

std::vector<double> log_spaced(double lo, double hi, int count);

/// Least-squares non-decreasing fit (pool adjacent violators).
std::vector<double> isotonic_fit(const std::vector<double>& y);

}  // namespace rmhmc

#endif  // RMHMC_TUNER_HPP
