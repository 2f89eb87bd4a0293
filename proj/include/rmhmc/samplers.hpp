#ifndef RMHMC_SAMPLERS_HPP
#define RMHMC_SAMPLERS_HPP

#include "rmhmc/core.hpp"
#include "rmhmc/integrators.hpp"
#include "rmhmc/models.hpp"
#include "rmhmc/random.hpp"

#include <vector>

namespace rmhmc {

/// Solver effort summed and maximized over the k steps of one proposal.
struct EffortSummary {
  long total_l_p{0};
  long total_l_q{0};
  int max_l_p{0};
  int max_l_q{0};
  int steps{0};
  bool all_converged{true};

  double mean_l_p() const { return steps ? static_cast<double>(total_l_p) / steps : 0.0; }
  double mean_l_q() const { return steps ? static_cast<double>(total_l_q) / steps : 0.0; }
};

EffortSummary summarize(const std::vector<StepStats>& stats);

struct TransitionRecord {
  PhasePointd proposal;  // F(Phi(q, p)); holds the start point when diverged
  bool accepted{false};
  double uniform_draw{0};
  double energy_start{0};
  double energy_end{0};  // +inf on divergence
  bool diverged{false};
  EffortSummary effort;

  double acceptance_probability() const;
};

/// Fresh momentum p ~ N(0, G(q)), then one uniform u, then the proposal.
/// Evaluation failures at q itself propagate; failures along the
/// trajectory count as a rejected proposal.
TransitionRecord hmc_transition(const TargetModel& model, const VectorXd& q,
                                const IntegratorConfig& cfg, RandomStream& rng);

/// Same kernel with externally supplied momentum and uniform draw.
TransitionRecord hmc_transition_driven(const TargetModel& model, const VectorXd& q,
                                       const IntegratorConfig& cfg, const VectorXd& p, double u);

struct ChainTrace {
  MatrixXd positions;  // n x m; row i is the state after transition i
  std::vector<TransitionRecord> records;

  double acceptance_rate() const;
};

/// n sequential transitions from q0. Fatal errors are rethrown with the
/// transition index prepended.
ChainTrace run_chain(const TargetModel& model, const VectorXd& q0, const IntegratorConfig& cfg,
                     Index n, RandomStream& rng);

struct LogisticState {
  VectorXd beta;
  double alpha{1.0};
};

/// Exact draw from alpha | beta ~ Gamma(k + p/2, 1 / (beta'beta / 2 + 1/theta)).
double sample_logistic_precision(const VectorXd& beta, RandomStream& rng);

/// One RMHMC transition on beta | alpha followed by the conjugate alpha draw.
LogisticState gibbs_logistic_step(const LogisticState& state,
                                  const std::shared_ptr<const LogisticData>& data,
                                  const IntegratorConfig& cfg, RandomStream& rng,
                                  TransitionRecord* record = nullptr);

/// r chains from the shared q0 with child streams split from `seed`.
/// Returns an r x (n + 1) matrix of coordinate `coord`; column 0 is q0[coord].
MatrixXd run_multi_chain(const TargetModel& model, const VectorXd& q0, const IntegratorConfig& cfg,
                         Index r, Index n, Index coord, std::uint64_t seed);

}  // namespace rmhmc

#endif  // RMHMC_SAMPLERS_HPP
