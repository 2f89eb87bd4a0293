#ifndef RMHMC_INTEGRATORS_HPP
#define RMHMC_INTEGRATORS_HPP

#include "rmhmc/core.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace rmhmc {

enum class IntegratorKind { Leapfrog, GeneralizedLeapfrog, ImplicitMidpoint };
enum class SolverKind { FixedPoint, Newton };

inline constexpr int kDefaultFixedPointIters = 100;
inline constexpr int kDefaultNewtonIters = 25;

struct IntegratorConfig {
  double step_size{0.1};
  int num_steps{1};
  double threshold{1e-9};
  /// Iteration cap M; when unset the solver default (100 fixed point,
  /// 25 Newton) applies.
  std::optional<int> max_iters;
  SolverKind momentum_solver{SolverKind::FixedPoint};
  SolverKind position_solver{SolverKind::FixedPoint};
  IntegratorKind kind{IntegratorKind::GeneralizedLeapfrog};

  int cap_for(SolverKind solver) const {
    if (max_iters) return *max_iters;
    return solver == SolverKind::Newton ? kDefaultNewtonIters : kDefaultFixedPointIters;
  }

  /// Throws ConfigError unless threshold > 0, M >= 1, step size finite and
  /// num_steps >= 1.
  void validate() const;

  IntegratorConfig with_threshold(double delta) const {
    IntegratorConfig c = *this;
    c.threshold = delta;
    return c;
  }
};

/// Solver effort for one step. For the implicit midpoint rule the joint
/// iteration count is stored in l_q and l_p stays 0.
struct StepStats {
  int l_p{0};
  int l_q{0};
  bool momentum_converged{true};
  bool position_converged{true};
};

struct TrajectoryResult {
  PhasePointd end;
  std::vector<StepStats> stats;
  std::vector<double> energies;  // k + 1 values, energies[0] at the start
};

/// Outcome of resolving one implicit relation.
struct SolveResult {
  VectorXd value;
  int iterations{0};
  bool converged{false};
};

// --- single steps ----------------------------------------------------------

/// Explicit leapfrog for separable Hamiltonians.
PhasePointd leapfrog_step(const TargetModel& model, const PhasePointd& z, double step_size);

/// One generalized leapfrog step with the implicit updates resolved to
/// infinity-norm tolerance `cfg.threshold`.
std::pair<PhasePointd, StepStats> glf_step(const TargetModel& model, const PhasePointd& z,
                                           const IntegratorConfig& cfg);

/// One implicit midpoint step solved by joint fixed-point iteration.
std::pair<PhasePointd, StepStats> implicit_midpoint_step(const TargetModel& model,
                                                         const PhasePointd& z,
                                                         const IntegratorConfig& cfg);

// --- implicit sub-step solvers ---------------------------------------------

/// Fixed point iteration for p' = p - (eps/2) grad_q H(q, p'), started at p.
SolveResult glf_momentum_fixed_point(const LocalGeometry& at_q, const VectorXd& p,
                                     double step_size, double threshold, int max_iters);

/// Newton iteration on g(p') = p' - p + (eps/2) grad_q H(q, p'), started at p.
SolveResult glf_momentum_newton(const LocalGeometry& at_q, const VectorXd& p, double step_size,
                                double threshold, int max_iters);

/// Fixed point iteration for q' = q + (eps/2)(G^-1(q) + G^-1(q')) p_half.
SolveResult glf_position_fixed_point(const TargetModel& model, const LocalGeometry& at_q,
                                     const VectorXd& p_half, double step_size, double threshold,
                                     int max_iters);

/// Newton iteration on g(q') = q' - q - (eps/2)(G^-1(q') + G^-1(q)) p_half.
SolveResult glf_position_newton(const TargetModel& model, const LocalGeometry& at_q,
                                const VectorXd& p_half, double step_size, double threshold,
                                int max_iters);

/// Convenience overloads that evaluate the geometry at q themselves.
SolveResult glf_momentum_newton(const TargetModel& model, const VectorXd& q, const VectorXd& p,
                                double step_size, double threshold, int max_iters);
SolveResult glf_position_newton(const TargetModel& model, const VectorXd& q,
                                const VectorXd& p_half, double step_size, double threshold,
                                int max_iters);

/// Residuals of the two implicit relations; diagnostics only.
double glf_momentum_residual(const LocalGeometry& at_q, const VectorXd& p, const VectorXd& p_half,
                             double step_size);
double glf_position_residual(const TargetModel& model, const LocalGeometry& at_q,
                             const VectorXd& p_half, const VectorXd& q_next, double step_size);

// --- trajectories ----------------------------------------------------------

/// k steps of the configured integrator. Step failures are rethrown as
/// DivergenceError naming the failing step index.
TrajectoryResult integrate_trajectory(const TargetModel& model, const PhasePointd& z,
                                      const IntegratorConfig& cfg);

/// Endpoint only; skips energy bookkeeping.
PhasePointd integrate(const TargetModel& model, const PhasePointd& z, const IntegratorConfig& cfg);

const char* to_string(IntegratorKind kind);
const char* to_string(SolverKind kind);

}  // namespace rmhmc

#endif  // RMHMC_INTEGRATORS_HPP
