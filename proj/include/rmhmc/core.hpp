#ifndef RMHMC_CORE_HPP
#define RMHMC_CORE_HPP

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmhmc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class RandomStream;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Raised when a model cannot be evaluated at a position: non-finite
/// log-density, or a metric that fails its Cholesky factorization.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, VectorXd q)
      : std::runtime_error(what), q_(std::move(q)) {}
  const VectorXd& position() const { return q_; }

 private:
  VectorXd q_;
};

/// Raised when an integrator produces a non-finite iterate.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Phase space
// ---------------------------------------------------------------------------

template <typename Scalar>
struct PhasePoint {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector q;
  Vector p;

  PhasePoint() = default;
  PhasePoint(Vector position, Vector momentum)
      : q(std::move(position)), p(std::move(momentum)) {
    if (q.size() != p.size() || q.size() < 1) {
      throw std::invalid_argument("PhasePoint: position and momentum must share a length >= 1");
    }
  }

  Index dim() const { return q.size(); }
  bool all_finite() const { return q.allFinite() && p.allFinite(); }

  /// Concatenated (q, p) as a single 2m vector.
  Vector stacked() const {
    Vector z(2 * dim());
    z << q, p;
    return z;
  }

  static PhasePoint from_stacked(const Vector& z) {
    const Index m = z.size() / 2;
    return PhasePoint(z.head(m), z.tail(m));
  }
};

using PhasePointd = PhasePoint<double>;

/// The momentum flip F(q, p) = (q, -p).
template <typename Scalar>
PhasePoint<Scalar> momentum_flip(const PhasePoint<Scalar>& z) {
  return PhasePoint<Scalar>(z.q, -z.p);
}

// ---------------------------------------------------------------------------
// Metric bundle
// ---------------------------------------------------------------------------

/// G(q) together with everything derived from it at the same point.
/// `grads` is empty when only the metric was requested.
template <typename Scalar>
struct MetricBundle {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix metric;
  Matrix inverse;
  Matrix chol_lower;  // metric = chol_lower * chol_lower^T
  Scalar log_det{0};
  std::vector<Matrix> grads;  // grads[k] = dG/dq_k

  Index dim() const { return metric.rows(); }
  bool has_grads() const { return !grads.empty(); }
};

using MetricBundled = MetricBundle<double>;

/// Factorizes `metric` and fills inverse / log-determinant. Throws
/// EvaluationError (carrying `q`) when the metric is not SPD.
MetricBundled make_metric_bundle(const VectorXd& q, MatrixXd metric,
                                 std::vector<MatrixXd> grads = {});

// ---------------------------------------------------------------------------
// Target model
// ---------------------------------------------------------------------------

/// A posterior with density proportional to exp(log_density(q)) and a
/// Riemannian metric G(q). Implementations are immutable after construction.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual double log_density(const VectorXd& q) const = 0;
  virtual VectorXd grad_log_density(const VectorXd& q) const = 0;

  /// Metric, inverse, log-determinant and all dG/dq_k.
  virtual MetricBundled metric_bundle(const VectorXd& q) const = 0;

  /// Metric without derivatives. Override when the derivatives are costly.
  virtual MetricBundled metric(const VectorXd& q) const { return metric_bundle(q); }

  /// True when G does not depend on q (separable Hamiltonian).
  virtual bool constant_metric() const { return false; }

  virtual bool has_analytic_sampler() const { return false; }
  /// Draws n i.i.d. rows from the target. Throws when unsupported.
  virtual MatrixXd sample(Index n, RandomStream& rng) const;
};

using ModelPtr = std::shared_ptr<const TargetModel>;

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

/// Everything the Hamiltonian needs at one position, computed once and
/// reused across integrator sub-steps.
struct LocalGeometry {
  VectorXd q;
  double log_density{0};
  VectorXd grad_log_density;
  MetricBundled bundle;
  VectorXd half_trace;  // 0.5 * trace(G^-1 dG/dq_k); empty without grads
};

/// Full geometry (with metric derivatives) at q.
LocalGeometry evaluate_geometry(const TargetModel& model, const VectorXd& q);
/// Log-density and metric only; enough for H and grad_p H.
LocalGeometry evaluate_metric_only(const TargetModel& model, const VectorXd& q);

struct HamiltonianEval {
  double energy{0};
  VectorXd grad_q;
  VectorXd grad_p;
};

double riemannian_hamiltonian(const LocalGeometry& geom, const VectorXd& p);
VectorXd grad_q_hamiltonian(const LocalGeometry& geom, const VectorXd& p);
VectorXd grad_p_hamiltonian(const LocalGeometry& geom, const VectorXd& p);

double riemannian_hamiltonian(const TargetModel& model, const PhasePointd& z);
VectorXd grad_q_hamiltonian(const TargetModel& model, const PhasePointd& z);
VectorXd grad_p_hamiltonian(const TargetModel& model, const PhasePointd& z);
HamiltonianEval evaluate_hamiltonian(const TargetModel& model, const PhasePointd& z);

/// p = chol(G(q)) xi with xi standard normal, so p ~ Normal(0, G(q)).
VectorXd sample_momentum(const TargetModel& model, const VectorXd& q, RandomStream& rng);
VectorXd sample_momentum(const MetricBundled& bundle, RandomStream& rng);

// ---------------------------------------------------------------------------
// Finite-difference validation
// ---------------------------------------------------------------------------

/// Central-difference step used for all derivative checks.
inline double fd_step(double coordinate) { return 1e-6 * (1.0 + std::abs(coordinate)); }

struct GradientCheck {
  double grad_log_density_rel_err{0};
  double metric_grads_rel_err{0};
};

/// Compares analytic derivatives of the model against central differences.
GradientCheck check_model_derivatives(const TargetModel& model, const VectorXd& q);

}  // namespace rmhmc

#endif  // RMHMC_CORE_HPP
