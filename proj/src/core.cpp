#include "rmhmc/core.hpp"

#include "rmhmc/random.hpp"

#include <cmath>
#include <sstream>

namespace rmhmc {

namespace {

std::string describe(const VectorXd& q) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Index i = 0; i < q.size(); ++i) os << (i ? ", " : "") << q[i];
  os << "]";
  return os.str();
}

}  // namespace

MetricBundled make_metric_bundle(const VectorXd& q, MatrixXd metric, std::vector<MatrixXd> grads) {
  if (!metric.allFinite()) {
    throw EvaluationError("non-finite metric at q = " + describe(q), q);
  }
  Eigen::LLT<MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) {
    throw EvaluationError("metric is not positive definite at q = " + describe(q), q);
  }
  MetricBundled b;
  b.chol_lower = llt.matrixL();
  b.log_det = 2.0 * b.chol_lower.diagonal().array().log().sum();
  b.inverse = llt.solve(MatrixXd::Identity(metric.rows(), metric.cols()));
  b.metric = std::move(metric);
  b.grads = std::move(grads);
  return b;
}

MatrixXd TargetModel::sample(Index, RandomStream&) const {
  throw std::logic_error(name() + ": no analytic sampler");
}

// ---------------------------------------------------------------------------

namespace {

LocalGeometry evaluate(const TargetModel& model, const VectorXd& q, bool with_grads) {
  LocalGeometry g;
  g.q = q;
  g.log_density = model.log_density(q);
  if (!std::isfinite(g.log_density)) {
    throw EvaluationError("non-finite log-density at q = " + describe(q), q);
  }
  g.grad_log_density = model.grad_log_density(q);
  if (!g.grad_log_density.allFinite()) {
    throw EvaluationError("non-finite log-density gradient at q = " + describe(q), q);
  }
  if (with_grads && !model.constant_metric()) {
    g.bundle = model.metric_bundle(q);
    const Index m = q.size();
    g.half_trace.resize(m);
    for (Index k = 0; k < m; ++k) {
      g.half_trace[k] = 0.5 * g.bundle.inverse.cwiseProduct(g.bundle.grads[k].transpose()).sum();
    }
  } else {
    g.bundle = model.metric(q);
    g.bundle.grads.clear();
  }
  return g;
}

}  // namespace

LocalGeometry evaluate_geometry(const TargetModel& model, const VectorXd& q) {
  return evaluate(model, q, true);
}

LocalGeometry evaluate_metric_only(const TargetModel& model, const VectorXd& q) {
  return evaluate(model, q, false);
}

double riemannian_hamiltonian(const LocalGeometry& geom, const VectorXd& p) {
  return -geom.log_density + 0.5 * geom.bundle.log_det + 0.5 * p.dot(geom.bundle.inverse * p);
}

VectorXd grad_p_hamiltonian(const LocalGeometry& geom, const VectorXd& p) {
  return geom.bundle.inverse * p;
}

VectorXd grad_q_hamiltonian(const LocalGeometry& geom, const VectorXd& p) {
  VectorXd g = -geom.grad_log_density;
  if (geom.half_trace.size() == 0) return g;  // constant metric
  const VectorXd v = geom.bundle.inverse * p;
  for (Index k = 0; k < g.size(); ++k) {
    g[k] += geom.half_trace[k] - 0.5 * v.dot(geom.bundle.grads[k] * v);
  }
  return g;
}

double riemannian_hamiltonian(const TargetModel& model, const PhasePointd& z) {
  return riemannian_hamiltonian(evaluate_metric_only(model, z.q), z.p);
}

VectorXd grad_q_hamiltonian(const TargetModel& model, const PhasePointd& z) {
  return grad_q_hamiltonian(evaluate_geometry(model, z.q), z.p);
}

VectorXd grad_p_hamiltonian(const TargetModel& model, const PhasePointd& z) {
  return grad_p_hamiltonian(evaluate_metric_only(model, z.q), z.p);
}

HamiltonianEval evaluate_hamiltonian(const TargetModel& model, const PhasePointd& z) {
  const LocalGeometry g = evaluate_geometry(model, z.q);
  return {riemannian_hamiltonian(g, z.p), grad_q_hamiltonian(g, z.p), grad_p_hamiltonian(g, z.p)};
}

VectorXd sample_momentum(const MetricBundled& bundle, RandomStream& rng) {
  return bundle.chol_lower * rng.normal_vector(bundle.dim());
}

VectorXd sample_momentum(const TargetModel& model, const VectorXd& q, RandomStream& rng) {
  return sample_momentum(model.metric(q), rng);
}

// ---------------------------------------------------------------------------

GradientCheck check_model_derivatives(const TargetModel& model, const VectorXd& q) {
  const Index m = q.size();
  GradientCheck out;

  const VectorXd g = model.grad_log_density(q);
  VectorXd fd(m);
  for (Index i = 0; i < m; ++i) {
    const double h = fd_step(q[i]);
    VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    fd[i] = (model.log_density(qp) - model.log_density(qm)) / (2 * h);
  }
  out.grad_log_density_rel_err = (fd - g).lpNorm<Eigen::Infinity>() /
                                 std::max(1.0, g.lpNorm<Eigen::Infinity>());

  if (model.constant_metric()) return out;
  const MetricBundled b = model.metric_bundle(q);
  double worst = 0;
  for (Index k = 0; k < m; ++k) {
    const double h = fd_step(q[k]);
    VectorXd qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const MatrixXd dfd = (model.metric(qp).metric - model.metric(qm).metric) / (2 * h);
    const double scale = std::max(1.0, b.grads[k].lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (dfd - b.grads[k]).lpNorm<Eigen::Infinity>() / scale);
  }
  out.metric_grads_rel_err = worst;
  return out;
}

}  // namespace rmhmc
