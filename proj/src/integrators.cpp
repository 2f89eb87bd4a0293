#include "rmhmc/integrators.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rmhmc {

void IntegratorConfig::validate() const {
  if (!(threshold > 0) || !std::isfinite(threshold)) {
    throw ConfigError("threshold must be positive and finite");
  }
  if (max_iters && *max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!std::isfinite(step_size)) throw ConfigError("step_size must be finite");
  if (num_steps < 1) throw ConfigError("num_steps must be >= 1");
}

const char* to_string(IntegratorKind kind) {
  switch (kind) {
    case IntegratorKind::Leapfrog: return "leapfrog";
    case IntegratorKind::GeneralizedLeapfrog: return "glf";
    case IntegratorKind::ImplicitMidpoint: return "midpoint";
  }
  return "?";
}

const char* to_string(SolverKind kind) {
  return kind == SolverKind::Newton ? "newton" : "fp";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

void require_finite(const VectorXd& v, const char* which) {
  if (!v.allFinite()) throw DivergenceError(std::string(which) + " update diverged");
}

/// d/dp of grad_q H(q, p): row k is -(G^-1 dG/dq_k G^-1 p)^T.
MatrixXd mixed_partial(const LocalGeometry& g, const VectorXd& p) {
  const Index m = p.size();
  MatrixXd out(m, m);
  const VectorXd v = g.bundle.inverse * p;
  for (Index k = 0; k < m; ++k) {
    out.row(k) = -(g.bundle.inverse * (g.bundle.grads[k] * v)).transpose();
  }
  return out;
}

VectorXd solve_dense(const MatrixXd& jac, const VectorXd& rhs, const char* which) {
  Eigen::PartialPivLU<MatrixXd> lu(jac);
  const double det = lu.determinant();
  if (!(std::abs(det) > 0) || !std::isfinite(det)) {
    throw DivergenceError(std::string("singular Newton Jacobian in ") + which + " update");
  }
  return lu.solve(rhs);
}

}  // namespace

// ---------------------------------------------------------------------------
// Momentum half-step
// ---------------------------------------------------------------------------

SolveResult glf_momentum_fixed_point(const LocalGeometry& at_q, const VectorXd& p,
                                     double step_size, double threshold, int max_iters) {
  SolveResult r{p, 0, false};
  double delta = kInf;
  while (delta > threshold && r.iterations < max_iters) {
    VectorXd next = p - 0.5 * step_size * grad_q_hamiltonian(at_q, r.value);
    require_finite(next, "momentum");
    delta = inf_norm(next - r.value);
    r.value = std::move(next);
    ++r.iterations;
  }
  r.converged = delta <= threshold;
  return r;
}

SolveResult glf_momentum_newton(const LocalGeometry& at_q, const VectorXd& p, double step_size,
                                double threshold, int max_iters) {
  const Index m = p.size();
  const double h = 0.5 * step_size;
  SolveResult r{p, 0, false};
  VectorXd residual = r.value - p + h * grad_q_hamiltonian(at_q, r.value);
  const bool constant = at_q.half_trace.size() == 0;
  while (r.iterations < max_iters) {
    MatrixXd jac = MatrixXd::Identity(m, m);
    if (!constant) jac += h * mixed_partial(at_q, r.value);
    const VectorXd step = solve_dense(jac, residual, "momentum");
    r.value -= step;
    require_finite(r.value, "momentum");
    ++r.iterations;
    residual = r.value - p + h * grad_q_hamiltonian(at_q, r.value);
    if (inf_norm(step) <= threshold || inf_norm(residual) <= threshold) {
      r.converged = true;
      break;
    }
  }
  return r;
}

SolveResult glf_momentum_newton(const TargetModel& model, const VectorXd& q, const VectorXd& p,
                                double step_size, double threshold, int max_iters) {
  return glf_momentum_newton(evaluate_geometry(model, q), p, step_size, threshold, max_iters);
}

double glf_momentum_residual(const LocalGeometry& at_q, const VectorXd& p, const VectorXd& p_half,
                             double step_size) {
  return inf_norm(p_half - p + 0.5 * step_size * grad_q_hamiltonian(at_q, p_half));
}

// ---------------------------------------------------------------------------
// Position full step
// ---------------------------------------------------------------------------

SolveResult glf_position_fixed_point(const TargetModel& model, const LocalGeometry& at_q,
                                     const VectorXd& p_half, double step_size, double threshold,
                                     int max_iters) {
  const double h = 0.5 * step_size;
  const VectorXd base = at_q.q + h * (at_q.bundle.inverse * p_half);
  SolveResult r{at_q.q, 0, false};
  double delta = kInf;
  while (delta > threshold && r.iterations < max_iters) {
    const MetricBundled b = model.metric(r.value);
    VectorXd next = base + h * (b.inverse * p_half);
    require_finite(next, "position");
    delta = inf_norm(next - r.value);
    r.value = std::move(next);
    ++r.iterations;
  }
  r.converged = delta <= threshold;
  return r;
}

SolveResult glf_position_newton(const TargetModel& model, const LocalGeometry& at_q,
                                const VectorXd& p_half, double step_size, double threshold,
                                int max_iters) {
  const Index m = p_half.size();
  const double h = 0.5 * step_size;
  const VectorXd base = at_q.q + h * (at_q.bundle.inverse * p_half);
  const bool constant = model.constant_metric();
  SolveResult r{at_q.q, 0, false};
  MetricBundled b = at_q.bundle;
  VectorXd residual = r.value - base - h * (b.inverse * p_half);
  while (r.iterations < max_iters) {
    MatrixXd jac = MatrixXd::Identity(m, m);
    if (!constant) {
      const VectorXd v = b.inverse * p_half;
      for (Index k = 0; k < m; ++k) jac.col(k) += h * (b.inverse * (b.grads[k] * v));
    }
    const VectorXd step = solve_dense(jac, residual, "position");
    r.value -= step;
    require_finite(r.value, "position");
    ++r.iterations;
    b = constant ? model.metric(r.value) : model.metric_bundle(r.value);
    residual = r.value - base - h * (b.inverse * p_half);
    if (inf_norm(step) <= threshold || inf_norm(residual) <= threshold) {
      r.converged = true;
      break;
    }
  }
  return r;
}

SolveResult glf_position_newton(const TargetModel& model, const VectorXd& q,
                                const VectorXd& p_half, double step_size, double threshold,
                                int max_iters) {
  return glf_position_newton(model, evaluate_geometry(model, q), p_half, step_size, threshold,
                             max_iters);
}

double glf_position_residual(const TargetModel& model, const LocalGeometry& at_q,
                             const VectorXd& p_half, const VectorXd& q_next, double step_size) {
  const double h = 0.5 * step_size;
  const VectorXd rhs =
      at_q.q + h * (at_q.bundle.inverse * p_half) + h * (model.metric(q_next).inverse * p_half);
  return inf_norm(q_next - rhs);
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

namespace {

struct StepOutcome {
  PhasePointd z;
  LocalGeometry end_geometry;
  StepStats stats;
};

StepOutcome leapfrog_from(const TargetModel& model, const PhasePointd& z, const LocalGeometry& g0,
                          double eps) {
  if (!model.constant_metric()) {
    throw std::logic_error("leapfrog requires a model with a constant metric");
  }
  const VectorXd p_half = z.p + 0.5 * eps * g0.grad_log_density;
  VectorXd q_next = z.q + eps * (g0.bundle.inverse * p_half);
  require_finite(q_next, "position");
  LocalGeometry g1 = evaluate_metric_only(model, q_next);
  VectorXd p_next = p_half + 0.5 * eps * g1.grad_log_density;
  require_finite(p_next, "momentum");
  return {PhasePointd(std::move(q_next), std::move(p_next)), std::move(g1), StepStats{}};
}

StepOutcome glf_from(const TargetModel& model, const PhasePointd& z, const LocalGeometry& g0,
                     const IntegratorConfig& cfg) {
  const double eps = cfg.step_size;
  StepStats stats;

  const SolveResult pr =
      cfg.momentum_solver == SolverKind::Newton
          ? glf_momentum_newton(g0, z.p, eps, cfg.threshold, cfg.cap_for(SolverKind::Newton))
          : glf_momentum_fixed_point(g0, z.p, eps, cfg.threshold,
                                     cfg.cap_for(SolverKind::FixedPoint));
  stats.l_p = pr.iterations;
  stats.momentum_converged = pr.converged;

  const SolveResult qr = cfg.position_solver == SolverKind::Newton
                             ? glf_position_newton(model, g0, pr.value, eps, cfg.threshold,
                                                   cfg.cap_for(SolverKind::Newton))
                             : glf_position_fixed_point(model, g0, pr.value, eps, cfg.threshold,
                                                        cfg.cap_for(SolverKind::FixedPoint));
  stats.l_q = qr.iterations;
  stats.position_converged = qr.converged;

  LocalGeometry g1 = evaluate_geometry(model, qr.value);
  VectorXd p_next = pr.value - 0.5 * eps * grad_q_hamiltonian(g1, pr.value);
  require_finite(p_next, "momentum");
  return {PhasePointd(qr.value, std::move(p_next)), std::move(g1), stats};
}

StepOutcome midpoint_from(const TargetModel& model, const PhasePointd& z,
                          const IntegratorConfig& cfg) {
  const double eps = cfg.step_size;
  const int cap = cfg.cap_for(SolverKind::FixedPoint);
  const VectorXd z0 = z.stacked();
  const Index m = z.dim();
  VectorXd current = z0;
  StepStats stats;
  stats.l_p = 0;
  double delta = kInf;
  int iters = 0;
  while (delta > cfg.threshold && iters < cap) {
    const VectorXd mid = 0.5 * (z0 + current);
    const LocalGeometry g = evaluate_geometry(model, mid.head(m));
    VectorXd next(2 * m);
    next.head(m) = z0.head(m) + eps * grad_p_hamiltonian(g, mid.tail(m));
    next.tail(m) = z0.tail(m) - eps * grad_q_hamiltonian(g, mid.tail(m));
    require_finite(next, "midpoint");
    delta = inf_norm(next - current);
    current = std::move(next);
    ++iters;
  }
  stats.l_q = iters;
  stats.position_converged = delta <= cfg.threshold;
  PhasePointd out = PhasePointd::from_stacked(current);
  LocalGeometry g1 = evaluate_geometry(model, out.q);
  return {std::move(out), std::move(g1), stats};
}

StepOutcome step_from(const TargetModel& model, const PhasePointd& z, const LocalGeometry& g0,
                      const IntegratorConfig& cfg) {
  switch (cfg.kind) {
    case IntegratorKind::Leapfrog: return leapfrog_from(model, z, g0, cfg.step_size);
    case IntegratorKind::GeneralizedLeapfrog: return glf_from(model, z, g0, cfg);
    case IntegratorKind::ImplicitMidpoint: return midpoint_from(model, z, cfg);
  }
  throw std::logic_error("unknown integrator kind");
}

}  // namespace

PhasePointd leapfrog_step(const TargetModel& model, const PhasePointd& z, double step_size) {
  return leapfrog_from(model, z, evaluate_metric_only(model, z.q), step_size).z;
}

std::pair<PhasePointd, StepStats> glf_step(const TargetModel& model, const PhasePointd& z,
                                           const IntegratorConfig& cfg) {
  StepOutcome o = glf_from(model, z, evaluate_geometry(model, z.q), cfg);
  return {std::move(o.z), o.stats};
}

std::pair<PhasePointd, StepStats> implicit_midpoint_step(const TargetModel& model,
                                                         const PhasePointd& z,
                                                         const IntegratorConfig& cfg) {
  StepOutcome o = midpoint_from(model, z, cfg);
  return {std::move(o.z), o.stats};
}

TrajectoryResult integrate_trajectory(const TargetModel& model, const PhasePointd& z,
                                      const IntegratorConfig& cfg) {
  cfg.validate();
  TrajectoryResult out;
  out.stats.reserve(cfg.num_steps);
  out.energies.reserve(cfg.num_steps + 1);

  LocalGeometry geom = evaluate_geometry(model, z.q);
  out.energies.push_back(riemannian_hamiltonian(geom, z.p));
  PhasePointd current = z;
  for (int step = 0; step < cfg.num_steps; ++step) {
    try {
      StepOutcome o = step_from(model, current, geom, cfg);
      current = std::move(o.z);
      geom = std::move(o.end_geometry);
      out.stats.push_back(o.stats);
      out.energies.push_back(riemannian_hamiltonian(geom, current.p));
    } catch (const DivergenceError& e) {
      throw DivergenceError("step " + std::to_string(step) + ": " + e.what());
    } catch (const EvaluationError& e) {
      throw DivergenceError("step " + std::to_string(step) + ": " + e.what());
    }
  }
  out.end = std::move(current);
  return out;
}

PhasePointd integrate(const TargetModel& model, const PhasePointd& z,
                      const IntegratorConfig& cfg) {
  return integrate_trajectory(model, z, cfg).end;
}

}  // namespace rmhmc
