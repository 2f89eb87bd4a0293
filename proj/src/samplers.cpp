#include "rmhmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rmhmc {

EffortSummary summarize(const std::vector<StepStats>& stats) {
  EffortSummary s;
  for (const StepStats& st : stats) {
    s.total_l_p += st.l_p;
    s.total_l_q += st.l_q;
    s.max_l_p = std::max(s.max_l_p, st.l_p);
    s.max_l_q = std::max(s.max_l_q, st.l_q);
    s.all_converged = s.all_converged && st.momentum_converged && st.position_converged;
  }
  s.steps = static_cast<int>(stats.size());
  return s;
}

double TransitionRecord::acceptance_probability() const {
  if (diverged) return 0.0;
  return std::min(1.0, std::exp(energy_start - energy_end));
}

TransitionRecord hmc_transition(const TargetModel& model, const VectorXd& q,
                                const IntegratorConfig& cfg, RandomStream& rng) {
  const VectorXd p = sample_momentum(model, q, rng);
  const double u = rng.uniform();
  return hmc_transition_driven(model, q, cfg, p, u);
}

TransitionRecord hmc_transition_driven(const TargetModel& model, const VectorXd& q,
                                       const IntegratorConfig& cfg, const VectorXd& p, double u) {
  if (!q.allFinite()) throw EvaluationError("current state is not finite", q);
  TransitionRecord rec;
  rec.uniform_draw = u;
  const PhasePointd start(q, p);
  rec.energy_start = riemannian_hamiltonian(model, start);
  if (!std::isfinite(rec.energy_start)) {
    throw EvaluationError("Hamiltonian is not finite at the current state", q);
  }
  try {
    TrajectoryResult traj = integrate_trajectory(model, start, cfg);
    rec.effort = summarize(traj.stats);
    rec.proposal = momentum_flip(traj.end);
    rec.energy_end = traj.energies.back();
    if (!std::isfinite(rec.energy_end) || !rec.proposal.all_finite()) {
      throw DivergenceError("non-finite proposal energy");
    }
  } catch (const DivergenceError&) {
    rec.diverged = true;
    rec.proposal = start;
    rec.energy_end = std::numeric_limits<double>::infinity();
  }
  rec.accepted = !rec.diverged && u < rec.acceptance_probability();
  return rec;
}

double ChainTrace::acceptance_rate() const {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(),
                               [](const TransitionRecord& r) { return r.accepted; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

ChainTrace run_chain(const TargetModel& model, const VectorXd& q0, const IntegratorConfig& cfg,
                     Index n, RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("run_chain: n must be >= 1");
  cfg.validate();
  ChainTrace trace;
  trace.positions.resize(n, q0.size());
  trace.records.reserve(static_cast<std::size_t>(n));
  VectorXd q = q0;
  for (Index i = 0; i < n; ++i) {
    try {
      trace.records.push_back(hmc_transition(model, q, cfg, rng));
    } catch (const EvaluationError& e) {
      throw EvaluationError("transition " + std::to_string(i) + ": " + e.what(), e.position());
    }
    const TransitionRecord& rec = trace.records.back();
    if (rec.accepted) q = rec.proposal.q;
    trace.positions.row(i) = q.transpose();
  }
  return trace;
}

double sample_logistic_precision(const VectorXd& beta, RandomStream& rng) {
  const double shape = LogisticModel::kShape + 0.5 * static_cast<double>(beta.size());
  const double rate = 0.5 * beta.squaredNorm() + 1.0 / LogisticModel::kScale;
  const double alpha = rng.gamma(shape, 1.0 / rate);
  if (!(alpha > 0) || !std::isfinite(alpha)) {
    throw std::runtime_error("precision draw underflowed");
  }
  return alpha;
}

LogisticState gibbs_logistic_step(const LogisticState& state,
                                  const std::shared_ptr<const LogisticData>& data,
                                  const IntegratorConfig& cfg, RandomStream& rng,
                                  TransitionRecord* record) {
  if (!(state.alpha > 0)) throw std::invalid_argument("gibbs_logistic_step: alpha must be positive");
  const LogisticModel conditional(data, state.alpha);
  TransitionRecord rec = hmc_transition(conditional, state.beta, cfg, rng);
  LogisticState next{rec.accepted ? rec.proposal.q : state.beta, 0.0};
  next.alpha = sample_logistic_precision(next.beta, rng);
  if (record) *record = std::move(rec);
  return next;
}

MatrixXd run_multi_chain(const TargetModel& model, const VectorXd& q0, const IntegratorConfig& cfg,
                         Index r, Index n, Index coord, std::uint64_t seed) {
  if (r < 2) throw std::invalid_argument("run_multi_chain: r must be >= 2");
  if (coord < 0 || coord >= q0.size()) throw std::invalid_argument("run_multi_chain: bad coordinate");
  const RandomStream root(seed);
  MatrixXd out(r, n + 1);
  for (Index c = 0; c < r; ++c) {
    RandomStream rng = root.split(static_cast<std::uint64_t>(c));
    out(c, 0) = q0[coord];
    try {
      const ChainTrace t = run_chain(model, q0, cfg, n, rng);
      out.row(c).tail(n) = t.positions.col(coord).transpose();
    } catch (const std::exception& e) {
      throw std::runtime_error("chain " + std::to_string(c) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rmhmc
