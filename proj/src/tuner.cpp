#include "rmhmc/tuner.hpp"

#include "rmhmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rmhmc {

double digits_of_similarity(const TargetModel& model, const PhasePointd& z,
                            const IntegratorConfig& cfg, double baseline_threshold) {
  if (cfg.threshold <= baseline_threshold) return kNoSimilarityDigits;
  const PhasePointd a = integrate(model, z, cfg);
  const PhasePointd b = integrate(model, z, cfg.with_threshold(baseline_threshold));
  const double dist = std::sqrt((a.q - b.q).squaredNorm() + (a.p - b.p).squaredNorm());
  if (!(dist > 0)) return kNoSimilarityDigits;
  return std::max(kNoSimilarityDigits, std::log10(dist));
}

void TunerConfig::validate() const {
  if (!(omega > 0.5 && omega < 1.0)) throw ConfigError("tuner omega must lie in (1/2, 1)");
  if (!(gain > 0)) throw ConfigError("tuner gain must be positive");
  if (!(kappa > 0)) throw ConfigError("kappa must be positive");
  if (!(baseline_delta > 0 && baseline_delta < initial_delta)) {
    throw ConfigError("baseline threshold must be positive and below the initial threshold");
  }
  if (n_max < 1) throw ConfigError("tuner n_max must be >= 1");
}

bool TunerTrace::any_clamped() const {
  return std::any_of(steps.begin(), steps.end(), [](const TunerStep& s) { return s.clamped; });
}

void TunerTrace::write_csv(std::ostream& os) const {
  os << "n,delta_n,delta_bar_n,L_n,L_bar_n\n" << std::setprecision(17);
  for (const TunerStep& s : steps) {
    os << s.n << ',' << s.delta << ',' << s.delta_bar << ',' << s.loss << ',' << s.loss_bar << '\n';
  }
}

TunerTrace robbins_monro(const std::function<double(double, int)>& loss, const TunerConfig& cfg) {
  cfg.validate();
  const double log_lo = std::log(1e-16), log_hi = 0.0;
  TunerTrace trace;
  trace.steps.reserve(static_cast<std::size_t>(cfg.n_max));
  double log_delta = std::log(cfg.initial_delta);
  double log_bar = 0, loss_bar = 0;
  for (int n = 1; n <= cfg.n_max; ++n) {
    TunerStep s;
    s.n = n;
    s.delta = std::exp(log_delta);
    s.loss = loss(s.delta, n);
    log_bar += (log_delta - log_bar) / n;
    loss_bar += (s.loss - loss_bar) / n;
    s.delta_bar = std::exp(log_bar);
    s.loss_bar = loss_bar;

    const double gamma = cfg.gain * std::pow(static_cast<double>(n), -cfg.omega);
    log_delta -= gamma * s.loss;
    // Keep strictly inside the open interval.
    if (log_delta <= log_lo || log_delta >= log_hi) {
      s.clamped = true;
      log_delta = std::clamp(log_delta, log_lo + 1e-9, log_hi - 1e-9);
    }
    trace.steps.push_back(s);
  }
  return trace;
}

StateSource make_chain_source(ModelPtr model, VectorXd q0, IntegratorConfig cfg, int burnin,
                              RandomStream& rng) {
  for (int i = 0; i < burnin; ++i) {
    const TransitionRecord r = hmc_transition(*model, q0, cfg, rng);
    if (r.accepted) q0 = r.proposal.q;
  }
  auto state = std::make_shared<VectorXd>(std::move(q0));
  return [model = std::move(model), cfg, state](RandomStream& r) {
    const TransitionRecord rec = hmc_transition(*model, *state, cfg, r);
    if (rec.accepted) *state = rec.proposal.q;
    return *state;
  };
}

StateSource make_exact_source(ModelPtr model) {
  return [model = std::move(model)](RandomStream& r) -> VectorXd {
    return model->sample(1, r).row(0).transpose();
  };
}

TunerTrace tune_threshold(const TargetModel& model, const StateSource& source,
                          const TunerConfig& cfg, const IntegratorConfig& base, RandomStream& rng) {
  base.validate();
  // A draw whose trajectory diverges at either threshold carries no
  // similarity information; it is replaced by the next draw.
  constexpr int kMaxRedraws = 100;
  auto loss = [&](double delta, int n) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const VectorXd q = source(rng);
      const VectorXd p = sample_momentum(model, q, rng);
      try {
        return digits_of_similarity(model, PhasePointd(q, p), base.with_threshold(delta),
                                    cfg.baseline_delta) +
               cfg.kappa;
      } catch (const DivergenceError&) {
      }
    }
    throw DivergenceError("tuner iteration " + std::to_string(n) + ": every draw diverged");
  };
  return robbins_monro(loss, cfg);
}

std::vector<BPoint> monte_carlo_B(const TargetModel& model, const std::vector<double>& deltas,
                                  const std::vector<PhasePointd>& points,
                                  const IntegratorConfig& base, double kappa,
                                  double baseline_delta) {
  if (points.empty()) throw std::invalid_argument("monte_carlo_B: no points");
  // A point enters every delta or none, so the curve is averaged over one set.
  std::vector<double> sums(deltas.size(), 0.0);
  Index used = 0;
  std::vector<double> row(deltas.size());
  for (const PhasePointd& z : points) {
    try {
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        row[i] = digits_of_similarity(model, z, base.with_threshold(deltas[i]), baseline_delta);
      }
    } catch (const DivergenceError&) {
      continue;
    }
    for (std::size_t i = 0; i < deltas.size(); ++i) sums[i] += row[i];
    ++used;
  }
  if (used == 0) throw std::runtime_error("monte_carlo_B: every point diverged");
  std::vector<BPoint> out;
  out.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    out.push_back({deltas[i], sums[i] / static_cast<double>(used) + kappa, used});
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0) || !(hi > lo)) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) out[i] = std::pow(10.0, a + (b - a) * i / (count - 1));
  return out;
}

std::vector<double> isotonic_fit(const std::vector<double>& y) {
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : y) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t w = width.back() + width[width.size() - 2];
      const double merged =
          (level.back() * width.back() + level[level.size() - 2] * width[width.size() - 2]) / w;
      level.pop_back();
      width.pop_back();
      level.back() = merged;
      width.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t i = 0; i < level.size(); ++i) out.insert(out.end(), width[i], level[i]);
  return out;
}

}  // namespace rmhmc
