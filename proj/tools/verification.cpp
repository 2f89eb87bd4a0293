#include "verification.hpp"

#include "rmhmc/diagnostics.hpp"
#include "rmhmc/samplers.hpp"
#include "rmhmc/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

namespace rmhmc::app {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::vector<double> kCoarseSweep{1e-1, 1e-3, 1e-5, 1e-7, 1e-9};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

IntegratorConfig glf(double eps, int k, double delta, bool newton = false) {
  IntegratorConfig c;
  c.step_size = eps;
  c.num_steps = k;
  c.threshold = delta;
  if (newton) c.momentum_solver = c.position_solver = SolverKind::Newton;
  return c;
}

IntegratorConfig banana_glf(double delta, bool newton = false) { return glf(0.04, 20, delta, newton); }

std::vector<PhasePointd> stationary_points(const TargetModel& model, int n, RandomStream& rng) {
  const MatrixXd q = model.sample(n, rng);
  std::vector<PhasePointd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < q.rows(); ++i) {
    const VectorXd qi = q.row(i).transpose();
    out.emplace_back(qi, sample_momentum(model, qi, rng));
  }
  return out;
}

std::vector<double> are_values(const TargetModel& m, const std::vector<PhasePointd>& pts,
                               const IntegratorConfig& c) {
  std::vector<double> v;
  for (const PhasePointd& z : pts) v.push_back(reversibility_error(m, z, c).are);
  return v;
}

std::vector<double> vpe_values(const TargetModel& m, const std::vector<PhasePointd>& pts,
                               const IntegratorConfig& c, double omega) {
  std::vector<double> v;
  for (const PhasePointd& z : pts) {
    try {
      v.push_back(volume_preservation_error(m, z, c, omega).vpe);
    } catch (const DivergenceError&) {
      v.push_back(kInf);
    }
  }
  return v;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

bool non_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) return false;
  }
  return true;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + sci(v[i]);
  return s + "]";
}

struct Verdict {
  bool pass;
  std::string detail;
};

// --- 1 ----------------------------------------------------------------------

Verdict constant_metric_collapse(const VerificationScale&, std::uint64_t seed) {
  RandomStream rng(seed);
  const Index m = 5;
  MatrixXd a(m, m), b(m, m);
  for (Index i = 0; i < m; ++i) a.row(i) = rng.normal_vector(m).transpose();
  for (Index i = 0; i < m; ++i) b.row(i) = rng.normal_vector(m).transpose();
  const MatrixXd cov = a * a.transpose() + MatrixXd::Identity(m, m);
  const MatrixXd metric = b * b.transpose() + MatrixXd::Identity(m, m);
  const GaussianModel model(rng.normal_vector(m), cov, metric);

  const VectorXd q0 = model.sample(1, rng).row(0).transpose();
  const PhasePointd z0(q0, sample_momentum(model, q0, rng));
  double worst = 0;
  for (int e = 1; e <= 9; ++e) {
    const IntegratorConfig cfg = glf(0.1, 1, std::pow(10.0, -e));
    PhasePointd g = z0, l = z0;
    for (int step = 0; step < 100; ++step) {
      g = glf_step(model, g, cfg).first;
      l = leapfrog_step(model, l, 0.1);
      worst = std::max(worst, std::max((g.q - l.q).lpNorm<Eigen::Infinity>(),
                                       (g.p - l.p).lpNorm<Eigen::Infinity>()));
    }
  }
  return {worst <= 1e-12, "max per-step deviation " + sci(worst) + " over 9 thresholds (tol 1e-12)"};
}

// --- 2 ----------------------------------------------------------------------

Verdict exact_regime(const VerificationScale& s, std::uint64_t seed) {
  const IntegratorConfig banana_cfg = banana_glf(1e-13, true);
  const IntegratorConfig funnel_cfg = glf(0.2, 25, 1e-13, true);
  const IntegratorConfig student_cfg = glf(0.3, 20, 1e-13, true);
  struct Case {
    std::string name;
    ModelPtr model;
    IntegratorConfig cfg;
  };
  const std::vector<Case> cases{
      {"banana", std::make_shared<BananaModel>(BananaModel::standard()), banana_cfg},
      {"funnel", std::make_shared<FunnelModel>(), funnel_cfg},
      {"student-t", std::make_shared<StudentTModel>(StudentTModel::multiscale(1e4)), student_cfg},
  };
  bool pass = true;
  std::ostringstream d;
  std::uint64_t k = 0;
  for (const Case& c : cases) {
    RandomStream rng = RandomStream(seed).split(k++);
    const auto pts = stationary_points(*c.model, s.reversibility_points, rng);
    const std::vector<PhasePointd> head(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), s.omega_points));
    const double omega = select_fd_perturbation(*c.model, head, c.cfg).omega;
    const double are = median(are_values(*c.model, pts, c.cfg));
    const double vpe = median(vpe_values(*c.model, pts, c.cfg, omega));
    const bool ok = are < 1e-9 && vpe < 1e-5 && (c.name != "banana" || omega == 1e-5);
    pass = pass && ok;
    d << c.name << ": ARE " << sci(are) << " VPE " << sci(vpe) << " omega " << sci(omega) << "; ";
  }
  d << "(ARE < 1e-9, VPE < 1e-5, banana omega = 1e-5)";
  return {pass, d.str()};
}

// --- 3 ----------------------------------------------------------------------

Verdict threshold_monotonicity(const VerificationScale& s, std::uint64_t seed) {
  const BananaModel model = BananaModel::standard();
  RandomStream rng(seed);
  const auto pts = stationary_points(model, s.monotonicity_points, rng);
  const std::vector<PhasePointd> head(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), s.omega_points));
  const double omega = select_fd_perturbation(model, head, banana_glf(1e-10)).omega;

  std::vector<double> are, vpe, lp, lq;
  for (double delta : kCoarseSweep) {
    const IntegratorConfig cfg = banana_glf(delta);
    are.push_back(median(are_values(model, pts, cfg)));
    vpe.push_back(median(vpe_values(model, pts, cfg, omega)));
    std::vector<double> p, q;
    for (const PhasePointd& z : pts) {
      try {
        const EffortSummary e = summarize(integrate_trajectory(model, z, cfg).stats);
        p.push_back(e.mean_l_p());
        q.push_back(e.mean_l_q());
      } catch (const DivergenceError&) {
        p.push_back(kInf);
        q.push_back(kInf);
      }
    }
    lp.push_back(median(p));
    lq.push_back(median(q));
  }
  const bool pass = non_increasing(are) && non_increasing(vpe) && non_decreasing(lp) && non_decreasing(lq);
  return {pass, "delta 1e-1..1e-9: ARE " + list(are) + " VPE " + list(vpe) + " l_p " + list(lp) +
                    " l_q " + list(lq)};
}

// --- 4 ----------------------------------------------------------------------

Verdict ergodicity_plateau(const VerificationScale& s, std::uint64_t seed) {
  auto model = std::make_shared<StudentTModel>(StudentTModel::multiscale(1e4));
  RandomStream ref_rng = RandomStream(seed).split(1);
  const MatrixXd reference = model->sample(s.ergodicity_samples, ref_rng);

  // Identical chain and projection streams for every configuration.
  auto ks_for = [&](const TargetModel& m, const IntegratorConfig& c) {
    RandomStream rng = RandomStream(seed).split(2);
    VectorXd q0 = VectorXd::Zero(m.dim());
    q0 = run_chain(m, q0, c, s.ergodicity_burnin, rng).positions.bottomRows(1).transpose();
    const ChainTrace t = run_chain(m, q0, c, s.ergodicity_samples, rng);
    RandomStream proj = RandomStream(seed).split(3);
    return median(random_projection_ks(t.positions, reference, 100, proj));
  };

  std::vector<double> rm;
  for (double delta : {1e-1, 1e-2, 1e-5, 1e-9}) rm.push_back(ks_for(*model, glf(0.3, 20, delta)));
  const EuclideanModel euclid(model);
  std::vector<double> eu;
  for (double eps : {0.1, 0.5, 0.8}) {
    IntegratorConfig c;
    c.kind = IntegratorKind::Leapfrog;
    c.step_size = eps;
    c.num_steps = 20;
    eu.push_back(ks_for(euclid, c));
  }
  const double at2 = rm[1], at9 = rm[3];
  const double best_eu = *std::min_element(eu.begin(), eu.end());
  const bool pass = std::abs(at2 - at9) <= 0.2 * at9 && std::max(at2, at9) < best_eu;
  return {pass, "RMHMC KS at delta 1e-1,1e-2,1e-5,1e-9 " + list(rm) + "; Euclidean eps 0.1,0.5,0.8 " +
                    list(eu) + " (|KS(1e-2)-KS(1e-9)| <= 20%, both below every Euclidean run)"};
}

// --- 5 ----------------------------------------------------------------------

struct SolverMeans {
  double fp;
  double newton;
};

SolverMeans momentum_iterations(const TargetModel& m, const std::vector<PhasePointd>& pts,
                                IntegratorConfig fp) {
  IntegratorConfig nw = fp;
  nw.momentum_solver = nw.position_solver = SolverKind::Newton;
  auto mean_lp = [&](const IntegratorConfig& c) {
    double total = 0, steps = 0;
    for (const PhasePointd& z : pts) {
      try {
        const EffortSummary e = summarize(integrate_trajectory(m, z, c).stats);
        total += static_cast<double>(e.total_l_p);
        steps += static_cast<double>(e.steps);
      } catch (const DivergenceError&) {
      }
    }
    return steps > 0 ? total / steps : kInf;
  };
  return {mean_lp(fp), mean_lp(nw)};
}

Verdict newton_economy(const VerificationScale& s, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<std::pair<std::string, SolverMeans>> rows;
  {
    const BananaModel m = BananaModel::standard();
    rows.emplace_back("banana", momentum_iterations(m, stationary_points(m, s.newton_points, rng), banana_glf(1e-9)));
  }
  {
    const StudentTModel m = StudentTModel::multiscale(1e4);
    rows.emplace_back("student-t",
                      momentum_iterations(m, stationary_points(m, s.newton_points, rng), glf(0.3, 20, 1e-9)));
  }
  {
    // Logistic states (beta, alpha) come from the Gibbs chain.
    auto data = std::make_shared<const LogisticData>(synthetic_logistic_data(270, 14, rng));
    const IntegratorConfig fp = glf(0.2, 20, 1e-9);
    LogisticState st{VectorXd::Zero(14), 1.0};
    for (int i = 0; i < 200; ++i) st = gibbs_logistic_step(st, data, fp.with_threshold(1e-6), rng);
    double fp_sum = 0, nw_sum = 0;
    for (int i = 0; i < s.newton_points; ++i) {
      st = gibbs_logistic_step(st, data, fp.with_threshold(1e-6), rng);
      const LogisticModel m(data, st.alpha);
      const PhasePointd z(st.beta, sample_momentum(m, st.beta, rng));
      const SolverMeans one = momentum_iterations(m, {z}, fp);
      fp_sum += one.fp;
      nw_sum += one.newton;
    }
    rows.emplace_back("logistic", SolverMeans{fp_sum / s.newton_points, nw_sum / s.newton_points});
  }
  bool pass = true;
  std::ostringstream d;
  for (const auto& [name, r] : rows) {
    pass = pass && r.newton <= 4 && r.newton < r.fp;
    d << name << ": Newton " << sci(r.newton) << " vs fixed point " << sci(r.fp) << "; ";
  }
  d << "(Newton <= 4 and below fixed point)";
  return {pass, d.str()};
}

// --- 6 ----------------------------------------------------------------------

Verdict broken_derivative(const VerificationScale& s, std::uint64_t seed) {
  auto clean = std::make_shared<BananaModel>(BananaModel::standard());
  const CorruptedModel corrupted(clean, CorruptionSpec{0, 0, 1, 0.1});
  RandomStream rng(seed);
  const auto pts = stationary_points(*clean, s.corruption_points, rng);

  std::vector<double> vpe;
  double are_loose = 0, are_tight = 0;
  for (int e = 1; e <= 9; ++e) {
    const double delta = std::pow(10.0, -e);
    const IntegratorConfig cfg = banana_glf(delta);
    vpe.push_back(median(vpe_values(corrupted, pts, cfg, 1e-5)));
    if (e == 1) are_loose = median(are_values(corrupted, pts, cfg));
    if (e == 9) are_tight = median(are_values(corrupted, pts, cfg));
  }
  const bool plateau = *std::min_element(vpe.begin(), vpe.end()) > 1e-2;
  const bool are_drop = are_tight * 10 <= are_loose;

  RandomStream ref_rng = RandomStream(seed).split(1);
  const MatrixXd reference = clean->sample(s.corruption_samples, ref_rng);
  auto ks_for = [&](const TargetModel& m) {
    RandomStream chain = RandomStream(seed).split(2);
    const IntegratorConfig cfg = banana_glf(1e-9);
    VectorXd q0 = run_chain(m, VectorXd::Zero(2), cfg, 1000, chain).positions.bottomRows(1).transpose();
    const ChainTrace t = run_chain(m, q0, cfg, s.corruption_samples, chain);
    RandomStream proj = RandomStream(seed).split(3);
    return median(random_projection_ks(t.positions, reference, 100, proj));
  };
  const double ks_bad = ks_for(corrupted), ks_good = ks_for(*clean);
  const bool ks_gap = ks_bad >= 2 * ks_good;
  return {plateau && are_drop && ks_gap,
          "VPE over delta 1e-1..1e-9 " + list(vpe) + " (all > 1e-2); ARE " + sci(are_loose) + " -> " +
              sci(are_tight) + " (>= 10x drop); KS corrupted " + sci(ks_bad) + " vs clean " + sci(ks_good) +
              " (>= 2x)"};
}

// --- 7 ----------------------------------------------------------------------

Verdict tuner_convergence(const VerificationScale& s, std::uint64_t seed) {
  auto model = std::make_shared<BananaModel>(BananaModel::standard());
  RandomStream rng(seed);
  TunerConfig tc;
  tc.kappa = 8;
  tc.n_max = s.tuner_iterations;
  const IntegratorConfig base = banana_glf(tc.baseline_delta);
  const StateSource src = make_chain_source(model, VectorXd::Zero(2), base, 100, rng);
  const TunerTrace trace = tune_threshold(*model, src, tc, base, rng);
  const double d = trace.final_delta(), l = trace.final_loss_bar();
  const bool banana_ok = d >= 1e-9 && d <= 1e-7 && std::abs(l) < 0.25;

  // Noisy loss with a known root.
  const double target = 3e-6;
  TunerConfig oc;
  oc.kappa = 6;
  oc.n_max = 1000;
  RandomStream noise = RandomStream(seed).split(1);
  const TunerTrace oracle = robbins_monro(
      [&](double delta, int) { return std::log10(delta / target) + 0.5 * noise.normal(); }, oc);
  const double err = std::abs(std::log10(oracle.final_delta() / target));
  return {banana_ok && err < 0.1, "banana delta_bar " + sci(d) + " L_bar " + sci(l) +
                                      " (in [1e-9, 1e-7], |L_bar| < 0.25); oracle error " + sci(err) +
                                      " log10 units (< 0.1)"};
}

// --- 8 ----------------------------------------------------------------------

Verdict involution_oracle(const VerificationScale& s, std::uint64_t seed) {
  RandomStream rng(seed);
  const InvolutionReport r = biased_involution_experiment(s.involution_samples, rng);
  const bool pass = r.ks_biased < 0.01 && r.ks_corrected < 0.01 && std::abs(r.kl_estimate - 0.5) <= 0.02;
  return {pass, "KS biased " + sci(r.ks_biased) + ", KS corrected " + sci(r.ks_corrected) + " (< 0.01); KL " +
                    sci(r.kl_estimate) + " (within 0.02 of 0.5)"};
}

// --- 9 ----------------------------------------------------------------------

Verdict kernel_similarity_clamp(const VerificationScale& s, std::uint64_t seed) {
  const BananaModel model = BananaModel::standard();
  RandomStream rng(seed);
  const MatrixXd q = model.sample(s.similarity_points, rng);

  RandomStream same_rng = RandomStream(seed).split(1);
  const KernelSimilarityReport same = kernel_similarity(model, banana_glf(1e-3), banana_glf(1e-3), q, same_rng);
  const bool zeros = std::all_of(same.differences.begin(), same.differences.end(),
                                 [](double x) { return x == 0.0; });
  const bool agreement = same.rejection_agreement == same.rejection_rate_a;

  RandomStream pair_rng = RandomStream(seed).split(2);
  const KernelSimilarityReport r = kernel_similarity(model, banana_glf(1e-3), banana_glf(1e-10), q, pair_rng);
  std::vector<double> logs;
  for (double x : r.differences) logs.push_back(std::log10(std::max(x, 1e-16)));
  const double med = logs.empty() ? -16.0 : median(logs);
  return {zeros && agreement && med <= -2,
          std::string("identical kernels: ") + (zeros ? "zero differences" : "NONZERO differences") +
              ", agreement " + sci(same.rejection_agreement) + " = rejection rate " +
              sci(same.rejection_rate_a) + "; delta 1e-3 vs 1e-10 median log10 difference " + sci(med) +
              " (<= -2)"};
}

// --- 10 ---------------------------------------------------------------------

Verdict derivative_validation(const VerificationScale& s, std::uint64_t seed) {
  RandomStream rng(seed);
  auto data = std::make_shared<const LogisticData>(synthetic_logistic_data(270, 14, rng));
  const BananaModel banana = BananaModel::standard();
  const LogisticModel logistic(data, 1.0);
  const FunnelModel funnel;
  const StudentTModel student = StudentTModel::multiscale(1e4);

  struct Case {
    const TargetModel* model;
    std::function<VectorXd()> draw;
  };
  const std::vector<Case> cases{
      {&banana, [&] { return VectorXd((6 * VectorXd::NullaryExpr(2, [&] { return rng.uniform(); })).array() - 3); }},
      {&logistic, [&] { return VectorXd(0.5 * rng.normal_vector(14)); }},
      {&funnel,
       [&] {
         VectorXd q = rng.normal_vector(11);
         q[FunnelModel::kVIndex] = 2 * rng.normal();
         return q;
       }},
      {&student, [&] { return VectorXd(student.sample(1, rng).row(0).transpose()); }},
  };
  bool pass = true;
  std::ostringstream d;
  for (const Case& c : cases) {
    double worst_g = 0, worst_m = 0;
    for (int i = 0; i < s.derivative_points; ++i) {
      const GradientCheck g = check_model_derivatives(*c.model, c.draw());
      worst_g = std::max(worst_g, g.grad_log_density_rel_err);
      worst_m = std::max(worst_m, g.metric_grads_rel_err);
    }
    pass = pass && worst_g < 1e-4 && worst_m < 1e-4;
    d << c.model->name() << " " << sci(worst_g) << "/" << sci(worst_m) << "; ";
  }
  d << "(worst gradient/metric-gradient relative error < 1e-4)";
  return {pass, d.str()};
}

}  // namespace

VerificationScale VerificationScale::full() {
  return {"full", 100, 20, 500, 100000, 1000, 200, 100, 100000, 1000, 1000000, 1000, 100};
}

VerificationScale VerificationScale::reduced() {
  return {"reduced", 30, 10, 100, 20000, 500, 60, 40, 20000, 1000, 200000, 300, 30};
}

std::vector<CheckOutcome> run_verification(const VerificationScale& scale, std::uint64_t seed,
                                           std::ostream& out, const std::vector<int>& only) {
  using Fn = Verdict (*)(const VerificationScale&, std::uint64_t);
  struct Check {
    int id;
    const char* title;
    Fn fn;
  };
  static const Check checks[] = {
      {1, "constant-metric collapse", constant_metric_collapse},
      {2, "exact-regime reversibility and volume", exact_regime},
      {3, "threshold monotonicity", threshold_monotonicity},
      {4, "ergodicity plateau", ergodicity_plateau},
      {5, "Newton iteration economy", newton_economy},
      {6, "broken-derivative pathology", broken_derivative},
      {7, "tuner convergence", tuner_convergence},
      {8, "biased involution oracle", involution_oracle},
      {9, "kernel similarity clamp", kernel_similarity_clamp},
      {10, "metric and gradient validation", derivative_validation},
  };
  std::vector<CheckOutcome> results;
  for (const Check& c : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckOutcome r{c.id, c.title, false, "", 0};
    try {
      const Verdict v = c.fn(scale, seed + static_cast<std::uint64_t>(c.id));
      r.pass = v.pass;
      r.detail = v.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.1fs", r.seconds);
    out << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.title << "): " << r.detail
        << " [" << secs << "]" << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace rmhmc::app
