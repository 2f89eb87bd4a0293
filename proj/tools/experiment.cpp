#include "experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace rmhmc::app {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kSyntheticDataSeed = 270014;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Streams split off the experiment seed. Fixed per role, never per delta, so
// every delta in a sweep sees the same momenta and uniforms.
enum StreamRole : std::uint64_t {
  kPointStream = 1,
  kMomentumStream = 2,
  kChainStream = 3,
  kReferenceStream = 4,
  kKernelStream = 5,
  kProjectionStream = 6,
  kTunerStream = 7,
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

long parse_long(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw UsageError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

// One entry per config key. `get` returns nullopt when the field is unset.
struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

template <typename T>
std::optional<std::string> opt_num(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"experiment", "model", [](ExperimentConfig& c, const std::string& v) { c.model = v; },
       [](const ExperimentConfig& c) { return std::optional<std::string>(c.model); }},
      {"experiment", "samples",
       [](ExperimentConfig& c, const std::string& v) { c.n_samples = parse_long("samples", v); },
       [](const ExperimentConfig& c) { return opt_num(c.n_samples); }},
      {"experiment", "burnin",
       [](ExperimentConfig& c, const std::string& v) { c.n_burnin = parse_long("burnin", v); },
       [](const ExperimentConfig& c) { return opt_num(c.n_burnin); }},
      {"experiment", "points",
       [](ExperimentConfig& c, const std::string& v) { c.n_points = parse_long("points", v); },
       [](const ExperimentConfig& c) { return opt_num(c.n_points); }},
      {"experiment", "seed",
       [](ExperimentConfig& c, const std::string& v) {
         const long s = parse_long("seed", v);
         if (s < 0) throw UsageError("seed: must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       },
       [](const ExperimentConfig& c) { return std::optional<std::string>(std::to_string(c.seed)); }},
      {"experiment", "out", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return std::optional<std::string>(c.out_dir); }},
      {"experiment", "sweep",
       [](ExperimentConfig& c, const std::string& v) { c.sweep = parse_list("sweep", v); },
       [](const ExperimentConfig& c) {
         return c.sweep.empty() ? std::nullopt : std::optional<std::string>(join(c.sweep));
       }},
      {"experiment", "baseline_delta",
       [](ExperimentConfig& c, const std::string& v) {
         c.baseline_delta = parse_double("baseline_delta", v);
       },
       [](const ExperimentConfig& c) { return opt_num(c.baseline_delta); }},

      {"experiment", "ergodicity",
       [](ExperimentConfig& c, const std::string& v) { c.ergodicity = parse_bool("ergodicity", v); },
       [](const ExperimentConfig& c) {
         return c.ergodicity ? std::optional<std::string>(*c.ergodicity ? "true" : "false") : std::nullopt;
       }},

      {"integrator", "kind", [](ExperimentConfig& c, const std::string& v) { c.integrator = v; },
       [](const ExperimentConfig& c) { return c.integrator; }},
      {"integrator", "solver", [](ExperimentConfig& c, const std::string& v) { c.solver = v; },
       [](const ExperimentConfig& c) { return c.solver; }},
      {"integrator", "eps",
       [](ExperimentConfig& c, const std::string& v) { c.step_size = parse_double("eps", v); },
       [](const ExperimentConfig& c) { return opt_num(c.step_size); }},
      {"integrator", "steps",
       [](ExperimentConfig& c, const std::string& v) {
         c.num_steps = static_cast<int>(parse_long("steps", v));
       },
       [](const ExperimentConfig& c) { return opt_num(c.num_steps); }},
      {"integrator", "delta",
       [](ExperimentConfig& c, const std::string& v) { c.threshold = parse_double("delta", v); },
       [](const ExperimentConfig& c) { return opt_num(c.threshold); }},
      {"integrator", "max_iters",
       [](ExperimentConfig& c, const std::string& v) {
         c.max_iters = static_cast<int>(parse_long("max_iters", v));
       },
       [](const ExperimentConfig& c) { return opt_num(c.max_iters); }},

      {"model", "student_t_variance",
       [](ExperimentConfig& c, const std::string& v) {
         c.student_t_variance = parse_double("student_t_variance", v);
       },
       [](const ExperimentConfig& c) { return opt_num(c.student_t_variance); }},
      {"model", "funnel_alpha",
       [](ExperimentConfig& c, const std::string& v) { c.funnel_alpha = parse_double("funnel_alpha", v); },
       [](const ExperimentConfig& c) { return opt_num(c.funnel_alpha); }},
      {"model", "corruption",
       [](ExperimentConfig& c, const std::string& v) { c.corruption = parse_double("corruption", v); },
       [](const ExperimentConfig& c) { return opt_num(c.corruption); }},
      {"model", "logistic_alpha",
       [](ExperimentConfig& c, const std::string& v) {
         c.logistic_alpha = parse_double("logistic_alpha", v);
       },
       [](const ExperimentConfig& c) { return opt_num(c.logistic_alpha); }},
      {"model", "heart_csv", [](ExperimentConfig& c, const std::string& v) { c.heart_csv = v; },
       [](const ExperimentConfig& c) {
         return c.heart_csv.empty() ? std::nullopt : std::optional<std::string>(c.heart_csv);
       }},
      {"model", "synthetic_fallback",
       [](ExperimentConfig& c, const std::string& v) {
         c.synthetic_fallback = parse_bool("synthetic_fallback", v);
       },
       [](const ExperimentConfig& c) {
         return std::optional<std::string>(c.synthetic_fallback ? "true" : "false");
       }},

      {"tuner", "kappa",
       [](ExperimentConfig& c, const std::string& v) { c.kappa = parse_double("kappa", v); },
       [](const ExperimentConfig& c) { return opt_num(c.kappa); }},
      {"tuner", "iterations",
       [](ExperimentConfig& c, const std::string& v) {
         c.tuner_iterations = static_cast<int>(parse_long("iterations", v));
       },
       [](const ExperimentConfig& c) { return opt_num(c.tuner_iterations); }},
      {"tuner", "initial_delta",
       [](ExperimentConfig& c, const std::string& v) {
         c.initial_delta = parse_double("initial_delta", v);
       },
       [](const ExperimentConfig& c) { return opt_num(c.initial_delta); }},
  };
  return f;
}

struct ModelDefaults {
  double step_size;
  int num_steps;
  double kappa;
};

ModelDefaults defaults_for(const std::string& model) {
  if (model == "banana") return {0.04, 20, 8};
  if (model == "funnel") return {0.2, 25, 6};
  if (model == "student-t") return {0.3, 20, 8};
  return {0.2, 20, 8};  // logistic
}

Json config_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  for (const Field& f : fields()) {
    if (auto v = f.get(cfg)) j[f.section + "." + f.key] = *v;
  }
  return j;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

double mean_finite(const std::vector<double>& xs) {
  double s = 0;
  std::size_t n = 0;
  for (double x : xs) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

void add_distribution(ResultTable& t, const std::string& model, double delta,
                      const std::string& metric, const std::vector<double>& xs, std::uint64_t seed) {
  t.add(model, delta, metric, "median", median(xs), seed);
  t.add(model, delta, metric, "q10", quantile(xs, 0.1), seed);
  t.add(model, delta, metric, "q90", quantile(xs, 0.9), seed);
  t.add(model, delta, metric, "mean_finite", mean_finite(xs), seed);
}

// Runs fn(i) for i in [0, n) on a small pool; results are written by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> known_models() { return {"banana", "funnel", "student-t", "logistic"}; }

std::vector<double> default_sweep() {
  std::vector<double> s;
  for (int e = 1; e <= 9; ++e) s.push_back(std::pow(10.0, -e));
  return s;
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']') throw UsageError(where + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) {
      return f.section == section && f.key == key;
    });
    if (it == fs.end()) throw UsageError(where + ": unknown key '" + section + "." + key + "'");
    it->set(cfg, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  std::string section;
  for (const Field& f : fields()) {
    const auto v = f.get(cfg);
    if (!v) continue;
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    os << f.key << " = " << *v << '\n';
  }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

ResolvedExperiment resolve(const ExperimentConfig& cfg) {
  const auto models = known_models();
  if (std::find(models.begin(), models.end(), cfg.model) == models.end()) {
    throw UsageError("model: unknown model '" + cfg.model + "'");
  }
  ResolvedExperiment ex;
  ex.config = cfg;
  const ModelDefaults d = defaults_for(cfg.model);

  if (cfg.corruption && cfg.model != "banana") {
    throw UsageError("corruption: only supported for the banana model");
  }
  if (cfg.model == "banana") {
    ex.target = std::make_shared<BananaModel>(BananaModel::standard());
    if (cfg.corruption && *cfg.corruption != 0) {
      ex.target = std::make_shared<CorruptedModel>(ex.target, CorruptionSpec{0, 0, 1, *cfg.corruption});
    }
  } else if (cfg.model == "funnel") {
    const double a = cfg.funnel_alpha.value_or(1e4);
    if (!(a > 0)) throw UsageError("funnel_alpha: must be positive");
    ex.target = std::make_shared<FunnelModel>(a);
  } else if (cfg.model == "student-t") {
    const double v = cfg.student_t_variance.value_or(1e4);
    if (!(v > 0)) throw UsageError("student_t_variance: must be positive");
    ex.target = std::make_shared<StudentTModel>(StudentTModel::multiscale(v));
  } else {
    if (!cfg.heart_csv.empty() && (std::filesystem::exists(cfg.heart_csv) || !cfg.synthetic_fallback)) {
      // Header detection: retry once without the first line.
      try {
        ex.data = std::make_shared<const LogisticData>(load_heart_dataset(cfg.heart_csv, false));
      } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find(":1: non-numeric") == std::string::npos) throw;
        ex.data = std::make_shared<const LogisticData>(load_heart_dataset(cfg.heart_csv, true));
      }
    } else {
      RandomStream rng(kSyntheticDataSeed);
      ex.data = std::make_shared<const LogisticData>(synthetic_logistic_data(270, 14, rng));
    }
    const double a = cfg.logistic_alpha.value_or(1.0);
    if (!(a > 0)) throw UsageError("logistic_alpha: must be positive");
    ex.target = std::make_shared<LogisticModel>(ex.data, a);
  }

  IntegratorConfig ic;
  const std::string kind = cfg.integrator.value_or("glf");
  if (kind == "leapfrog") {
    ic.kind = IntegratorKind::Leapfrog;
  } else if (kind == "glf") {
    ic.kind = IntegratorKind::GeneralizedLeapfrog;
  } else if (kind == "midpoint") {
    ic.kind = IntegratorKind::ImplicitMidpoint;
  } else {
    throw UsageError("integrator: expected leapfrog, glf or midpoint, got '" + kind + "'");
  }
  const std::string solver = cfg.solver.value_or("fp");
  if (solver == "fp") {
    ic.momentum_solver = ic.position_solver = SolverKind::FixedPoint;
  } else if (solver == "newton") {
    ic.momentum_solver = SolverKind::Newton;
    ic.position_solver = SolverKind::FixedPoint;
  } else if (solver == "newton-both") {
    ic.momentum_solver = ic.position_solver = SolverKind::Newton;
  } else {
    throw UsageError("solver: expected fp, newton or newton-both, got '" + solver + "'");
  }
  ic.step_size = cfg.step_size.value_or(d.step_size);
  ic.num_steps = cfg.num_steps.value_or(d.num_steps);
  ic.threshold = cfg.threshold.value_or(1e-9);
  ic.max_iters = cfg.max_iters;
  try {
    ic.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  ex.integrator = ic;
  ex.model = ic.kind == IntegratorKind::Leapfrog ? std::make_shared<EuclideanModel>(ex.target) : ex.target;

  ex.n_samples = cfg.n_samples.value_or(1000);
  ex.n_burnin = cfg.n_burnin.value_or(100);
  ex.n_points = cfg.n_points.value_or(100);
  if (ex.n_samples < 1) throw UsageError("samples: must be >= 1");
  if (ex.n_burnin < 0) throw UsageError("burnin: must be >= 0");
  if (ex.n_points < 1) throw UsageError("points: must be >= 1");

  ex.sweep = cfg.sweep.empty() ? default_sweep() : cfg.sweep;
  for (double s : ex.sweep) {
    if (!(s > 0 && s < 1)) throw UsageError("sweep: thresholds must lie in (0, 1)");
  }
  ex.baseline_delta = cfg.baseline_delta.value_or(1e-10);
  if (!(ex.baseline_delta > 0)) throw UsageError("baseline_delta: must be positive");
  ex.ergodicity = cfg.ergodicity.value_or(ex.target->has_analytic_sampler());
  if (ex.ergodicity && !ex.target->has_analytic_sampler()) {
    throw UsageError("ergodicity: unsupported metric for model '" + cfg.model +
                     "': KS/MMD/SW1 need a reference sampler and this model has none");
  }

  ex.tuner.kappa = cfg.kappa.value_or(d.kappa);
  ex.tuner.n_max = cfg.tuner_iterations.value_or(1000);
  ex.tuner.initial_delta = cfg.initial_delta.value_or(1e-2);
  ex.tuner.baseline_delta = ex.baseline_delta;
  try {
    ex.tuner.validate();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("tuner: ") + e.what());
  }
  return ex;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

void ResultTable::write_csv(std::ostream& os) const {
  os << "model,delta,metric,statistic,value,seed\n";
  for (const ResultRow& r : rows) {
    os << r.model << ',' << format_double(r.delta) << ',' << r.metric << ',' << r.statistic << ','
       << format_double(r.value) << ',' << r.seed << '\n';
  }
}

SampleOutput run_sample(const ResolvedExperiment& ex) {
  const RandomStream root(ex.config.seed);
  RandomStream rng = root.split(kChainStream);
  const Index m = ex.model->dim();
  SampleOutput out;
  if (ex.data) {
    const IntegratorConfig& cfg = ex.integrator;
    LogisticState s{VectorXd::Zero(m), ex.config.logistic_alpha.value_or(1.0)};
    for (long i = 0; i < ex.n_burnin; ++i) s = gibbs_logistic_step(s, ex.data, cfg, rng);
    out.positions.resize(ex.n_samples, m);
    for (long i = 0; i < ex.n_samples; ++i) {
      TransitionRecord rec;
      s = gibbs_logistic_step(s, ex.data, cfg, rng, &rec);
      out.positions.row(i) = s.beta.transpose();
      out.alphas.push_back(s.alpha);
      out.records.push_back(std::move(rec));
    }
    return out;
  }
  VectorXd q0 = VectorXd::Zero(m);
  if (ex.n_burnin > 0) {
    q0 = run_chain(*ex.model, q0, ex.integrator, ex.n_burnin, rng).positions.bottomRows(1).transpose();
  }
  ChainTrace t = run_chain(*ex.model, q0, ex.integrator, ex.n_samples, rng);
  out.positions = std::move(t.positions);
  out.records = std::move(t.records);
  return out;
}

namespace {

// Stationary test points: analytic draws when available, otherwise the tail
// of a tight-threshold chain.
MatrixXd test_positions(const ResolvedExperiment& ex, RandomStream& rng) {
  if (ex.target->has_analytic_sampler()) return ex.target->sample(ex.n_points, rng);
  const IntegratorConfig cfg = ex.integrator.with_threshold(ex.baseline_delta);
  const ChainTrace t =
      run_chain(*ex.model, VectorXd::Zero(ex.model->dim()), cfg, ex.n_burnin + ex.n_points, rng);
  return t.positions.bottomRows(ex.n_points);
}

}  // namespace

ResultTable run_diagnose(const ResolvedExperiment& ex) {
  const RandomStream root(ex.config.seed);
  const std::string name = ex.config.model;
  const std::uint64_t seed = ex.config.seed;
  const TargetModel& model = *ex.model;
  const bool ergodicity = ex.ergodicity;

  RandomStream point_rng = root.split(kPointStream);
  const MatrixXd q = test_positions(ex, point_rng);
  RandomStream mom_rng = root.split(kMomentumStream);
  std::vector<PhasePointd> points;
  for (Index i = 0; i < q.rows(); ++i) {
    const VectorXd qi = q.row(i).transpose();
    points.emplace_back(qi, sample_momentum(model, qi, mom_rng));
  }

  const IntegratorConfig baseline = ex.integrator.with_threshold(ex.baseline_delta);
  std::vector<PhasePointd> omega_points(points.begin(),
                                        points.begin() + std::min<std::size_t>(points.size(), 20));
  double omega = 1e-5;
  if (ex.integrator.kind != IntegratorKind::Leapfrog) {
    omega = select_fd_perturbation(model, omega_points, baseline).omega;
  }

  MatrixXd reference;
  if (ergodicity) {
    RandomStream ref_rng = root.split(kReferenceStream);
    reference = ex.target->sample(ex.n_samples, ref_rng);
  }

  std::vector<ResultTable> cells(ex.sweep.size());
  parallel_for(ex.sweep.size(), [&](std::size_t c) {
    const double delta = ex.sweep[c];
    const IntegratorConfig cfg = ex.integrator.with_threshold(delta);
    ResultTable& t = cells[c];

    std::vector<double> are, rre, vpe, lp, lq;
    Index diverged = 0;
    for (const PhasePointd& z : points) {
      const ReversibilityReport r = reversibility_error(model, z, cfg);
      are.push_back(r.are);
      rre.push_back(r.rre);
      try {
        vpe.push_back(volume_preservation_error(model, z, cfg, omega).vpe);
      } catch (const DivergenceError&) {
        vpe.push_back(kInf);
      }
      try {
        const EffortSummary e = summarize(integrate_trajectory(model, z, cfg).stats);
        lp.push_back(e.mean_l_p());
        lq.push_back(e.mean_l_q());
      } catch (const DivergenceError&) {
        ++diverged;
        lp.push_back(kInf);
        lq.push_back(kInf);
      }
    }
    add_distribution(t, name, delta, "are", are, seed);
    add_distribution(t, name, delta, "rre", rre, seed);
    add_distribution(t, name, delta, "vpe", vpe, seed);
    add_distribution(t, name, delta, "l_p", lp, seed);
    add_distribution(t, name, delta, "l_q", lq, seed);
    t.add(name, delta, "divergence", "fraction", static_cast<double>(diverged) / points.size(), seed);
    t.add(name, delta, "vpe", "omega", omega, seed);

    RandomStream kernel_rng = root.split(kKernelStream);
    const KernelSimilarityReport ks = kernel_similarity(model, cfg, baseline, q, kernel_rng);
    std::vector<double> logs;
    for (double d : ks.differences) logs.push_back(std::log10(std::max(d, 1e-16)));
    t.add(name, delta, "kernel_similarity", "median_log10_difference",
          logs.empty() ? -16.0 : median(logs), seed);
    t.add(name, delta, "kernel_similarity", "rejection_agreement", ks.rejection_agreement, seed);
    t.add(name, delta, "kernel_similarity", "rejection_rate", ks.rejection_rate_a, seed);

    if (!ergodicity) return;
    RandomStream chain_rng = root.split(kChainStream);
    VectorXd q0 = VectorXd::Zero(model.dim());
    if (ex.n_burnin > 0) {
      q0 = run_chain(model, q0, cfg, ex.n_burnin, chain_rng).positions.bottomRows(1).transpose();
    }
    const ChainTrace chain = run_chain(model, q0, cfg, ex.n_samples, chain_rng);
    RandomStream proj_rng = root.split(kProjectionStream);
    t.add(name, delta, "ks", "median",
          median(random_projection_ks(chain.positions, reference, 100, proj_rng)), seed);
    const double h = median_heuristic_bandwidth(reference);
    t.add(name, delta, "mmd2", "value", mmd2_unbiased(chain.positions, reference, h, proj_rng).value(),
          seed);
    t.add(name, delta, "sw1", "value", sliced_wasserstein(chain.positions, reference, 100, proj_rng),
          seed);
    std::vector<double> ess_values;
    for (Index j = 0; j < chain.positions.cols(); ++j) {
      try {
        ess_values.push_back(ess(chain.positions.col(j)));
      } catch (const std::invalid_argument&) {
        ess_values.push_back(0.0);
      }
    }
    t.add(name, delta, "ess", "min", *std::min_element(ess_values.begin(), ess_values.end()), seed);
    t.add(name, delta, "ess", "median", median(ess_values), seed);
    t.add(name, delta, "acceptance", "rate", chain.acceptance_rate(), seed);
    double lp_sum = 0, lq_sum = 0, steps = 0;
    for (const TransitionRecord& r : chain.records) {
      lp_sum += static_cast<double>(r.effort.total_l_p);
      lq_sum += static_cast<double>(r.effort.total_l_q);
      steps += static_cast<double>(r.effort.steps);
    }
    t.add(name, delta, "chain_l_p", "mean", steps > 0 ? lp_sum / steps : 0.0, seed);
    t.add(name, delta, "chain_l_q", "mean", steps > 0 ? lq_sum / steps : 0.0, seed);
  });

  ResultTable out;
  for (ResultTable& c : cells) {
    out.rows.insert(out.rows.end(), c.rows.begin(), c.rows.end());
  }
  return out;
}

TunerTrace run_tune(const ResolvedExperiment& ex) {
  const RandomStream root(ex.config.seed);
  RandomStream rng = root.split(kTunerStream);
  const IntegratorConfig base = ex.integrator.with_threshold(ex.baseline_delta);
  const StateSource source =
      make_chain_source(ex.model, VectorXd::Zero(ex.model->dim()), base, static_cast<int>(ex.n_burnin), rng);
  return tune_threshold(*ex.model, source, ex.tuner, base, rng);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> cmd_sample(const ExperimentConfig& cfg) {
  const ResolvedExperiment ex = resolve(cfg);
  const SampleOutput s = run_sample(ex);
  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);

  const auto csv_path = dir / "positions.csv";
  {
    std::ofstream os = open_out(csv_path);
    for (Index j = 0; j < s.positions.cols(); ++j) os << (j ? "," : "") << 'q' << j + 1;
    if (!s.alphas.empty()) os << ",alpha";
    os << '\n';
    for (Index i = 0; i < s.positions.rows(); ++i) {
      for (Index j = 0; j < s.positions.cols(); ++j) {
        os << (j ? "," : "") << format_double(s.positions(i, j));
      }
      if (!s.alphas.empty()) os << ',' << format_double(s.alphas[static_cast<std::size_t>(i)]);
      os << '\n';
    }
  }

  long accepted = 0, diverged = 0;
  EffortSummary total;
  for (const TransitionRecord& r : s.records) {
    accepted += r.accepted;
    diverged += r.diverged;
    total.total_l_p += r.effort.total_l_p;
    total.total_l_q += r.effort.total_l_q;
    total.steps += r.effort.steps;
    total.max_l_p = std::max(total.max_l_p, r.effort.max_l_p);
    total.max_l_q = std::max(total.max_l_q, r.effort.max_l_q);
    total.all_converged = total.all_converged && r.effort.all_converged;
  }
  Json j;
  j["command"] = "sample";
  j["config"] = config_json(cfg);
  j["model"] = ex.model->name();
  j["dimension"] = ex.model->dim();
  j["samples"] = s.positions.rows();
  j["acceptance_rate"] = s.records.empty() ? 0.0 : static_cast<double>(accepted) / s.records.size();
  j["divergences"] = diverged;
  j["mean_l_p"] = total.mean_l_p();
  j["mean_l_q"] = total.mean_l_q();
  j["max_l_p"] = total.max_l_p;
  j["max_l_q"] = total.max_l_q;
  j["all_converged"] = total.all_converged;
  Json ess_json = Json::array();
  for (Index c = 0; c < s.positions.cols(); ++c) {
    try {
      ess_json.push_back(ess(s.positions.col(c)));
    } catch (const std::invalid_argument&) {
      ess_json.push_back(nullptr);
    }
  }
  j["ess"] = ess_json;
  const auto json_path = dir / "trace.json";
  open_out(json_path) << j.dump(2) << '\n';
  return {csv_path, json_path};
}

std::vector<std::filesystem::path> cmd_diagnose(const ExperimentConfig& cfg) {
  const ResolvedExperiment ex = resolve(cfg);
  const ResultTable table = run_diagnose(ex);
  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);
  const auto csv_path = dir / "metrics.csv";
  {
    std::ofstream os = open_out(csv_path);
    table.write_csv(os);
  }
  Json j;
  j["command"] = "diagnose";
  j["config"] = config_json(cfg);
  j["model"] = ex.model->name();
  j["sweep"] = ex.sweep;
  j["baseline_delta"] = ex.baseline_delta;
  j["ergodicity_metrics"] = ex.ergodicity;
  Json per_delta = Json::array();
  for (double d : ex.sweep) {
    Json row;
    row["delta"] = d;
    for (const ResultRow& r : table.rows) {
      if (r.delta == d && (r.statistic == "median" || r.metric == "ks")) {
        row[r.metric + "_" + r.statistic] = std::isfinite(r.value) ? Json(r.value) : Json(nullptr);
      }
    }
    per_delta.push_back(row);
  }
  j["summary"] = per_delta;
  const auto json_path = dir / "report.json";
  open_out(json_path) << j.dump(2) << '\n';
  return {csv_path, json_path};
}

std::vector<std::filesystem::path> cmd_tune(const ExperimentConfig& cfg) {
  const ResolvedExperiment ex = resolve(cfg);
  const TunerTrace trace = run_tune(ex);
  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);
  const auto csv_path = dir / "tuner.csv";
  {
    std::ofstream os = open_out(csv_path);
    trace.write_csv(os);
  }
  Json j;
  j["command"] = "tune";
  j["config"] = config_json(cfg);
  j["model"] = ex.model->name();
  j["kappa"] = ex.tuner.kappa;
  j["iterations"] = trace.steps.size();
  j["final_delta_bar"] = trace.final_delta();
  j["final_loss_bar"] = trace.final_loss_bar();
  j["any_clamped"] = trace.any_clamped();
  const auto json_path = dir / "report.json";
  open_out(json_path) << j.dump(2) << '\n';
  return {csv_path, json_path};
}

}  // namespace rmhmc::app
