#include "experiment.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace rmhmc::app {
namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rmhmc_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig round_trip(const ExperimentConfig& c) {
  std::stringstream ss;
  write_config(ss, c);
  return parse_config(ss);
}

TEST(Config, DefaultRoundTrip) { EXPECT_EQ(round_trip(ExperimentConfig{}), ExperimentConfig{}); }

TEST(Config, FullRoundTripIsIdentity) {
  ExperimentConfig c;
  c.model = "student-t";
  c.student_t_variance = 1e4;
  c.integrator = "glf";
  c.solver = "newton-both";
  c.step_size = 0.1 + 0.2;  // not exactly representable in short form
  c.num_steps = 17;
  c.threshold = 1.2345678901234567e-9;
  c.max_iters = 50;
  c.n_samples = 12;
  c.n_burnin = 0;
  c.n_points = 7;
  c.seed = 99;
  c.sweep = {1e-1, 1.0 / 3.0, 1e-9};
  c.baseline_delta = 1e-10;
  c.out_dir = "some/where";
  c.kappa = 6.5;
  c.tuner_iterations = 10;
  c.initial_delta = 1e-3;
  c.heart_csv = "heart.csv";
  c.synthetic_fallback = true;
  c.ergodicity = false;
  const ExperimentConfig once = round_trip(c);
  EXPECT_EQ(once, c);
  EXPECT_EQ(round_trip(once), once);
}

TEST(Config, CommentsAndUnknownKeys) {
  std::istringstream ok("# comment\n; other\n[experiment]\nmodel = funnel\n\n[integrator]\nsteps = 3\n");
  const ExperimentConfig c = parse_config(ok);
  EXPECT_EQ(c.model, "funnel");
  EXPECT_EQ(c.num_steps, 3);
  std::istringstream bad("[experiment]\nmodle = funnel\n");
  try {
    parse_config(bad);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("experiment.modle"), std::string::npos);
  }
  std::istringstream bad_num("[integrator]\neps = fast\n");
  EXPECT_THROW(parse_config(bad_num), UsageError);
}

TEST(Resolve, PerModelDefaults) {
  ExperimentConfig c;
  c.model = "banana";
  ResolvedExperiment r = resolve(c);
  EXPECT_EQ(r.integrator.step_size, 0.04);
  EXPECT_EQ(r.integrator.num_steps, 20);
  EXPECT_EQ(r.tuner.kappa, 8);
  c.model = "funnel";
  r = resolve(c);
  EXPECT_EQ(r.integrator.step_size, 0.2);
  EXPECT_EQ(r.integrator.num_steps, 25);
  EXPECT_EQ(r.tuner.kappa, 6);
  c.model = "student-t";
  r = resolve(c);
  EXPECT_EQ(r.integrator.step_size, 0.3);
  EXPECT_EQ(r.integrator.num_steps, 20);
  EXPECT_EQ(r.tuner.kappa, 8);
  EXPECT_EQ(r.model->dim(), 20);
  EXPECT_EQ(r.sweep.size(), 9u);
  EXPECT_EQ(r.baseline_delta, 1e-10);
}

TEST(Resolve, SolverAndIntegratorNames) {
  ExperimentConfig c;
  c.solver = "newton";
  ResolvedExperiment r = resolve(c);
  EXPECT_EQ(r.integrator.momentum_solver, SolverKind::Newton);
  EXPECT_EQ(r.integrator.position_solver, SolverKind::FixedPoint);
  c.solver = "newton-both";
  EXPECT_EQ(resolve(c).integrator.position_solver, SolverKind::Newton);
  c.integrator = "leapfrog";
  r = resolve(c);
  EXPECT_EQ(r.model->name(), "banana-euclidean");
  c.solver = "secant";
  EXPECT_THROW(resolve(c), UsageError);
}

TEST(Resolve, UsageErrorsNameTheField) {
  ExperimentConfig c;
  c.n_samples = 0;
  try {
    resolve(c);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("samples", 0), 0u);
  }
  c = ExperimentConfig{};
  c.model = "gamma";
  EXPECT_THROW(resolve(c), UsageError);
  c = ExperimentConfig{};
  c.sweep = {1e-3, 2.0};
  EXPECT_THROW(resolve(c), UsageError);
}

TEST(Resolve, HeartFallback) {
  ExperimentConfig c;
  c.model = "logistic";
  c.heart_csv = "/nonexistent/heart.csv";
  EXPECT_THROW(resolve(c), std::runtime_error);
  c.synthetic_fallback = true;
  const ResolvedExperiment r = resolve(c);
  EXPECT_EQ(r.data->X.rows(), 270);
  EXPECT_EQ(r.data->X.cols(), 14);
}

TEST(Sample, BananaShapeAndByteIdenticalReruns) {
  ExperimentConfig c;
  c.n_samples = 50;
  c.n_burnin = 10;
  c.out_dir = scratch_dir("sample_a").string();
  const auto a = cmd_sample(c);
  c.out_dir = scratch_dir("sample_b").string();
  const auto b = cmd_sample(c);
  ASSERT_EQ(a.size(), 2u);
  const std::string csv = slurp(a[0]);
  EXPECT_EQ(csv, slurp(b[0]));
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "q1,q2");
  int rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 1);
    ++rows;
  }
  EXPECT_EQ(rows, 50);
  // Only the output directory differs between the two reports.
  std::string ja = slurp(a[1]), jb = slurp(b[1]);
  const auto strip = [](std::string s) {
    const auto at = s.find("rmhmc_test_sample_");
    return s.erase(at, std::string("rmhmc_test_sample_a").size());
  };
  EXPECT_EQ(strip(ja), strip(jb));
}

TEST(Sample, SeventeenDigitOutput) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Sample, LogisticGibbsAddsAlphaColumn) {
  ExperimentConfig c;
  c.model = "logistic";
  c.n_samples = 5;
  c.n_burnin = 2;
  c.out_dir = scratch_dir("logistic").string();
  const auto files = cmd_sample(c);
  std::istringstream lines(slurp(files[0]));
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header.substr(header.size() - 6), ",alpha");
}

TEST(Diagnose, PairedSweepRowsAndProvenance) {
  ExperimentConfig c;
  c.sweep = {1e-2, 1e-6};
  c.n_points = 6;
  c.n_samples = 300;
  c.n_burnin = 20;
  c.seed = 4;
  const ResolvedExperiment ex = resolve(c);
  const ResultTable t = run_diagnose(ex);
  ASSERT_FALSE(t.rows.empty());
  bool saw_ks = false;
  for (const ResultRow& r : t.rows) {
    EXPECT_EQ(r.model, "banana");
    EXPECT_EQ(r.seed, 4u);
    EXPECT_TRUE(r.delta == 1e-2 || r.delta == 1e-6);
    saw_ks = saw_ks || r.metric == "ks";
  }
  EXPECT_TRUE(saw_ks);
  // Row order is deterministic.
  const ResultTable again = run_diagnose(ex);
  ASSERT_EQ(again.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(again.rows[i].metric, t.rows[i].metric);
    EXPECT_EQ(std::isnan(again.rows[i].value) || again.rows[i].value == t.rows[i].value, true);
  }
}

TEST(Diagnose, ErgodicityNeedsReferenceSampler) {
  ExperimentConfig c;
  c.model = "logistic";
  EXPECT_FALSE(resolve(c).ergodicity);
  c.ergodicity = true;
  try {
    resolve(c);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported metric"), std::string::npos);
  }
  c.model = "banana";
  EXPECT_TRUE(resolve(c).ergodicity);
}

TEST(Diagnose, DefaultSweepHasNineThresholdsAndBaseline) {
  const std::vector<double> s = default_sweep();
  ASSERT_EQ(s.size(), 9u);
  EXPECT_EQ(s.front(), 1e-1);
  EXPECT_NEAR(s.back(), 1e-9, 1e-24);
  EXPECT_EQ(resolve(ExperimentConfig{}).baseline_delta, 1e-10);
}

TEST(Tune, TraceIsReproducibleAndFiveColumns) {
  ExperimentConfig c;
  c.tuner_iterations = 15;
  c.n_burnin = 5;
  const ResolvedExperiment ex = resolve(c);
  const TunerTrace a = run_tune(ex), b = run_tune(ex);
  ASSERT_EQ(a.steps.size(), 15u);
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].delta, b.steps[i].delta);
  c.out_dir = scratch_dir("tune").string();
  const auto files = cmd_tune(c);
  std::istringstream lines(slurp(files[0]));
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "n,delta_n,delta_bar_n,L_n,L_bar_n");
}

}  // namespace
}  // namespace rmhmc::app
