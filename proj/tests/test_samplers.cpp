#include "rmhmc/diagnostics.hpp"
#include "rmhmc/samplers.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rmhmc {
namespace {

IntegratorConfig leapfrog(double eps, int k) {
  IntegratorConfig c;
  c.kind = IntegratorKind::Leapfrog;
  c.step_size = eps;
  c.num_steps = k;
  return c;
}

// Regularized lower incomplete gamma for integer shape.
double gamma_cdf_integer_shape(double x, int shape, double scale) {
  const double y = x / scale;
  double term = 1, sum = 1;
  for (int k = 1; k < shape; ++k) {
    term *= y / k;
    sum += term;
  }
  return 1 - std::exp(-y) * sum;
}

TEST(HmcTransition, EqualEnergyIsAccepted) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.0;
  c.num_steps = 3;
  VectorXd q(2), p(2);
  q << 0.1, 0.9;
  p << 1, 1;
  const TransitionRecord r = hmc_transition_driven(m, q, c, p, 0.999999);
  EXPECT_EQ(r.energy_start, r.energy_end);
  EXPECT_TRUE(r.accepted);
}

TEST(HmcTransition, DivergenceIsRejection) {
  const FunnelModel m;
  IntegratorConfig c;
  c.step_size = 5.0;
  c.num_steps = 5;
  VectorXd q = VectorXd::Zero(11), p = VectorXd::Constant(11, 1e3);
  q[FunnelModel::kVIndex] = 8;
  const TransitionRecord r = hmc_transition_driven(m, q, c, p, 0.0);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.accepted);
  EXPECT_TRUE(std::isinf(r.energy_end));
  EXPECT_EQ(r.proposal.q, q);
}

TEST(HmcTransition, FailureAtCurrentStateIsFatal) {
  const FunnelModel m;
  VectorXd q = VectorXd::Zero(11);
  q[FunnelModel::kVIndex] = 1e6;
  EXPECT_THROW(hmc_transition_driven(m, q, IntegratorConfig{}, VectorXd::Zero(11), 0.5),
               EvaluationError);
}

TEST(HmcTransition, DrivenIsDeterministicAndUOneRejects) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 20;
  VectorXd q(2), p(2);
  q << 0.1, 0.9;
  p << 3, -2;
  const TransitionRecord a = hmc_transition_driven(m, q, c, p, 0.3);
  const TransitionRecord b = hmc_transition_driven(m, q, c, p, 0.3);
  EXPECT_EQ(a.proposal.q, b.proposal.q);
  EXPECT_EQ(a.proposal.p, b.proposal.p);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_EQ(a.energy_end, b.energy_end);
  const TransitionRecord u1 = hmc_transition_driven(m, q, c, p, 1.0);
  if (u1.acceptance_probability() < 1) EXPECT_FALSE(u1.accepted);
  // accepted => u < min(1, exp(H0 - H1))
  if (a.accepted) EXPECT_LT(a.uniform_draw, a.acceptance_probability());
}

TEST(HmcTransition, GaussianLeapfrogAcceptsAlmostAlways) {
  const GaussianModel m = GaussianModel::standard(1);
  RandomStream rng(1);
  const ChainTrace t = run_chain(m, VectorXd::Zero(1), leapfrog(0.1, 10), 10000, rng);
  EXPECT_GT(t.acceptance_rate(), 0.99);
}

TEST(RunChain, SingleStepEqualsTransition) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 20;
  RandomStream a(5), b(5);
  const ChainTrace t = run_chain(m, VectorXd::Zero(2), c, 1, a);
  const TransitionRecord r = hmc_transition(m, VectorXd::Zero(2), c, b);
  EXPECT_EQ(t.records[0].proposal.q, r.proposal.q);
  EXPECT_EQ(t.records[0].uniform_draw, r.uniform_draw);
  EXPECT_EQ(a.draws(), b.draws());
}

TEST(RunChain, SeedDeterminismAndRejectionKeepsPosition) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 20;
  c.threshold = 1e-3;
  RandomStream a(6), b(6);
  const ChainTrace t1 = run_chain(m, VectorXd::Zero(2), c, 300, a);
  const ChainTrace t2 = run_chain(m, VectorXd::Zero(2), c, 300, b);
  EXPECT_EQ(t1.positions, t2.positions);
  for (Index i = 1; i < 300; ++i) {
    const auto& r = t1.records[static_cast<std::size_t>(i)];
    if (r.accepted) {
      EXPECT_EQ(t1.positions.row(i).transpose(), r.proposal.q);
    } else {
      EXPECT_EQ(t1.positions.row(i), t1.positions.row(i - 1));
    }
  }
  EXPECT_THROW(run_chain(m, VectorXd::Zero(2), c, 0, a), std::invalid_argument);
}

TEST(RunChain, StandardNormalMoments) {
  const GaussianModel m = GaussianModel::standard(1);
  RandomStream rng(7);
  const ChainTrace t = run_chain(m, VectorXd::Zero(1), leapfrog(0.1, 10), 100000, rng);
  const VectorXd x = t.positions.col(0);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Gibbs, PrecisionDrawAtZeroBeta) {
  RandomStream rng(8);
  const int n = 100000;
  double s = 0;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    draws.push_back(sample_logistic_precision(VectorXd::Zero(14), rng));
    s += draws.back();
  }
  EXPECT_NEAR(s / n / 16.0, 1.0, 0.02);
  EXPECT_LT(ks_one_sample(draws, [](double x) { return gamma_cdf_integer_shape(x, 8, 2.0); }), 0.01);
}

TEST(Gibbs, PrecisionDrawAtFixedBeta) {
  RandomStream rng(9);
  const VectorXd beta = VectorXd::LinSpaced(14, -1, 1);
  const double scale = 1.0 / (0.5 * beta.squaredNorm() + 0.5);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) draws.push_back(sample_logistic_precision(beta, rng));
  EXPECT_LT(ks_one_sample(draws, [scale](double x) { return gamma_cdf_integer_shape(x, 8, scale); }),
            0.01);
}

TEST(Gibbs, StepUpdatesBothBlocks) {
  RandomStream rng(10);
  auto data = std::make_shared<const LogisticData>(synthetic_logistic_data(270, 14, rng));
  IntegratorConfig c;
  c.step_size = 0.2;
  c.num_steps = 20;
  LogisticState s{VectorXd::Zero(14), 1.0};
  int moved = 0;
  for (int i = 0; i < 50; ++i) {
    TransitionRecord rec;
    const LogisticState next = gibbs_logistic_step(s, data, c, rng, &rec);
    EXPECT_GT(next.alpha, 0.0);
    moved += rec.accepted;
    s = next;
  }
  EXPECT_GT(moved, 25);
  EXPECT_THROW(gibbs_logistic_step({VectorXd::Zero(14), 0.0}, data, c, rng), std::invalid_argument);
}

// With alpha fixed the beta-kernel should leave its conditional invariant:
// after burn-in the two halves of a run agree within Monte Carlo error.
TEST(Gibbs, BetaKernelHasNoDrift) {
  RandomStream rng(11);
  auto data = std::make_shared<const LogisticData>(synthetic_logistic_data(270, 14, rng));
  const LogisticModel cond(data, 1.0);
  IntegratorConfig c;
  c.step_size = 0.2;
  c.num_steps = 20;
  const ChainTrace burn = run_chain(cond, VectorXd::Zero(14), c, 200, rng);
  const ChainTrace t = run_chain(cond, burn.positions.bottomRows(1).transpose(), c, 2000, rng);
  for (Index j = 0; j < 14; ++j) {
    const VectorXd a = t.positions.col(j).head(1000), b = t.positions.col(j).tail(1000);
    const double sd = std::sqrt((t.positions.col(j).array() - t.positions.col(j).mean()).square().mean());
    const double se = sd * std::sqrt(1.0 / ess(a) + 1.0 / ess(b));
    EXPECT_LT(std::abs(a.mean() - b.mean()), 5 * se) << "coordinate " << j;
  }
}

TEST(MultiChain, SharedStartDistinctChains) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 10;
  VectorXd q0(2);
  q0 << 0.5, 0.5;
  const MatrixXd x = run_multi_chain(m, q0, c, 2, 20, 1, 123);
  EXPECT_EQ(x.rows(), 2);
  EXPECT_EQ(x.cols(), 21);
  EXPECT_EQ(x(0, 0), 0.5);
  EXPECT_EQ(x(1, 0), 0.5);
  EXPECT_NE(x.row(0), x.row(1));
  EXPECT_EQ(x, run_multi_chain(m, q0, c, 2, 20, 1, 123));
  EXPECT_THROW(run_multi_chain(m, q0, c, 1, 20, 1, 123), std::invalid_argument);
}

// One tight-threshold transition from stationarity keeps the law unchanged.
// Fixed-point solvers: Newton can settle on a different root of the implicit
// equations for large momenta, which breaks the involution on those points.
TEST(DetailedBalance, OneTransitionFromStationarity) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 20;
  c.threshold = 1e-10;
  RandomStream rng(12);
  const Index n = 100000;
  const MatrixXd start = m.sample(n, rng);
  MatrixXd out(n, 2);
  for (Index i = 0; i < n; ++i) {
    const VectorXd q = start.row(i).transpose();
    const TransitionRecord r = hmc_transition(m, q, c, rng);
    out.row(i) = (r.accepted ? r.proposal.q : q).transpose();
  }
  const MatrixXd reference = m.sample(n, rng);
  EXPECT_LT(median(random_projection_ks(out, reference, 100, rng)), 0.01);
}

}  // namespace
}  // namespace rmhmc
