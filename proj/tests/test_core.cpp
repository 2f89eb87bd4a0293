#include "rmhmc/core.hpp"
#include "rmhmc/models.hpp"
#include "rmhmc/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace rmhmc {
namespace {

TEST(PhasePoint, RejectsMismatchedLengths) {
  EXPECT_THROW(PhasePointd(VectorXd::Zero(2), VectorXd::Zero(3)), std::invalid_argument);
  EXPECT_THROW(PhasePointd(VectorXd(), VectorXd()), std::invalid_argument);
}

TEST(PhasePoint, StackRoundTrip) {
  PhasePointd z(VectorXd::LinSpaced(3, 1, 3), VectorXd::LinSpaced(3, -1, -3));
  const PhasePointd back = PhasePointd::from_stacked(z.stacked());
  EXPECT_EQ(back.q, z.q);
  EXPECT_EQ(back.p, z.p);
  const PhasePointd f = momentum_flip(momentum_flip(z));
  EXPECT_EQ(f.p, z.p);
}

TEST(MetricBundle, FactorsIdentity) {
  const MetricBundled b = make_metric_bundle(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  EXPECT_DOUBLE_EQ(b.log_det, 0.0);
  EXPECT_TRUE(b.inverse.isIdentity());
  EXPECT_FALSE(b.has_grads());
}

TEST(MetricBundle, NonSpdThrowsWithPosition) {
  MatrixXd g(2, 2);
  g << 1, 2, 2, 1;
  VectorXd q(2);
  q << 3, 4;
  try {
    make_metric_bundle(q, g);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.position(), q);
  }
}

// Standard normal with identity metric: H = -L + 0 + |p|^2/2, L = -|q|^2/2 - m/2 log 2pi.
TEST(Hamiltonian, GaussianClosedForm) {
  const GaussianModel m = GaussianModel::standard(3);
  VectorXd q(3), p(3);
  q << 0.5, -1, 2;
  p << 1, 0.25, -0.5;
  const PhasePointd z(q, p);
  const double expected =
      0.5 * q.squaredNorm() + 1.5 * std::log(2 * std::numbers::pi) + 0.5 * p.squaredNorm();
  EXPECT_NEAR(riemannian_hamiltonian(m, z), expected, 1e-12);
  EXPECT_TRUE(grad_q_hamiltonian(m, z).isApprox(q, 1e-14));
  EXPECT_TRUE(grad_p_hamiltonian(m, z).isApprox(p, 1e-14));
}

// Finite differences of H on a position-dependent metric.
TEST(Hamiltonian, GradientsMatchFiniteDifferences) {
  const BananaModel m = BananaModel::standard();
  VectorXd q(2), p(2);
  q << 0.3, 0.8;
  p << -1.5, 2.0;
  const PhasePointd z(q, p);
  const HamiltonianEval h = evaluate_hamiltonian(m, z);
  for (Index k = 0; k < 2; ++k) {
    const double hq = fd_step(q[k]);
    VectorXd qp = q, qm = q;
    qp[k] += hq;
    qm[k] -= hq;
    const double dq = (riemannian_hamiltonian(m, PhasePointd(qp, p)) -
                       riemannian_hamiltonian(m, PhasePointd(qm, p))) / (2 * hq);
    EXPECT_NEAR(h.grad_q[k], dq, 1e-5 * std::max(1.0, std::abs(dq)));
    const double hp = fd_step(p[k]);
    VectorXd pp = p, pm = p;
    pp[k] += hp;
    pm[k] -= hp;
    const double dp = (riemannian_hamiltonian(m, PhasePointd(q, pp)) -
                       riemannian_hamiltonian(m, PhasePointd(q, pm))) / (2 * hp);
    EXPECT_NEAR(h.grad_p[k], dp, 1e-6 * std::max(1.0, std::abs(dp)));
  }
}

TEST(Hamiltonian, NonFiniteLogDensityIsEvaluationError) {
  const FunnelModel m;
  VectorXd q = VectorXd::Zero(11);
  q[FunnelModel::kVIndex] = 1e6;
  EXPECT_THROW(evaluate_geometry(m, q), EvaluationError);
}

TEST(Momentum, CovarianceMatchesMetric) {
  MatrixXd g(2, 2);
  g << 4, 1, 1, 2;
  const MetricBundled b = make_metric_bundle(VectorXd::Zero(2), g);
  RandomStream rng(5);
  const int n = 200000;
  MatrixXd acc = MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const VectorXd p = sample_momentum(b, rng);
    acc += p * p.transpose();
  }
  acc /= n;
  EXPECT_LT((acc - g).cwiseAbs().maxCoeff(), 0.05);
}

TEST(DerivativeCheck, FlagsWrongGradient) {
  auto base = std::make_shared<BananaModel>(BananaModel::standard());
  const ModelPtr bad = corrupt_metric_grads(base, {0, 0, 1, 0.5});
  VectorXd q(2);
  q << 0.2, 0.7;
  EXPECT_LT(check_model_derivatives(*base, q).metric_grads_rel_err, 1e-6);
  EXPECT_GT(check_model_derivatives(*bad, q).metric_grads_rel_err, 1e-2);
}

TEST(RandomStream, SameSeedSameSequence) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
  EXPECT_EQ(a.draws(), b.draws());
}

TEST(RandomStream, SplitIsDeterministicAndDoesNotAdvance) {
  RandomStream parent(7);
  RandomStream c1 = parent.split(3);
  RandomStream c2 = parent.split(3);
  RandomStream other = parent.split(4);
  EXPECT_EQ(parent.draws(), 0u);
  const double x = c1.uniform();
  EXPECT_EQ(x, c2.uniform());
  EXPECT_NE(x, other.uniform());
}

TEST(RandomStream, GammaMoments) {
  RandomStream rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(8.0, 2.0);
    s += g;
    s2 += g * g;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 16.0, 0.1);
  EXPECT_NEAR(var, 32.0, 0.6);
}

TEST(RandomStream, SmallShapeGammaStaysPositive) {
  RandomStream rng(12);
  double s = 0;
  for (int i = 0; i < 100000; ++i) {
    const double g = rng.gamma(0.3, 1.0);
    ASSERT_GT(g, 0.0);
    s += g;
  }
  EXPECT_NEAR(s / 100000, 0.3, 0.01);
}

}  // namespace
}  // namespace rmhmc
