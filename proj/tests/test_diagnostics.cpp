#include "rmhmc/diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace rmhmc {
namespace {

MatrixXd column(std::initializer_list<double> v) {
  MatrixXd m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

IntegratorConfig banana_cfg(double delta) {
  IntegratorConfig c;
  c.step_size = 0.04;
  c.num_steps = 20;
  c.threshold = delta;
  return c;
}

std::vector<PhasePointd> banana_points(int n, std::uint64_t seed) {
  const BananaModel m = BananaModel::standard();
  RandomStream rng(seed);
  const MatrixXd q = m.sample(n, rng);
  std::vector<PhasePointd> out;
  for (int i = 0; i < n; ++i) {
    const VectorXd qi = q.row(i).transpose();
    out.emplace_back(qi, sample_momentum(m, qi, rng));
  }
  return out;
}

// --- reversibility / volume -------------------------------------------------

TEST(Reversibility, ZeroStepSizeIsExact) {
  const BananaModel m = BananaModel::standard();
  const ReversibilityReport r = reversibility_error(m, banana_points(1, 1)[0], banana_cfg(1e-1).with_threshold(1e-1));
  IntegratorConfig c = banana_cfg(1e-1);
  c.step_size = 0;
  const ReversibilityReport r0 = reversibility_error(m, banana_points(1, 1)[0], c);
  EXPECT_EQ(r0.are, 0.0);
  EXPECT_GE(r.are, 0.0);
}

TEST(Reversibility, RelativeErrorScalesByNorm) {
  const BananaModel m = BananaModel::standard();
  const PhasePointd z = banana_points(1, 2)[0];
  const ReversibilityReport r = reversibility_error(m, z, banana_cfg(1e-2));
  EXPECT_NEAR(r.rre, r.are / std::sqrt(z.q.squaredNorm() + z.p.squaredNorm()), 1e-15);
}

TEST(Reversibility, NewtonTightThresholdAt100Points) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c = banana_cfg(1e-13);
  c.momentum_solver = c.position_solver = SolverKind::Newton;
  std::vector<double> are;
  for (const PhasePointd& z : banana_points(100, 3)) are.push_back(reversibility_error(m, z, c).are);
  EXPECT_LT(median(are), 1e-9);
}

TEST(Reversibility, FixedPointSweepSpansFourDecades) {
  const BananaModel m = BananaModel::standard();
  std::vector<double> loose, tight;
  for (const PhasePointd& z : banana_points(60, 4)) {
    loose.push_back(reversibility_error(m, z, banana_cfg(1e-1)).are);
    tight.push_back(reversibility_error(m, z, banana_cfg(1e-9)).are);
  }
  EXPECT_GT(median(loose), 1e4 * median(tight));
}

TEST(VolumePreservation, IdentityMapHasUnitDeterminant) {
  const BananaModel m = BananaModel::standard();
  IntegratorConfig c = banana_cfg(1e-9);
  c.step_size = 0;
  const VolumeReport v = volume_preservation_error(m, banana_points(1, 5)[0], c, 1e-5);
  EXPECT_LT(v.vpe, 1e-8);
  EXPECT_THROW(volume_preservation_error(m, banana_points(1, 5)[0], c, 0.0), std::invalid_argument);
}

TEST(VolumePreservation, LeapfrogOnGaussian) {
  const GaussianModel m = GaussianModel::standard(1);
  IntegratorConfig c;
  c.kind = IntegratorKind::Leapfrog;
  c.step_size = 0.1;
  c.num_steps = 10;
  VectorXd q(1), p(1);
  q << 0.7;
  p << -0.3;
  EXPECT_LT(volume_preservation_error(m, PhasePointd(q, p), c, 1e-5).vpe, 1e-6);
}

TEST(VolumePreservation, PerturbationSelectionOnBanana) {
  const BananaModel m = BananaModel::standard();
  const PerturbationChoice choice = select_fd_perturbation(m, banana_points(30, 6), banana_cfg(1e-9));
  EXPECT_EQ(kFdPerturbationGrid.size(), 6u);
  EXPECT_EQ(choice.omega, 1e-5);
  EXPECT_EQ(*std::min_element(choice.median_vpe.begin(), choice.median_vpe.end()),
            choice.median_vpe[3]);
}

// --- KS ---------------------------------------------------------------------

TEST(Ks, HandExamples) {
  EXPECT_EQ(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(ks_statistic(std::vector<double>{0}, std::vector<double>{1}), 1.0);
  EXPECT_DOUBLE_EQ(ks_statistic(std::vector<double>{1, 2}, std::vector<double>{1.5, 2.5}), 0.5);
  EXPECT_THROW(ks_statistic(std::vector<double>{}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Ks, SymmetricBoundedAndTieAware) {
  RandomStream rng(1);
  for (int t = 0; t < 20; ++t) {
    VectorXd a(30), b(45);
    for (Index i = 0; i < a.size(); ++i) a[i] = std::round(3 * rng.normal());
    for (Index i = 0; i < b.size(); ++i) b[i] = std::round(3 * rng.normal() + 0.5);
    const double ab = ks_statistic(a, b), ba = ks_statistic(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    // brute force over all atoms
    double sup = 0;
    std::vector<double> atoms(a.data(), a.data() + a.size());
    atoms.insert(atoms.end(), b.data(), b.data() + b.size());
    for (double x : atoms) {
      const double fa = (a.array() <= x).cast<double>().mean();
      const double fb = (b.array() <= x).cast<double>().mean();
      sup = std::max(sup, std::abs(fa - fb));
    }
    EXPECT_NEAR(ab, sup, 1e-15);
  }
}

TEST(RandomProjectionKs, IdenticalAndOneDimensional) {
  RandomStream rng(2);
  MatrixXd x(200, 3);
  for (Index i = 0; i < x.rows(); ++i) x.row(i) = rng.normal_vector(3).transpose();
  for (double v : random_projection_ks(x, x, 10, rng)) EXPECT_EQ(v, 0.0);
  const MatrixXd a = x.col(0), b = x.col(1);
  const double plain = ks_statistic(VectorXd(a), VectorXd(b));
  for (double v : random_projection_ks(a, b, 5, rng)) EXPECT_NEAR(v, plain, 1e-15);
}

TEST(RandomProjectionKs, IndependentSamplerDraws) {
  const BananaModel m = BananaModel::standard();
  RandomStream rng(3);
  const MatrixXd a = m.sample(100000, rng), b = m.sample(100000, rng);
  EXPECT_LT(median(random_projection_ks(a, b, 100, rng)), 0.01);
}

// --- MMD --------------------------------------------------------------------

TEST(Mmd, TwoPointExamples) {
  MatrixXd ab(2, 2);
  ab << 0, 0, 1, 1;
  const double h = 1.5;
  const double k = std::exp(-2.0 / (h * h));
  EXPECT_NEAR(mmd2_unbiased(ab, ab, h).signed_value, k - 1, 1e-15);
  MatrixXd aa(2, 2);
  aa << 1, 2, 1, 2;
  EXPECT_EQ(mmd2_unbiased(aa, aa, h).signed_value, 0.0);
  EXPECT_THROW(mmd2_unbiased(ab.topRows(1), ab, h), std::invalid_argument);
}

TEST(Mmd, ExchangeableUnderRowPermutation) {
  RandomStream rng(4);
  MatrixXd x(40, 2), y(30, 2);
  for (Index i = 0; i < 40; ++i) x.row(i) = rng.normal_vector(2).transpose();
  for (Index i = 0; i < 30; ++i) y.row(i) = (rng.normal_vector(2).array() + 0.3).matrix().transpose();
  const double base = mmd2_unbiased(x, y, 1.0).signed_value;
  const MatrixXd xr = x.colwise().reverse();
  EXPECT_NEAR(mmd2_unbiased(xr, y, 1.0).signed_value, base, 1e-14);
}

TEST(Mmd, SameDistributionIsSmall) {
  RandomStream rng(5);
  MatrixXd x(3000, 2), y(3000, 2);
  for (Index i = 0; i < 3000; ++i) {
    x.row(i) = rng.normal_vector(2).transpose();
    y.row(i) = rng.normal_vector(2).transpose();
  }
  const double h = median_heuristic_bandwidth(y);
  EXPECT_LT(mmd2_unbiased(x, y, h).value(), 3.0 / std::sqrt(3000.0 * 3000.0) * 3);
  MatrixXd shifted = x.array() + 1.0;
  EXPECT_GT(mmd2_unbiased(shifted, y, h).value(), 0.05);
}

TEST(Bandwidth, Examples) {
  MatrixXd two(2, 2);
  two << 0, 0, 3, 4;
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(two), 5.0);
  EXPECT_THROW(median_heuristic_bandwidth(MatrixXd::Ones(5, 2)), std::invalid_argument);
}

TEST(Bandwidth, BananaReference) {
  const BananaModel m = BananaModel::standard();
  RandomStream rng(6);
  EXPECT_NEAR(median_heuristic_bandwidth(m.sample(4000, rng)), 1.727, 0.1727);
}

// --- sliced W1 / DL1 --------------------------------------------------------

TEST(SlicedWasserstein, Examples) {
  RandomStream rng(7);
  EXPECT_EQ(sliced_wasserstein(column({1, 5, 2}), column({1, 5, 2}), 4, rng), 0.0);
  EXPECT_DOUBLE_EQ(sliced_wasserstein(column({0, 2}), column({1, 3}), 3, rng), 1.0);
  EXPECT_DOUBLE_EQ(sliced_wasserstein(column({0.5, 4, -2}), column({1.5, 5, -1}), 3, rng), 1.0);
}

TEST(SlicedWasserstein, TriangleInequalityInOneDimension) {
  RandomStream rng(8);
  const MatrixXd a = column({0, 1, 4}), b = column({2, 2, 3}), c = column({-1, 5, 6});
  const double ab = sliced_wasserstein(a, b, 1, rng), bc = sliced_wasserstein(b, c, 1, rng),
               ac = sliced_wasserstein(a, c, 1, rng);
  EXPECT_LE(ac, ab + bc + 1e-15);
}

TEST(Dl1, Examples) {
  const GridPartition g;
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.32);
  MatrixXd a(3, 2), b(2, 2);
  a << -29.9, -9.9, -29.8, -9.8, -29.7, -9.95;
  b << 9.9, 9.9, 9.8, 9.95;
  EXPECT_DOUBLE_EQ(dl1_discretized(a, a).value, 0.0);
  EXPECT_NEAR(dl1_discretized(a, b).value, 2 * 0.32, 1e-15);
  MatrixXd out(1, 2);
  out << 50, 0;
  EXPECT_EQ(dl1_discretized(out, a).outside_samples, 1.0);
}

// --- ESS --------------------------------------------------------------------

TEST(Ess, IidAndAr1) {
  RandomStream rng(9);
  const Index n = 100000;
  VectorXd iid(n), ar(n);
  double prev = rng.normal() / std::sqrt(1 - 0.25);
  for (Index i = 0; i < n; ++i) {
    iid[i] = rng.normal();
    prev = 0.5 * prev + rng.normal();
    ar[i] = prev;
  }
  EXPECT_NEAR(ess(iid) / n, 1.0, 0.05);
  EXPECT_NEAR(ess(ar) / (n / 3.0), 1.0, 0.1);
}

TEST(Ess, AntitheticSeriesExceedsN) {
  RandomStream rng(10);
  VectorXd x(10000);
  for (Index i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1.0 : -1.0) + 0.1 * rng.normal();
  EXPECT_GT(ess(x), 10000.0);
  EXPECT_THROW(ess(VectorXd::Ones(20)), std::invalid_argument);
  EXPECT_THROW(ess(VectorXd::LinSpaced(5, 0, 1)), std::invalid_argument);
}

// --- kernel similarity ------------------------------------------------------

TEST(KernelSimilarity, IdenticalConfigsAgreeExactly) {
  const BananaModel m = BananaModel::standard();
  RandomStream rng(11);
  const MatrixXd q = m.sample(200, rng);
  const KernelSimilarityReport r = kernel_similarity(m, banana_cfg(1e-3), banana_cfg(1e-3), q, rng);
  for (double d : r.differences) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(r.rejection_agreement, r.rejection_rate_a);
  EXPECT_EQ(static_cast<Index>(r.differences.size()) +
                static_cast<Index>(std::lround(r.rejection_agreement * r.pairs)),
            r.pairs);
}

TEST(KernelSimilarity, LooseVersusBaselineOnBanana) {
  const BananaModel m = BananaModel::standard();
  RandomStream rng(12);
  const MatrixXd q = m.sample(300, rng);
  const KernelSimilarityReport r = kernel_similarity(m, banana_cfg(1e-3), banana_cfg(1e-10), q, rng);
  std::vector<double> logs;
  for (double d : r.differences) logs.push_back(std::log10(std::max(d, 1e-300)));
  EXPECT_LE(median(logs), -2.0);
}

// --- biased involution ------------------------------------------------------

TEST(BiasedInvolution, TiltedStationaryLaw) {
  RandomStream rng(13);
  const InvolutionReport r = biased_involution_experiment(1000000, rng);
  EXPECT_LT(r.ks_biased, 0.01);
  EXPECT_LT(r.ks_corrected, 0.01);
  EXPECT_NEAR(r.kl_estimate, 0.5, 0.02);
  EXPECT_THROW(biased_involution_experiment(100, rng), std::invalid_argument);
}

// The uncorrected kernel started at the target drifts away from it.
TEST(BiasedInvolution, UncorrectedKernelDoesNotPreserveTarget) {
  RandomStream rng(14);
  std::vector<double> out;
  for (int i = 0; i < 100000; ++i) {
    const double z = std::exp(rng.normal());
    out.push_back(rng.uniform() < std::min(1.0, z * z) ? 1.0 / z : z);
  }
  EXPECT_GT(ks_one_sample(out, [](double x) { return lognormal_cdf(x, 0, 1); }), 0.05);
}

TEST(Quantiles, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

}  // namespace
}  // namespace rmhmc
