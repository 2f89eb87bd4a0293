#ifndef RMHMC_DIAGNOSTICS_HPP
#define RMHMC_DIAGNOSTICS_HPP

#include "rmhmc/core.hpp"
#include "rmhmc/integrators.hpp"
#include "rmhmc/random.hpp"
#include "rmhmc/samplers.hpp"

#include <array>
#include <functional>
#include <vector>

namespace rmhmc {

// ---------------------------------------------------------------------------
// Reversibility and volume preservation
// ---------------------------------------------------------------------------

struct ReversibilityReport {
  double are{0};
  double rre{0};
  bool diverged{false};  // are and rre are +inf when set
};

/// Applies F o Phi twice and measures the distance back to z.
ReversibilityReport reversibility_error(const TargetModel& model, const PhasePointd& z,
                                        const IntegratorConfig& cfg);

struct VolumeReport {
  double vpe{0};
  double omega{0};
  double abs_det{1};
};

/// Central-difference Jacobian of Phi (no momentum flip); vpe = ||det J| - 1|.
/// Throws DivergenceError when a column cannot be computed.
VolumeReport volume_preservation_error(const TargetModel& model, const PhasePointd& z,
                                       const IntegratorConfig& cfg, double omega);

inline constexpr std::array<double, 6> kFdPerturbationGrid{1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3};

struct PerturbationChoice {
  double omega{0};
  std::array<double, 6> median_vpe{};
};

/// Picks the grid value of omega with the smallest median VPE over `points`.
PerturbationChoice select_fd_perturbation(const TargetModel& model,
                                          const std::vector<PhasePointd>& points,
                                          const IntegratorConfig& cfg_tight);

// ---------------------------------------------------------------------------
// Two-sample distances
// ---------------------------------------------------------------------------

/// sup |F_a - F_b| for two sorted samples.
double ks_statistic(const std::vector<double>& a_sorted, const std::vector<double>& b_sorted);
/// Unsorted convenience overload.
double ks_statistic(const VectorXd& a, const VectorXd& b);
/// sup |F_n - F| against a continuous CDF.
double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf);

/// Unit vector, uniform on the sphere.
VectorXd random_direction(Index m, RandomStream& rng);

/// KS statistic of the projections onto `num_dirs` random directions.
std::vector<double> random_projection_ks(const MatrixXd& samples, const MatrixXd& reference,
                                         int num_dirs, RandomStream& rng);

struct MmdResult {
  double signed_value{0};
  double value() const { return std::abs(signed_value); }
};

/// Unbiased MMD^2 with kernel exp(-|x - y|^2 / h^2).
MmdResult mmd2_unbiased(const MatrixXd& samples, const MatrixXd& reference, double bandwidth);
/// Same, after uniform subsampling of each set to at most `cap` rows.
MmdResult mmd2_unbiased(const MatrixXd& samples, const MatrixXd& reference, double bandwidth,
                        RandomStream& rng, Index cap = 10000);

/// Median pairwise distance; sets above 2000 rows are thinned to 2000
/// evenly spaced rows first.
double median_heuristic_bandwidth(const MatrixXd& reference);

double sliced_wasserstein(const MatrixXd& samples, const MatrixXd& reference, int num_dirs,
                          RandomStream& rng);

struct GridPartition {
  double x_lo{-30}, x_hi{10};
  double y_lo{-10}, y_hi{10};
  int nx{50}, ny{50};

  double cell_volume() const { return (x_hi - x_lo) / nx * (y_hi - y_lo) / ny; }
};

struct Dl1Result {
  double value{0};
  double outside_samples{0};    // fraction of samples outside the grid
  double outside_reference{0};  // fraction of reference points outside the grid
};

/// sum over cells of Vol(cell) * |P_hat(cell) - P_hat'(cell)| with P_hat the
/// fraction of points falling in the cell.
Dl1Result dl1_discretized(const MatrixXd& samples, const MatrixXd& reference,
                          const GridPartition& partition = {});

/// Effective sample size with Geyer's initial monotone sequence estimator.
double ess(const VectorXd& x);

/// k rows drawn uniformly without replacement, in their original order.
MatrixXd subsample_rows(const MatrixXd& x, Index k, RandomStream& rng);

// ---------------------------------------------------------------------------
// Kernel similarity
// ---------------------------------------------------------------------------

struct KernelSimilarityReport {
  std::vector<double> differences;  // pairs with at least one acceptance
  double rejection_agreement{0};    // fraction of pairs where both reject
  double rejection_rate_a{0};
  double rejection_rate_b{0};
  Index pairs{0};
};

/// Drives both configurations with the same (q, p, u) at each point.
KernelSimilarityReport kernel_similarity(const TargetModel& model, const IntegratorConfig& cfg_a,
                                         const IntegratorConfig& cfg_b, const MatrixXd& q_points,
                                         RandomStream& rng);

// ---------------------------------------------------------------------------
// Biased involution
// ---------------------------------------------------------------------------

struct InvolutionReport {
  std::vector<double> biased_outputs;  // one uncorrected step from the tilted law
  double ks_biased{0};                 // vs LogNormal(-1, 1)
  double ks_corrected{0};              // Jacobian-corrected control vs LogNormal(0, 1)
  double kl_estimate{0};               // Monte Carlo KL(pi || pi_bar)
};

/// Target LogNormal(0, 1) with the involution z -> 1/z.
InvolutionReport biased_involution_experiment(Index n, RandomStream& rng);

double lognormal_cdf(double x, double mu, double sigma);
double normal_cdf(double x, double mu, double sigma);

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

double median(std::vector<double> v);
double quantile(std::vector<double> v, double prob);

}  // namespace rmhmc

#endif  // RMHMC_DIAGNOSTICS_HPP
