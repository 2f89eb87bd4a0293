#ifndef RMHMC_MODELS_HPP
#define RMHMC_MODELS_HPP

#include "rmhmc/core.hpp"
#include "rmhmc/random.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace rmhmc {

// ---------------------------------------------------------------------------
// Gaussian with a constant metric
// ---------------------------------------------------------------------------

/// Normal(mean, covariance) paired with a constant metric. The log-density
/// is normalized.
class GaussianModel : public TargetModel {
 public:
  GaussianModel(VectorXd mean, MatrixXd covariance, MatrixXd metric);
  /// Standard normal in `dim` dimensions with the identity metric.
  static GaussianModel standard(Index dim);

  std::string name() const override { return "gaussian"; }
  Index dim() const override { return mean_.size(); }
  double log_density(const VectorXd& q) const override;
  VectorXd grad_log_density(const VectorXd& q) const override;
  MetricBundled metric_bundle(const VectorXd& q) const override;
  MetricBundled metric(const VectorXd& q) const override { return metric_bundle(q); }
  bool constant_metric() const override { return true; }
  bool has_analytic_sampler() const override { return true; }
  MatrixXd sample(Index n, RandomStream& rng) const override;

 private:
  VectorXd mean_;
  MatrixXd precision_;
  MatrixXd cov_chol_;
  double log_norm_;
  MetricBundled bundle_;
};

// ---------------------------------------------------------------------------
// Banana-shaped posterior
// ---------------------------------------------------------------------------

/// theta_1, theta_2 ~ Normal(0, sigma_theta^2), y_i ~ Normal(theta_1 +
/// theta_2^2, sigma_y^2). The metric is the Fisher information plus the
/// negative Hessian of the log-prior. Log-density is up to a constant.
class BananaModel : public TargetModel {
 public:
  BananaModel(VectorXd observations, double sigma_y = 2.0, double sigma_theta = 2.0);
  /// The checked-in 100-observation fixture.
  static BananaModel standard();

  std::string name() const override { return "banana"; }
  Index dim() const override { return 2; }
  double log_density(const VectorXd& q) const override;
  VectorXd grad_log_density(const VectorXd& q) const override;
  MetricBundled metric_bundle(const VectorXd& q) const override;
  MetricBundled metric(const VectorXd& q) const override;
  bool has_analytic_sampler() const override { return true; }
  /// Rejection sampling under a uniform envelope; see `envelope()`.
  MatrixXd sample(Index n, RandomStream& rng) const override;

  Index num_observations() const { return n_; }
  const VectorXd& observations() const { return y_; }

  /// Box mode +/- 10 marginal standard deviations (marginals from
  /// quadrature) with the global log-density maximum as envelope height.
  struct Envelope {
    Eigen::Vector2d lower;
    Eigen::Vector2d upper;
    Eigen::Vector2d mode;
    double log_max;
  };
  const Envelope& envelope() const { return envelope_; }

 private:
  MatrixXd metric_matrix(double theta2) const;
  Envelope build_envelope() const;

  VectorXd y_;
  Index n_;
  double sigma_y_, sigma_theta_;
  double y_mean_, y_centered_ss_;
  Envelope envelope_;
};

/// Closed-form banana metric bundle for the standard model.
MetricBundled banana_metric(const Eigen::Vector2d& theta);
MatrixXd banana_rejection_sample(Index n, RandomStream& rng);

// ---------------------------------------------------------------------------
// Hierarchical logistic regression (beta | alpha block)
// ---------------------------------------------------------------------------

struct LogisticData {
  MatrixXd X;  // n x p, standardized
  VectorXd y;  // n labels in {0, 1}
};

/// Loads a CSV of 14 feature columns plus a trailing {0,1} label and
/// standardizes each feature column. Throws std::runtime_error naming the
/// path when the file is missing or malformed.
LogisticData load_heart_dataset(const std::filesystem::path& path, bool skip_header = false);

/// Synthetic stand-in for the heart data: standardized Gaussian features,
/// beta* ~ Normal(0, I), Bernoulli labels.
LogisticData synthetic_logistic_data(Index n, Index p, RandomStream& rng);

/// Conditional posterior of beta given the prior precision alpha, with
/// metric G(beta) = X^T Lambda X + alpha Id.
class LogisticModel : public TargetModel {
 public:
  static constexpr double kShape = 1.0;  // Gamma(k, theta) hyperprior on alpha
  static constexpr double kScale = 2.0;

  LogisticModel(std::shared_ptr<const LogisticData> data, double alpha);

  std::string name() const override { return "logistic"; }
  Index dim() const override { return data_->X.cols(); }
  double log_density(const VectorXd& beta) const override;
  VectorXd grad_log_density(const VectorXd& beta) const override;
  MetricBundled metric_bundle(const VectorXd& beta) const override;
  MetricBundled metric(const VectorXd& beta) const override;

  double alpha() const { return alpha_; }
  const std::shared_ptr<const LogisticData>& data() const { return data_; }
  LogisticModel with_alpha(double alpha) const { return LogisticModel(data_, alpha); }

 private:
  std::shared_ptr<const LogisticData> data_;
  double alpha_;
};

MetricBundled logistic_metric(const LogisticModel& model, const VectorXd& beta);

// ---------------------------------------------------------------------------
// Neal's funnel with the SoftAbs metric
// ---------------------------------------------------------------------------

/// Smooth absolute value lambda * coth(alpha * lambda); equals 1/alpha at 0.
double softabs_eigenvalue(double lambda, double alpha);
/// Derivative of softabs_eigenvalue with respect to lambda.
double softabs_eigenvalue_derivative(double lambda, double alpha);

/// SoftAbs metric of a symmetric Hessian with its derivatives, given the
/// derivatives of the Hessian itself. Used by FunnelModel.
MetricBundled softabs_metric(const VectorXd& q, const MatrixXd& hessian,
                             const std::vector<MatrixXd>& hessian_grads, double alpha);

/// v ~ Normal(0, 9), x_i | v ~ Normal(0, exp(-v)), i = 1..10. Coordinates
/// are ordered (x_1, ..., x_10, v).
class FunnelModel : public TargetModel {
 public:
  static constexpr Index kNumX = 10;
  static constexpr Index kVIndex = kNumX;

  explicit FunnelModel(double softabs_alpha = 1e4);

  std::string name() const override { return "funnel"; }
  Index dim() const override { return kNumX + 1; }
  double log_density(const VectorXd& q) const override;
  VectorXd grad_log_density(const VectorXd& q) const override;
  MetricBundled metric_bundle(const VectorXd& q) const override;
  bool has_analytic_sampler() const override { return true; }
  MatrixXd sample(Index n, RandomStream& rng) const override;

  /// Hessian of the negative log-density.
  MatrixXd potential_hessian(const VectorXd& q) const;
  double softabs_alpha() const { return alpha_; }

 private:
  double alpha_;
};

MatrixXd funnel_analytic_sample(Index n, RandomStream& rng);

// ---------------------------------------------------------------------------
// Multiscale Student-t
// ---------------------------------------------------------------------------

/// m-variate Student-t with diagonal scale Sigma and metric
/// G(q) = (nu + m) / (nu + q^T Sigma^-1 q) * Sigma^-1.
class StudentTModel : public TargetModel {
 public:
  StudentTModel(VectorXd sigma_diag, double dof);
  /// nu = 5, m = 20, Sigma = diag(1, ..., 1, last_variance).
  static StudentTModel multiscale(double last_variance = 1e4);

  std::string name() const override { return "student-t"; }
  Index dim() const override { return sigma_.size(); }
  double log_density(const VectorXd& q) const override;
  VectorXd grad_log_density(const VectorXd& q) const override;
  MetricBundled metric_bundle(const VectorXd& q) const override;
  MetricBundled metric(const VectorXd& q) const override;
  bool has_analytic_sampler() const override { return true; }
  MatrixXd sample(Index n, RandomStream& rng) const override;

  double dof() const { return nu_; }
  const VectorXd& sigma_diag() const { return sigma_; }

 private:
  MetricBundled scaled_bundle(const VectorXd& q, double scale, bool with_grads) const;

  VectorXd sigma_;
  double nu_;
};

// ---------------------------------------------------------------------------
// Wrappers
// ---------------------------------------------------------------------------

/// Same log-density as `base` with a constant metric (identity by default);
/// the target of Euclidean HMC comparators.
class EuclideanModel : public TargetModel {
 public:
  explicit EuclideanModel(ModelPtr base, std::optional<MatrixXd> mass = std::nullopt);

  std::string name() const override { return base_->name() + "-euclidean"; }
  Index dim() const override { return base_->dim(); }
  double log_density(const VectorXd& q) const override { return base_->log_density(q); }
  VectorXd grad_log_density(const VectorXd& q) const override {
    return base_->grad_log_density(q);
  }
  MetricBundled metric_bundle(const VectorXd&) const override { return bundle_; }
  MetricBundled metric(const VectorXd&) const override { return bundle_; }
  bool constant_metric() const override { return true; }
  bool has_analytic_sampler() const override { return base_->has_analytic_sampler(); }
  MatrixXd sample(Index n, RandomStream& rng) const override { return base_->sample(n, rng); }

 private:
  ModelPtr base_;
  MetricBundled bundle_;
};

/// Additive perturbation of one metric-derivative entry (and its mirror so
/// the matrix stays symmetric). With magnitude != 0 the family dG/dq_k no
/// longer derives from a single metric, so mixed partials of H disagree.
struct CorruptionSpec {
  Index grad_index{0};
  Index row{0};
  Index col{1};
  double magnitude{0};
};

class CorruptedModel : public TargetModel {
 public:
  CorruptedModel(ModelPtr base, CorruptionSpec spec);

  std::string name() const override { return base_->name() + "-corrupted"; }
  Index dim() const override { return base_->dim(); }
  double log_density(const VectorXd& q) const override { return base_->log_density(q); }
  VectorXd grad_log_density(const VectorXd& q) const override {
    return base_->grad_log_density(q);
  }
  MetricBundled metric_bundle(const VectorXd& q) const override;
  MetricBundled metric(const VectorXd& q) const override { return base_->metric(q); }
  bool constant_metric() const override { return base_->constant_metric(); }
  bool has_analytic_sampler() const override { return base_->has_analytic_sampler(); }
  MatrixXd sample(Index n, RandomStream& rng) const override { return base_->sample(n, rng); }

  const CorruptionSpec& spec() const { return spec_; }

 private:
  ModelPtr base_;
  CorruptionSpec spec_;
};

/// Wraps `base` with the given corruption; a zero-magnitude spec returns
/// `base` itself.
ModelPtr corrupt_metric_grads(ModelPtr base, const CorruptionSpec& spec);

}  // namespace rmhmc

#endif  // RMHMC_MODELS_HPP
