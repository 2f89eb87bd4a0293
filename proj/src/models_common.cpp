#include "rmhmc/models.hpp"

#include <cmath>
#include <numbers>

namespace rmhmc {

GaussianModel::GaussianModel(VectorXd mean, MatrixXd covariance, MatrixXd metric)
    : mean_(std::move(mean)) {
  const Index m = mean_.size();
  if (covariance.rows() != m || covariance.cols() != m || metric.rows() != m ||
      metric.cols() != m) {
    throw std::invalid_argument("GaussianModel: dimension mismatch");
  }
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("GaussianModel: covariance is not positive definite");
  }
  cov_chol_ = llt.matrixL();
  precision_ = llt.solve(MatrixXd::Identity(m, m));
  const double log_det_cov = 2.0 * cov_chol_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det_cov);
  bundle_ = make_metric_bundle(VectorXd::Zero(m), std::move(metric));
}

GaussianModel GaussianModel::standard(Index dim) {
  return GaussianModel(VectorXd::Zero(dim), MatrixXd::Identity(dim, dim),
                       MatrixXd::Identity(dim, dim));
}

double GaussianModel::log_density(const VectorXd& q) const {
  const VectorXd d = q - mean_;
  return log_norm_ - 0.5 * d.dot(precision_ * d);
}

VectorXd GaussianModel::grad_log_density(const VectorXd& q) const {
  return -precision_ * (q - mean_);
}

MetricBundled GaussianModel::metric_bundle(const VectorXd&) const { return bundle_; }

MatrixXd GaussianModel::sample(Index n, RandomStream& rng) const {
  MatrixXd out(n, dim());
  for (Index i = 0; i < n; ++i) {
    out.row(i) = (mean_ + cov_chol_ * rng.normal_vector(dim())).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------

EuclideanModel::EuclideanModel(ModelPtr base, std::optional<MatrixXd> mass)
    : base_(std::move(base)) {
  const Index m = base_->dim();
  bundle_ = make_metric_bundle(VectorXd::Zero(m), mass ? *mass : MatrixXd::Identity(m, m));
}

CorruptedModel::CorruptedModel(ModelPtr base, CorruptionSpec spec)
    : base_(std::move(base)), spec_(spec) {
  const Index m = base_->dim();
  if (spec_.grad_index < 0 || spec_.grad_index >= m || spec_.row < 0 || spec_.row >= m ||
      spec_.col < 0 || spec_.col >= m) {
    throw std::invalid_argument("CorruptionSpec: index out of range");
  }
}

MetricBundled CorruptedModel::metric_bundle(const VectorXd& q) const {
  MetricBundled b = base_->metric_bundle(q);
  MatrixXd& g = b.grads[spec_.grad_index];
  g(spec_.row, spec_.col) += spec_.magnitude;
  if (spec_.row != spec_.col) g(spec_.col, spec_.row) += spec_.magnitude;
  return b;
}

ModelPtr corrupt_metric_grads(ModelPtr base, const CorruptionSpec& spec) {
  if (spec.magnitude == 0.0) return base;
  return std::make_shared<CorruptedModel>(std::move(base), spec);
}

}  // namespace rmhmc
