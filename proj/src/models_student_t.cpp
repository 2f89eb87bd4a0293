#include "rmhmc/models.hpp"

#include <cmath>
#include <stdexcept>

namespace rmhmc {

StudentTModel::StudentTModel(VectorXd sigma_diag, double dof)
    : sigma_(std::move(sigma_diag)), nu_(dof) {
  if (sigma_.size() < 1 || (sigma_.array() <= 0).any()) {
    throw std::invalid_argument("StudentTModel: scale entries must be positive");
  }
  if (!(nu_ > 0)) throw std::invalid_argument("StudentTModel: dof must be positive");
}

StudentTModel StudentTModel::multiscale(double last_variance) {
  VectorXd s = VectorXd::Ones(20);
  s[19] = last_variance;
  return StudentTModel(std::move(s), 5.0);
}

double StudentTModel::log_density(const VectorXd& q) const {
  const double m = static_cast<double>(dim());
  const double s = q.cwiseAbs2().cwiseQuotient(sigma_).sum();
  return -0.5 * (nu_ + m) * std::log1p(s / nu_);
}

VectorXd StudentTModel::grad_log_density(const VectorXd& q) const {
  const double m = static_cast<double>(dim());
  const double s = q.cwiseAbs2().cwiseQuotient(sigma_).sum();
  return -((nu_ + m) / (nu_ + s)) * q.cwiseQuotient(sigma_);
}

MetricBundled StudentTModel::scaled_bundle(const VectorXd& q, double scale, bool with_grads) const {
  const Index m = dim();
  MetricBundled b;
  const VectorXd prec = sigma_.cwiseInverse();
  b.metric = (scale * prec).asDiagonal();
  b.inverse = (sigma_ / scale).asDiagonal();
  b.chol_lower = (scale * prec).cwiseSqrt().asDiagonal();
  b.log_det = static_cast<double>(m) * std::log(scale) - sigma_.array().log().sum();
  if (!std::isfinite(b.log_det) || !(scale > 0)) {
    throw EvaluationError("Student-t metric is degenerate", q);
  }
  if (with_grads) {
    // dG/dq_k = -2 (nu+m) / (nu+s)^2 (Sigma^-1 q)_k Sigma^-1
    const double md = static_cast<double>(m);
    const double c = -2.0 * scale * scale / (nu_ + md);
    const VectorXd w = q.cwiseProduct(prec);
    b.grads.reserve(m);
    for (Index k = 0; k < m; ++k) b.grads.push_back(MatrixXd((c * w[k] * prec).asDiagonal()));
  }
  return b;
}

MetricBundled StudentTModel::metric(const VectorXd& q) const {
  const double s = q.cwiseAbs2().cwiseQuotient(sigma_).sum();
  return scaled_bundle(q, (nu_ + static_cast<double>(dim())) / (nu_ + s), false);
}

MetricBundled StudentTModel::metric_bundle(const VectorXd& q) const {
  const double s = q.cwiseAbs2().cwiseQuotient(sigma_).sum();
  return scaled_bundle(q, (nu_ + static_cast<double>(dim())) / (nu_ + s), true);
}

MatrixXd StudentTModel::sample(Index n, RandomStream& rng) const {
  const Index m = dim();
  MatrixXd out(n, m);
  const VectorXd sd = sigma_.cwiseSqrt();
  for (Index i = 0; i < n; ++i) {
    const VectorXd z = rng.normal_vector(m).cwiseProduct(sd);
    const double w = rng.chi_squared(nu_);
    out.row(i) = (z * std::sqrt(nu_ / w)).transpose();
  }
  return out;
}

}  // namespace rmhmc
