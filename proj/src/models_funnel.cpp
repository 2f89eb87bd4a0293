#include "rmhmc/models.hpp"

#include <cmath>
#include <stdexcept>

namespace rmhmc {

double softabs_eigenvalue(double lambda, double alpha) {
  const double x = alpha * lambda;
  if (std::abs(x) < 1e-4) return (1.0 + x * x / 3.0) / alpha;
  if (std::abs(x) > 40) return std::abs(lambda);
  return lambda / std::tanh(x);
}

double softabs_eigenvalue_derivative(double lambda, double alpha) {
  const double x = alpha * lambda;
  if (std::abs(x) < 1e-4) return 2.0 * x / 3.0;
  if (std::abs(x) > 40) return lambda > 0 ? 1.0 : -1.0;
  const double sh = std::sinh(x);
  return 1.0 / std::tanh(x) - x / (sh * sh);
}

MetricBundled softabs_metric(const VectorXd& q, const MatrixXd& hessian,
                             const std::vector<MatrixXd>& hessian_grads, double alpha) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hessian);
  if (eig.info() != Eigen::Success) {
    throw EvaluationError("SoftAbs eigendecomposition failed", q);
  }
  const VectorXd& lam = eig.eigenvalues();
  const MatrixXd& Q = eig.eigenvectors();
  const Index m = lam.size();

  VectorXd f(m);
  for (Index i = 0; i < m; ++i) f[i] = softabs_eigenvalue(lam[i], alpha);

  MetricBundled b;
  b.metric = Q * f.asDiagonal() * Q.transpose();
  b.inverse = Q * f.cwiseInverse().asDiagonal() * Q.transpose();
  b.log_det = f.array().log().sum();
  Eigen::LLT<MatrixXd> llt(b.metric);
  if (llt.info() != Eigen::Success) {
    throw EvaluationError("SoftAbs metric failed its Cholesky factorization", q);
  }
  b.chol_lower = llt.matrixL();

  if (hessian_grads.empty()) return b;

  // Divided differences of the eigenvalue map (Daleckii-Krein).
  MatrixXd dd(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double gap = lam[i] - lam[j];
      dd(i, j) = std::abs(gap) < 1e-8
                     ? softabs_eigenvalue_derivative(0.5 * (lam[i] + lam[j]), alpha)
                     : (f[i] - f[j]) / gap;
    }
  }
  b.grads.reserve(hessian_grads.size());
  for (const MatrixXd& dH : hessian_grads) {
    const MatrixXd rotated = Q.transpose() * dH * Q;
    b.grads.push_back(Q * dd.cwiseProduct(rotated) * Q.transpose());
  }
  return b;
}

// ---------------------------------------------------------------------------

FunnelModel::FunnelModel(double softabs_alpha) : alpha_(softabs_alpha) {
  if (!(alpha_ > 0)) throw std::invalid_argument("FunnelModel: SoftAbs alpha must be positive");
}

double FunnelModel::log_density(const VectorXd& q) const {
  const double v = q[kVIndex];
  const double s = q.head(kNumX).squaredNorm();
  return -v * v / 18.0 + 0.5 * static_cast<double>(kNumX) * v - 0.5 * std::exp(v) * s;
}

VectorXd FunnelModel::grad_log_density(const VectorXd& q) const {
  const double v = q[kVIndex];
  const double ev = std::exp(v);
  VectorXd g(kNumX + 1);
  g.head(kNumX) = -ev * q.head(kNumX);
  g[kVIndex] = -v / 9.0 + 0.5 * static_cast<double>(kNumX) - 0.5 * ev * q.head(kNumX).squaredNorm();
  return g;
}

MatrixXd FunnelModel::potential_hessian(const VectorXd& q) const {
  const double ev = std::exp(q[kVIndex]);
  MatrixXd H = MatrixXd::Zero(kNumX + 1, kNumX + 1);
  H.topLeftCorner(kNumX, kNumX).diagonal().setConstant(ev);
  H.col(kVIndex).head(kNumX) = ev * q.head(kNumX);
  H.row(kVIndex).head(kNumX) = ev * q.head(kNumX).transpose();
  H(kVIndex, kVIndex) = 1.0 / 9.0 + 0.5 * ev * q.head(kNumX).squaredNorm();
  return H;
}

MetricBundled FunnelModel::metric_bundle(const VectorXd& q) const {
  const Index m = kNumX + 1;
  const double ev = std::exp(q[kVIndex]);
  std::vector<MatrixXd> dH;
  dH.reserve(m);
  for (Index k = 0; k < kNumX; ++k) {
    MatrixXd d = MatrixXd::Zero(m, m);
    d(k, kVIndex) = d(kVIndex, k) = ev;
    d(kVIndex, kVIndex) = ev * q[k];
    dH.push_back(std::move(d));
  }
  MatrixXd dv = potential_hessian(q);
  dv(kVIndex, kVIndex) -= 1.0 / 9.0;
  dH.push_back(std::move(dv));
  return softabs_metric(q, potential_hessian(q), dH, alpha_);
}

MatrixXd FunnelModel::sample(Index n, RandomStream& rng) const { return funnel_analytic_sample(n, rng); }

MatrixXd funnel_analytic_sample(Index n, RandomStream& rng) {
  MatrixXd out(n, FunnelModel::kNumX + 1);
  for (Index i = 0; i < n; ++i) {
    const double v = 3.0 * rng.normal();
    const double sd = std::exp(-0.5 * v);
    for (Index j = 0; j < FunnelModel::kNumX; ++j) out(i, j) = sd * rng.normal();
    out(i, FunnelModel::kVIndex) = v;
  }
  return out;
}

}  // namespace rmhmc
