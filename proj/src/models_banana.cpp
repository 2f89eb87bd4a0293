#include "rmhmc/models.hpp"

#include "banana_data.inc"

#include <cmath>
#include <stdexcept>

namespace rmhmc {

BananaModel::BananaModel(VectorXd observations, double sigma_y, double sigma_theta)
    : y_(std::move(observations)),
      n_(y_.size()),
      sigma_y_(sigma_y),
      sigma_theta_(sigma_theta) {
  if (n_ < 1) throw std::invalid_argument("BananaModel: no observations");
  y_mean_ = y_.mean();
  y_centered_ss_ = (y_.array() - y_mean_).square().sum();
  envelope_ = build_envelope();
}

BananaModel BananaModel::standard() {
  return BananaModel(Eigen::Map<const VectorXd>(detail::kBananaObservations, 100));
}

double BananaModel::log_density(const VectorXd& q) const {
  const double mu = q[0] + q[1] * q[1];
  const double prior = -(q[0] * q[0] + q[1] * q[1]) / (2 * sigma_theta_ * sigma_theta_);
  const double n = static_cast<double>(n_);
  const double sse = n * (y_mean_ - mu) * (y_mean_ - mu) + y_centered_ss_;
  return prior - sse / (2 * sigma_y_ * sigma_y_);
}

VectorXd BananaModel::grad_log_density(const VectorXd& q) const {
  const double mu = q[0] + q[1] * q[1];
  const double n = static_cast<double>(n_);
  const double r = n * (y_mean_ - mu) / (sigma_y_ * sigma_y_);
  const double pt = 1.0 / (sigma_theta_ * sigma_theta_);
  VectorXd g(2);
  g << -q[0] * pt + r, -q[1] * pt + 2 * q[1] * r;
  return g;
}

MatrixXd BananaModel::metric_matrix(double theta2) const {
  const double n = static_cast<double>(n_);
  const double sy2 = sigma_y_ * sigma_y_;
  const double pt = 1.0 / (sigma_theta_ * sigma_theta_);
  MatrixXd G(2, 2);
  G << pt + n / sy2, 2 * n * theta2 / sy2,
       2 * n * theta2 / sy2, pt + 4 * n * theta2 * theta2 / sy2;
  return G;
}

MetricBundled BananaModel::metric(const VectorXd& q) const {
  return make_metric_bundle(q, metric_matrix(q[1]));
}

MetricBundled BananaModel::metric_bundle(const VectorXd& q) const {
  const double n = static_cast<double>(n_);
  const double sy2 = sigma_y_ * sigma_y_;
  MatrixXd d2(2, 2);
  d2 << 0, 2 * n / sy2,
        2 * n / sy2, 8 * n * q[1] / sy2;
  return make_metric_bundle(q, metric_matrix(q[1]), {MatrixXd::Zero(2, 2), std::move(d2)});
}

BananaModel::Envelope BananaModel::build_envelope() const {
  // Quadrature on a window wide enough to hold the whole posterior.
  constexpr int kGrid = 500;
  const double lo1 = y_mean_ - 40, hi1 = y_mean_ + 20, lo2 = -12, hi2 = 12;
  const double h1 = (hi1 - lo1) / kGrid, h2 = (hi2 - lo2) / kGrid;

  MatrixXd logp(kGrid, kGrid);
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_at;
  VectorXd q(2);
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      q << lo1 + (i + 0.5) * h1, lo2 + (j + 0.5) * h2;
      logp(i, j) = log_density(q);
      if (logp(i, j) > best) {
        best = logp(i, j);
        best_at = q;
      }
    }
  }
  double mass = 0, m1 = 0, m2 = 0, s1 = 0, s2 = 0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double w = std::exp(logp(i, j) - best);
      const double t1 = lo1 + (i + 0.5) * h1, t2 = lo2 + (j + 0.5) * h2;
      mass += w;
      m1 += w * t1;
      m2 += w * t2;
      s1 += w * t1 * t1;
      s2 += w * t2 * t2;
    }
  }
  m1 /= mass;
  m2 /= mass;
  const double sd1 = std::sqrt(s1 / mass - m1 * m1);
  const double sd2 = std::sqrt(s2 / mass - m2 * m2);

  // Polish the grid maximizer with Newton steps on the gradient.
  Eigen::Vector2d mode = best_at;
  for (int it = 0; it < 50; ++it) {
    VectorXd x = mode;
    const VectorXd g = grad_log_density(x);
    Eigen::Matrix2d hess;
    for (int k = 0; k < 2; ++k) {
      const double h = fd_step(x[k]);
      VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      hess.col(k) = (grad_log_density(xp) - grad_log_density(xm)) / (2 * h);
    }
    const Eigen::Vector2d step = hess.ldlt().solve(g);
    VectorXd next = mode - step;
    if (!next.allFinite() || log_density(next) < log_density(x)) break;
    mode = next;
    if (step.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  VectorXd mv = mode;
  Envelope env;
  env.mode = mode;
  env.log_max = std::max(best, log_density(mv));
  env.lower = Eigen::Vector2d(mode[0] - 10 * sd1, mode[1] - 10 * sd2);
  env.upper = Eigen::Vector2d(mode[0] + 10 * sd1, mode[1] + 10 * sd2);
  return env;
}

MatrixXd BananaModel::sample(Index n, RandomStream& rng) const {
  if (n < 1) throw std::invalid_argument("banana sampler: n must be >= 1");
  MatrixXd out(n, 2);
  const Eigen::Vector2d width = envelope_.upper - envelope_.lower;
  VectorXd q(2);
  Index accepted = 0;
  std::uint64_t proposed = 0;
  while (accepted < n) {
    q << envelope_.lower[0] + width[0] * rng.uniform(), envelope_.lower[1] + width[1] * rng.uniform();
    ++proposed;
    if (std::log(rng.uniform()) < log_density(q) - envelope_.log_max) {
      out.row(accepted++) = q.transpose();
    }
    if (proposed >= 1000000 && static_cast<double>(accepted) < 1e-6 * static_cast<double>(proposed)) {
      throw std::runtime_error("banana rejection sampler: envelope acceptance rate below 1e-6");
    }
  }
  return out;
}

MetricBundled banana_metric(const Eigen::Vector2d& theta) {
  static const BananaModel model = BananaModel::standard();
  return model.metric_bundle(VectorXd(theta));
}

MatrixXd banana_rejection_sample(Index n, RandomStream& rng) {
  static const BananaModel model = BananaModel::standard();
  return model.sample(n, rng);
}

}  // namespace rmhmc
