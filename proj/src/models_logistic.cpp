#include "rmhmc/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rmhmc {

namespace {

constexpr Index kHeartFeatures = 14;

void standardize_columns(MatrixXd& X) {
  for (Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(X.rows()));
    if (sd > 0) X.col(j) /= sd;
  }
}

double sigmoid(double s) {
  return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

}  // namespace

LogisticData load_heart_dataset(const std::filesystem::path& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open heart dataset: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": non-numeric field '" + cell + "'");
      }
    }
    if (static_cast<Index>(row.size()) != kHeartFeatures + 1) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(kHeartFeatures + 1) + " columns, got " +
                               std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty heart dataset: " + path.string());

  LogisticData d;
  d.X.resize(static_cast<Index>(rows.size()), kHeartFeatures);
  d.y.resize(static_cast<Index>(rows.size()));
  for (Index i = 0; i < d.X.rows(); ++i) {
    for (Index j = 0; j < kHeartFeatures; ++j) d.X(i, j) = rows[i][j];
    const double label = rows[i][kHeartFeatures];
    if (label != 0.0 && label != 1.0) {
      throw std::runtime_error(path.string() + ": label on data row " + std::to_string(i + 1) +
                               " is not in {0, 1}");
    }
    d.y[i] = label;
  }
  standardize_columns(d.X);
  return d;
}

LogisticData synthetic_logistic_data(Index n, Index p, RandomStream& rng) {
  LogisticData d;
  d.X.resize(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) d.X(i, j) = rng.normal();
  standardize_columns(d.X);
  const VectorXd beta = rng.normal_vector(p);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) d.y[i] = rng.uniform() < sigmoid(d.X.row(i).dot(beta)) ? 1.0 : 0.0;
  return d;
}

// ---------------------------------------------------------------------------

LogisticModel::LogisticModel(std::shared_ptr<const LogisticData> data, double alpha)
    : data_(std::move(data)), alpha_(alpha) {
  if (!data_) throw std::invalid_argument("LogisticModel: null data");
  if (!(alpha_ > 0)) throw std::invalid_argument("LogisticModel: alpha must be positive");
}

double LogisticModel::log_density(const VectorXd& beta) const {
  const VectorXd s = data_->X * beta;
  double ll = 0;
  for (Index i = 0; i < s.size(); ++i) ll += data_->y[i] * s[i] - softplus(s[i]);
  return ll - 0.5 * alpha_ * beta.squaredNorm();
}

VectorXd LogisticModel::grad_log_density(const VectorXd& beta) const {
  const VectorXd s = data_->X * beta;
  VectorXd r(s.size());
  for (Index i = 0; i < s.size(); ++i) r[i] = data_->y[i] - sigmoid(s[i]);
  return data_->X.transpose() * r - alpha_ * beta;
}

MetricBundled LogisticModel::metric(const VectorXd& beta) const {
  const MatrixXd& X = data_->X;
  const VectorXd s = X * beta;
  VectorXd lambda(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    const double sg = sigmoid(s[i]);
    lambda[i] = sg * (1 - sg);
  }
  MatrixXd G = X.transpose() * lambda.asDiagonal() * X;
  G.diagonal().array() += alpha_;
  return make_metric_bundle(beta, std::move(G));
}

MetricBundled LogisticModel::metric_bundle(const VectorXd& beta) const {
  const MatrixXd& X = data_->X;
  const Index p = X.cols();
  const VectorXd s = X * beta;
  VectorXd lambda(s.size()), dlambda(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    const double sg = sigmoid(s[i]);
    lambda[i] = sg * (1 - sg);
    dlambda[i] = lambda[i] * (1 - 2 * sg);  // d Lambda_ii / d s_i
  }
  MatrixXd G = X.transpose() * lambda.asDiagonal() * X;
  G.diagonal().array() += alpha_;
  std::vector<MatrixXd> grads;
  grads.reserve(p);
  for (Index k = 0; k < p; ++k) {
    const VectorXd w = dlambda.cwiseProduct(X.col(k));
    grads.push_back(X.transpose() * w.asDiagonal() * X);
  }
  return make_metric_bundle(beta, std::move(G), std::move(grads));
}

MetricBundled logistic_metric(const LogisticModel& model, const VectorXd& beta) {
  return model.metric_bundle(beta);
}

}  // namespace rmhmc
