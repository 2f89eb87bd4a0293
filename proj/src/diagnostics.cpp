#include "rmhmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rmhmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> to_sorted(const VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> project(const MatrixXd& x, const VectorXd& u) {
  const VectorXd y = x * u;
  return to_sorted(y);
}

}  // namespace

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

// ---------------------------------------------------------------------------

ReversibilityReport reversibility_error(const TargetModel& model, const PhasePointd& z,
                                        const IntegratorConfig& cfg) {
  ReversibilityReport r;
  try {
    const PhasePointd once = momentum_flip(integrate(model, z, cfg));
    const PhasePointd twice = momentum_flip(integrate(model, once, cfg));
    r.are = std::sqrt((twice.q - z.q).squaredNorm() + (twice.p - z.p).squaredNorm());
    if (!std::isfinite(r.are)) throw DivergenceError("non-finite round trip");
  } catch (const DivergenceError&) {
    r.diverged = true;
    r.are = r.rre = kInf;
    return r;
  }
  const double scale = std::sqrt(z.q.squaredNorm() + z.p.squaredNorm());
  r.rre = scale > 0 ? r.are / scale : r.are;
  return r;
}

VolumeReport volume_preservation_error(const TargetModel& model, const PhasePointd& z,
                                       const IntegratorConfig& cfg, double omega) {
  if (!(omega > 0)) throw std::invalid_argument("VPE perturbation must be positive");
  const Index m = z.dim();
  const VectorXd base = z.stacked();
  MatrixXd jac(2 * m, 2 * m);
  for (Index i = 0; i < 2 * m; ++i) {
    VectorXd plus = base, minus = base;
    plus[i] += 0.5 * omega;
    minus[i] -= 0.5 * omega;
    const VectorXd fp = integrate(model, PhasePointd::from_stacked(plus), cfg).stacked();
    const VectorXd fm = integrate(model, PhasePointd::from_stacked(minus), cfg).stacked();
    jac.col(i) = (fp - fm) / omega;
    if (!jac.col(i).allFinite()) {
      throw DivergenceError("non-finite Jacobian column " + std::to_string(i));
    }
  }
  VolumeReport r;
  r.omega = omega;
  r.abs_det = std::abs(jac.partialPivLu().determinant());
  r.vpe = std::abs(r.abs_det - 1.0);
  return r;
}

PerturbationChoice select_fd_perturbation(const TargetModel& model,
                                          const std::vector<PhasePointd>& points,
                                          const IntegratorConfig& cfg_tight) {
  if (points.empty()) throw std::invalid_argument("select_fd_perturbation: no points");
  PerturbationChoice choice;
  double best = kInf;
  for (std::size_t g = 0; g < kFdPerturbationGrid.size(); ++g) {
    std::vector<double> vpe;
    vpe.reserve(points.size());
    for (const PhasePointd& z : points) {
      try {
        vpe.push_back(volume_preservation_error(model, z, cfg_tight, kFdPerturbationGrid[g]).vpe);
      } catch (const DivergenceError&) {
        vpe.push_back(kInf);
      }
    }
    choice.median_vpe[g] = median(std::move(vpe));
    if (choice.median_vpe[g] < best) {
      best = choice.median_vpe[g];
      choice.omega = kFdPerturbationGrid[g];
    }
  }
  if (!std::isfinite(best)) throw std::runtime_error("every candidate perturbation gave a non-finite median VPE");
  return choice;
}

// ---------------------------------------------------------------------------

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double sup = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

double ks_statistic(const VectorXd& a, const VectorXd& b) {
  return ks_statistic(to_sorted(a), to_sorted(b));
}

double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double sup = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    sup = std::max({sup, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return sup;
}

VectorXd random_direction(Index m, RandomStream& rng) {
  VectorXd u;
  double norm = 0;
  do {
    u = rng.normal_vector(m);
    norm = u.norm();
  } while (norm == 0);
  return u / norm;
}

std::vector<double> random_projection_ks(const MatrixXd& samples, const MatrixXd& reference,
                                         int num_dirs, RandomStream& rng) {
  if (samples.cols() != reference.cols() || samples.cols() < 1) {
    throw std::invalid_argument("random_projection_ks: dimension mismatch");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(num_dirs));
  for (int d = 0; d < num_dirs; ++d) {
    const VectorXd u = random_direction(samples.cols(), rng);
    out.push_back(ks_statistic(project(samples, u), project(reference, u)));
  }
  return out;
}

MmdResult mmd2_unbiased(const MatrixXd& x, const MatrixXd& y, double h) {
  const Index n = x.rows(), k = y.rows();
  if (n < 2 || k < 2) throw std::invalid_argument("mmd2_unbiased: need at least two points per set");
  if (!(h > 0)) throw std::invalid_argument("mmd2_unbiased: bandwidth must be positive");
  const double inv_h2 = 1.0 / (h * h);
  auto kernel = [inv_h2](const auto& a, const auto& b) {
    return std::exp(-(a - b).squaredNorm() * inv_h2);
  };
  double sxx = 0, syy = 0, sxy = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) sxx += kernel(x.row(i), x.row(j));
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j) syy += kernel(y.row(i), y.row(j));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) sxy += kernel(x.row(i), y.row(j));
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  MmdResult r;
  r.signed_value = 2 * sxx / (dn * (dn - 1)) + 2 * syy / (dk * (dk - 1)) - 2 * sxy / (dn * dk);
  return r;
}

MmdResult mmd2_unbiased(const MatrixXd& x, const MatrixXd& y, double h, RandomStream& rng,
                        Index cap) {
  const MatrixXd xs = x.rows() > cap ? subsample_rows(x, cap, rng) : x;
  const MatrixXd ys = y.rows() > cap ? subsample_rows(y, cap, rng) : y;
  return mmd2_unbiased(xs, ys, h);
}

double median_heuristic_bandwidth(const MatrixXd& reference) {
  constexpr Index kMax = 2000;
  const Index n = reference.rows();
  if (n < 2) throw std::invalid_argument("median_heuristic_bandwidth: need at least two points");
  MatrixXd pts = reference;
  if (n > kMax) {
    pts.resize(kMax, reference.cols());
    for (Index i = 0; i < kMax; ++i) pts.row(i) = reference.row(i * n / kMax);
  }
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pts.rows() * (pts.rows() - 1) / 2));
  for (Index i = 0; i < pts.rows(); ++i)
    for (Index j = i + 1; j < pts.rows(); ++j) d.push_back((pts.row(i) - pts.row(j)).norm());
  const double h = median(std::move(d));
  if (!(h > 0)) throw std::invalid_argument("median_heuristic_bandwidth: degenerate (all points identical)");
  return h;
}

MatrixXd subsample_rows(const MatrixXd& x, Index k, RandomStream& rng) {
  const Index n = x.rows();
  if (k > n) throw std::invalid_argument("subsample_rows: k exceeds the number of rows");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  std::sort(idx.begin(), idx.begin() + k);
  MatrixXd out(k, x.cols());
  for (Index i = 0; i < k; ++i) out.row(i) = x.row(idx[i]);
  return out;
}

double sliced_wasserstein(const MatrixXd& samples, const MatrixXd& reference, int num_dirs,
                          RandomStream& rng) {
  if (samples.rows() == 0 || reference.rows() == 0) {
    throw std::invalid_argument("sliced_wasserstein: empty sample");
  }
  if (samples.cols() != reference.cols()) throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
  const Index n = std::min(samples.rows(), reference.rows());
  const MatrixXd a = samples.rows() > n ? subsample_rows(samples, n, rng) : samples;
  const MatrixXd b = reference.rows() > n ? subsample_rows(reference, n, rng) : reference;
  double total = 0;
  for (int d = 0; d < num_dirs; ++d) {
    const VectorXd u = random_direction(a.cols(), rng);
    const std::vector<double> pa = project(a, u), pb = project(b, u);
    double w = 0;
    for (Index i = 0; i < n; ++i) w += std::abs(pa[i] - pb[i]);
    total += w / static_cast<double>(n);
  }
  return total / num_dirs;
}

Dl1Result dl1_discretized(const MatrixXd& samples, const MatrixXd& reference,
                          const GridPartition& g) {
  if (samples.cols() != 2 || reference.cols() != 2) throw std::invalid_argument("dl1_discretized: 2-D only");
  auto histogram = [&g](const MatrixXd& x, double& outside) {
    MatrixXd h = MatrixXd::Zero(g.nx, g.ny);
    const double wx = (g.x_hi - g.x_lo) / g.nx, wy = (g.y_hi - g.y_lo) / g.ny;
    Index out = 0;
    for (Index i = 0; i < x.rows(); ++i) {
      const double fx = std::floor((x(i, 0) - g.x_lo) / wx), fy = std::floor((x(i, 1) - g.y_lo) / wy);
      if (fx < 0 || fx >= g.nx || fy < 0 || fy >= g.ny) {
        ++out;
        continue;
      }
      h(static_cast<Index>(fx), static_cast<Index>(fy)) += 1;
    }
    const double n = static_cast<double>(std::max<Index>(x.rows(), 1));
    outside = static_cast<double>(out) / n;
    return MatrixXd(h / n);
  };
  Dl1Result r;
  const MatrixXd ha = histogram(samples, r.outside_samples);
  const MatrixXd hb = histogram(reference, r.outside_reference);
  r.value = g.cell_volume() * (ha - hb).cwiseAbs().sum();
  return r;
}

double ess(const VectorXd& x) {
  const Index n = x.size();
  if (n < 10) throw std::invalid_argument("ess: need at least 10 values");
  const VectorXd c = x.array() - x.mean();
  const double var = c.squaredNorm() / static_cast<double>(n);
  if (!(var > 0)) throw std::invalid_argument("ess: zero-variance series");
  auto rho = [&](Index t) {
    return c.head(n - t).dot(c.tail(n - t)) / static_cast<double>(n) / var;
  };
  double sum_pairs = 0;
  double prev = kInf;
  for (Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0) break;
    pair = std::min(pair, prev);
    sum_pairs += pair;
    prev = pair;
  }
  // Antithetic chains can push tau to or below zero; cap ESS at n log10(n).
  const double tau = std::max(2 * sum_pairs - 1, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

// ---------------------------------------------------------------------------

KernelSimilarityReport kernel_similarity(const TargetModel& model, const IntegratorConfig& cfg_a,
                                         const IntegratorConfig& cfg_b, const MatrixXd& q_points,
                                         RandomStream& rng) {
  KernelSimilarityReport r;
  Index both = 0, rej_a = 0, rej_b = 0;
  for (Index i = 0; i < q_points.rows(); ++i) {
    const VectorXd q = q_points.row(i).transpose();
    const VectorXd p = sample_momentum(model, q, rng);
    const double u = rng.uniform();
    const TransitionRecord a = hmc_transition_driven(model, q, cfg_a, p, u);
    const TransitionRecord b = hmc_transition_driven(model, q, cfg_b, p, u);
    rej_a += !a.accepted;
    rej_b += !b.accepted;
    if (!a.accepted && !b.accepted) {
      ++both;
      continue;
    }
    const VectorXd qa = a.accepted ? a.proposal.q : q;
    const VectorXd qb = b.accepted ? b.proposal.q : q;
    r.differences.push_back((qa - qb).norm());
  }
  r.pairs = q_points.rows();
  const double np = static_cast<double>(std::max<Index>(r.pairs, 1));
  r.rejection_agreement = static_cast<double>(both) / np;
  r.rejection_rate_a = static_cast<double>(rej_a) / np;
  r.rejection_rate_b = static_cast<double>(rej_b) / np;
  return r;
}

// ---------------------------------------------------------------------------

double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

double lognormal_cdf(double x, double mu, double sigma) {
  return x <= 0 ? 0.0 : normal_cdf(std::log(x), mu, sigma);
}

InvolutionReport biased_involution_experiment(Index n, RandomStream& rng) {
  if (n < 10000) throw std::invalid_argument("biased_involution_experiment: n must be >= 1e4");
  InvolutionReport r;
  r.biased_outputs.reserve(static_cast<std::size_t>(n));
  std::vector<double> corrected;
  corrected.reserve(static_cast<std::size_t>(n));
  double sum_inv = 0, sum_log = 0;
  for (Index i = 0; i < n; ++i) {
    // Uncorrected step from the predicted stationary law LogNormal(-1, 1):
    // accept z -> 1/z with probability min(1, pi(1/z) / pi(z)) = min(1, z^2).
    const double z = std::exp(-1.0 + rng.normal());
    const double u = rng.uniform();
    r.biased_outputs.push_back(u < std::min(1.0, z * z) ? 1.0 / z : z);

    // Corrected step from the target: the ratio picks up |J(z)| = 1/z^2.
    const double w = std::exp(rng.normal());
    const double uc = rng.uniform();
    const double ratio = (w * w) * (1.0 / (w * w));
    corrected.push_back(uc < std::min(1.0, ratio) ? 1.0 / w : w);

    // KL(pi || pi_bar) = log E_pi sqrt|J| - E_pi log sqrt|J|, sqrt|J(w)| = 1/w.
    sum_inv += 1.0 / w;
    sum_log += -std::log(w);
  }
  const double dn = static_cast<double>(n);
  r.ks_biased = ks_one_sample(r.biased_outputs, [](double x) { return lognormal_cdf(x, -1, 1); });
  r.ks_corrected = ks_one_sample(std::move(corrected), [](double x) { return lognormal_cdf(x, 0, 1); });
  r.kl_estimate = std::log(sum_inv / dn) - sum_log / dn;
  return r;
}

}  // namespace rmhmc
