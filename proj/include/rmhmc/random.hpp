#ifndef RMHMC_RANDOM_HPP
#define RMHMC_RANDOM_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace rmhmc {

/// Seeded pseudo-random stream. Identical seeds give identical sequences;
/// `split(i)` derives an independent child stream deterministically from
/// (seed, i) without advancing the parent.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

  RandomStream split(std::uint64_t index) const;

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  double gamma(double shape, double scale);
  double chi_squared(double dof);
  std::uint64_t uniform_index(std::uint64_t n);

  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_{0};
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace rmhmc

#endif  // RMHMC_RANDOM_HPP
