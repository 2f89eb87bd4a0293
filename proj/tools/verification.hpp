#ifndef RMHMC_TOOLS_VERIFICATION_HPP
#define RMHMC_TOOLS_VERIFICATION_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rmhmc::app {

/// Sample sizes for each check. `full()` matches the published acceptance
/// sizes; `reduced()` keeps the same tolerances at smaller n.
struct VerificationScale {
  std::string label;
  int reversibility_points;
  int omega_points;
  int monotonicity_points;
  long ergodicity_samples;
  long ergodicity_burnin;
  int newton_points;
  int corruption_points;
  long corruption_samples;
  int tuner_iterations;
  long involution_samples;
  int similarity_points;
  int derivative_points;

  static VerificationScale full();
  static VerificationScale reduced();
};

struct CheckOutcome {
  int id{0};
  std::string title;
  bool pass{false};
  std::string detail;
  double seconds{0};
};

/// Runs checks `only` (all ten when empty), printing one status line per
/// check to `out` as each finishes.
std::vector<CheckOutcome> run_verification(const VerificationScale& scale, std::uint64_t seed,
                                           std::ostream& out, const std::vector<int>& only = {});

}  // namespace rmhmc::app

#endif  // RMHMC_TOOLS_VERIFICATION_HPP
