// Acceptance suite at full sample sizes. One PASS/FAIL line per criterion;
// exit status is nonzero when any criterion fails.

#include "verification.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const auto results =
      rmhmc::app::run_verification(rmhmc::app::VerificationScale::full(), 20240607, std::cout, only);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.pass; });
  std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
