#include <iostream>

#include "scenario/scenario.hpp"

int main() {
  unravel::cli::AcceptanceOptions opts;
  opts.progress = &std::cout;
  auto results = unravel::cli::run_acceptance(opts);
  int failed = 0;
  std::cout << "\n";
  for (const auto& r : results) {
    std::cout << unravel::cli::format_criterion(r) << "\n";
    if (!r.passed) ++failed;
  }
  if (failed)
    std::cout << failed << " of " << results.size() << " criteria failed\n";
  else
    std::cout << "all " << results.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
