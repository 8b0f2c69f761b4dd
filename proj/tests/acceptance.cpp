#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "rqiqn/verify/suite.hpp"

using namespace rqiqn;

namespace {

constexpr std::uint64_t kChainSteps = 200000;
constexpr std::uint64_t kNavSteps = 30000;

void print(const verify::CriterionResult& r) {
  std::cout << (r.passed ? "PASS" : "FAIL") << "  criterion " << r.id << "  " << r.name << ": " << r.detail << " ("
            << std::fixed << std::setprecision(2) << r.seconds << " s)" << std::defaultfloat << std::endl;
}

}  // namespace

int main() {
  const auto log = [](const std::string& line) { std::cout << "      " << line << std::endl; };
  std::vector<verify::CriterionResult> results = verify::run_fast_suite();
  for (const auto& r : results) print(r);
  results.push_back(verify::check_degeneration({0, 1, 2, 3, 4}, kChainSteps, log));
  print(results.back());
  results.push_back(verify::check_navigation({0, 1, 2}, kNavSteps, log));
  print(results.back());
  std::cout << "N/A   criterion 9  not applicable to this build" << std::endl;

  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  std::cout << (ok ? "acceptance: all criteria passed" : "acceptance: some criteria failed") << std::endl;
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
