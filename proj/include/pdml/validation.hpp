#pragma once

#include <string>
#include <vector>

namespace pdml {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
};

// Runs every module's invariant suite at desk scale. Purely diagnostic
// checks (e.g. the non-normalized nivMF integral) always pass and report
// their measured value in `detail`.
std::vector<CheckResult> run_validation_suite();

}  // namespace pdml
