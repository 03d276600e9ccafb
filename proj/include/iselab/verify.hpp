#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iselab {

struct SuiteOptions {
  int m = 2;                       // shape size for the growth suites
  long n = 0;                      // 0 selects the suite default
  long samples = 0;                // 0 selects the suite default
  std::uint64_t seed = 20260815;
  int threads = 1;
};

struct SuiteCheck {
  std::string label;
  bool passed = true;
  std::string detail;
};

// One cross-module consistency suite: a deterministic CSV artifact plus the
// pass/fail checks evaluated on it. Report-only suites never fail.
struct SuiteResult {
  std::string name;
  std::string csv;
  std::vector<SuiteCheck> checks;
  bool report_only = false;
  bool passed() const {
    if (report_only) return true;
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

const std::vector<std::string>& suite_names();
SuiteResult run_suite(const std::string& name, const SuiteOptions& options);

}  // namespace iselab
