#pragma once

#include <string>
#include <vector>

namespace adamatch {

struct SelftestResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Invariant checks on small built-in fixtures.
std::vector<SelftestResult> run_selftest();

}  // namespace adamatch
