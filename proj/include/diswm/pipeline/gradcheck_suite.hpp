#pragma once

#include <string>
#include <vector>

#include "diswm/diffcore/gradcheck.hpp"

namespace diswm {

struct GradCheckCase {
  std::string module;
  std::string name;
  GradCheckResult result;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Central-difference checks at toy sizes (B = 2, L = 3, 4×4 obs, z = 2).
/// `module` is "all", "diffcore" or "losses"; anything else is a ConfigError.
std::vector<GradCheckCase> run_gradcheck_suite(const std::string& module);

}  // namespace diswm
