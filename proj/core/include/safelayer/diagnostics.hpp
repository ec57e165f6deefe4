#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "safelayer/constraints.hpp"
#include "safelayer/scenario.hpp"

namespace safelayer {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// ||J - J_fd||_F / max(||J_fd||_F, 1e-6) with central differences of step h.
double jacobian_fd_error(const ConstraintBlock& block, const Vector& q, double h = 1e-6);

// One check per block, named "jacobian:<label>".
std::vector<CheckResult> check_jacobians(const ConstraintSet& constraints, const Vector& q,
                                         double tolerance = 1e-4);

// Rate divisibility, chain and attachment validity, initial state, filter
// settings and a finite-difference Jacobian spot check at the initial state.
std::vector<CheckResult> validate_scenario(const Scenario& sc);

// Same, starting from a file; a parse failure is reported as the "load" check.
std::vector<CheckResult> validate_scenario_file(const std::filesystem::path& path);

}  // namespace safelayer
