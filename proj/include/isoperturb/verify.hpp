#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace isoperturb {

struct CriterionResult {
  int id = 0;
  std::string name;
  std::string group;  // perturb, bounds, spaces, banach_stone, keps
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  std::uint64_t seed = 20240601;
  unsigned jobs = 1;
  std::string only;  // group name or criterion id; empty runs everything
};

// Group names accepted by SuiteOptions::only.
const std::vector<std::string>& suite_groups();

std::vector<CriterionResult> run_acceptance_suite(const SuiteOptions& options = {});

}  // namespace isoperturb
