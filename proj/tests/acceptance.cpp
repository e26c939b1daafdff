#include <cstdlib>
#include <iostream>
#include <string>

#include "isoperturb/verify.hpp"

// Runs every acceptance criterion and prints one line per criterion.
// Optional arguments: seed, jobs.
int main(int argc, char** argv) {
  isoperturb::SuiteOptions options;
  if (argc > 1) options.seed = std::stoull(argv[1]);
  if (argc > 2) options.jobs = static_cast<unsigned>(std::stoul(argv[2]));
  bool all = true;
  for (const auto& r : isoperturb::run_acceptance_suite(options)) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << r.id << " [" << r.group << "] " << r.name
              << " (" << r.seconds << " s): " << r.detail << std::endl;
  }
  std::cout << (all ? "all criteria pass" : "some criteria FAIL") << std::endl;
  return all ? EXIT_SUCCESS : EXIT_FAILURE;
}
