#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isoperturb {

// Process exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // simulate found a negative margin, or verify-suite failed
  kExitConfig = 2,
  kExitHypothesis = 3,
  kExitMTooLarge = 4,
  kExitRecovery = 5,
};

// args excludes the program name. Reports go to --out when given, else to out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace isoperturb
