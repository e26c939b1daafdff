#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isoperturb {

enum class Errc {
  NegativeInput,
  NonFinite,
  InvalidArgument,
  PositiveOverflow,
  CapExceeded,
  EpsVanishes,
  HalvingViolated,
  OutOfRange,
  DimensionMismatch,
  InversionDiverged,
  BudgetExceeded,
  ModulusMismatch,
  HypothesisFailed,
  CardinalityMismatch,
  BlockDecompositionFailed,
  IndexOutOfRange,
  EmptyForBothSigns,
  MTooLarge,
  NotSingleValued,
  NotBijective,
  ConditionIIViolated,
  NotTabulated,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace isoperturb
