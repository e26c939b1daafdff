#include "isoperturb/error.hpp"

namespace isoperturb {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::NonFinite: return "NonFinite";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::PositiveOverflow: return "PositiveOverflow";
    case Errc::CapExceeded: return "CapExceeded";
    case Errc::EpsVanishes: return "EpsVanishes";
    case Errc::HalvingViolated: return "HalvingViolated";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InversionDiverged: return "InversionDiverged";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::ModulusMismatch: return "ModulusMismatch";
    case Errc::HypothesisFailed: return "HypothesisFailed";
    case Errc::CardinalityMismatch: return "CardinalityMismatch";
    case Errc::BlockDecompositionFailed: return "BlockDecompositionFailed";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptyForBothSigns: return "EmptyForBothSigns";
    case Errc::MTooLarge: return "MTooLarge";
    case Errc::NotSingleValued: return "NotSingleValued";
    case Errc::NotBijective: return "NotBijective";
    case Errc::ConditionIIViolated: return "ConditionIIViolated";
    case Errc::NotTabulated: return "NotTabulated";
  }
  return "Unknown";
}

}  // namespace isoperturb
