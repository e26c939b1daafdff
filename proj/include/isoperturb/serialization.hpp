#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <json.hpp>
#include <utility>
#include <vector>

#include "isoperturb/banach_stone.hpp"
#include "isoperturb/bounds.hpp"
#include "isoperturb/keps.hpp"
#include "isoperturb/perturb.hpp"
#include "isoperturb/spaces.hpp"

namespace isoperturb {

using Json = nlohmann::ordered_json;

// Finite values pass through; anything else becomes the string "overflow".
Json number_or_overflow(double value);

// Same rule for CSV cells, printed with 17 significant digits.
std::string csv_number(double value);

// {"kind": "identity" | "affine" | "additive_power" | "tabulated", ...}
Json to_json(const PerturbationFunction& phi);
PerturbationFunction perturbation_from_json(const Json& j);

// {"kind": "vestfrid_1d" | "coordinatewise_vestfrid" | "signed_permutation" |
//  "noisy_isometry" | "composite", ...}; optional claimed_M / claimed_L
// override the values derived from the kind.
Json to_json(const MapSpec& map);
MapSpec map_from_json(const Json& j);

Json to_json(const MidpointBoundReport& report);
Json to_json(const KepsInstance& instance);

// {"sigma": [...], "lambda": [...], "D": .., "m": .., "margins": {...}}
Json to_json(const Recovery& recovery);

SpacePoint point_from_json(const Json& j, NormKind kind);

// CSV rows of nX inputs followed by nY outputs; blank lines and lines that
// start with '#' are skipped, as is a non-numeric header row.
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> read_operator_table(std::istream& in, Eigen::Index nX,
                                                                               Eigen::Index nY);

}  // namespace isoperturb
