#include "isoperturb/serialization.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <sstream>
#include <string>

#include "isoperturb/error.hpp"

namespace isoperturb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double get_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw Error(Errc::InvalidArgument, std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

double get_number_or(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? get_number(j, key) : fallback;
}

std::string get_kind(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw Error(Errc::InvalidArgument, "expected an object with a string 'kind'");
  return j.at("kind").get<std::string>();
}

SignedPermutation permutation_from_json(const Json& j) {
  try {
    auto sigma = j.at("sigma").get<std::vector<Eigen::Index>>();
    auto lambda = j.at("lambda").get<std::vector<int>>();
    return std::get<SignedPermutation>(MapSpec::signed_permutation(std::move(sigma), std::move(lambda)).kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad signed permutation: ") + e.what());
  }
}

Json permutation_to_json(const SignedPermutation& sp) { return Json{{"sigma", sp.sigma}, {"lambda", sp.lambda}}; }

std::vector<double> parse_csv_numbers(const std::string& line, bool& numeric) {
  std::vector<double> values;
  std::stringstream stream(line);
  std::string cell;
  numeric = true;
  while (std::getline(stream, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) numeric = false;
    } catch (const std::exception&) {
      numeric = false;
    }
  }
  return values;
}

}  // namespace

Json number_or_overflow(double value) {
  if (std::isfinite(value)) return value;
  return "overflow";
}

std::string csv_number(double value) {
  if (!std::isfinite(value)) return "overflow";
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

Json to_json(const PerturbationFunction& phi) {
  return std::visit(
      Overloaded{[](const Identity&) { return Json{{"kind", "identity"}}; },
                 [](const Affine& a) { return Json{{"kind", "affine"}, {"M", a.M}, {"L", a.L}}; },
                 [](const AdditivePower& p) { return Json{{"kind", "additive_power"}, {"alpha", p.alpha}, {"c", p.c}}; },
                 [](const Tabulated& t) {
                   Json knots = Json::array();
                   for (const auto& [x, v] : t.knots) knots.push_back({x, v});
                   return Json{{"kind", "tabulated"}, {"knots", knots}};
                 }},
      phi.kind());
}

PerturbationFunction perturbation_from_json(const Json& j) {
  const auto kind = get_kind(j);
  if (kind == "identity") return PerturbationFunction::identity();
  if (kind == "affine") return PerturbationFunction::affine(get_number(j, "M"), get_number(j, "L"));
  if (kind == "additive_power")
    return PerturbationFunction::additive_power(get_number(j, "alpha"), get_number_or(j, "c", 1.0));
  if (kind == "tabulated") {
    if (!j.contains("knots") || !j.at("knots").is_array())
      throw Error(Errc::InvalidArgument, "tabulated phi needs a 'knots' array");
    std::vector<std::pair<double, double>> knots;
    for (const auto& knot : j.at("knots")) {
      if (!knot.is_array() || knot.size() != 2 || !knot[0].is_number() || !knot[1].is_number())
        throw Error(Errc::InvalidArgument, "each knot must be a [t, value] pair");
      knots.emplace_back(knot[0].get<double>(), knot[1].get<double>());
    }
    return PerturbationFunction::tabulated(std::move(knots));
  }
  throw Error(Errc::InvalidArgument, "unknown perturbation kind '" + kind + "'");
}

Json to_json(const MapSpec& map) {
  Json j = std::visit(
      Overloaded{[](const Vestfrid1D& v) { return Json{{"kind", "vestfrid_1d"}, {"eps", v.eps}}; },
                 [](const CoordinatewiseVestfrid& v) {
                   return Json{{"kind", "coordinatewise_vestfrid"},
                               {"eps", std::vector<double>(v.eps.data(), v.eps.data() + v.eps.size())}};
                 },
                 [](const SignedPermutation& sp) {
                   Json out = permutation_to_json(sp);
                   out["kind"] = "signed_permutation";
                   return out;
                 },
                 [](const NoisyIsometry& n) {
                   return Json{{"kind", "noisy_isometry"},
                               {"base", permutation_to_json(n.base)},
                               {"amplitude", n.amplitude},
                               {"seed", n.seed}};
                 },
                 [](const Composite& c) {
                   Json maps = Json::array();
                   for (const auto& m : c.maps) maps.push_back(to_json(m));
                   return Json{{"kind", "composite"}, {"maps", maps}};
                 }},
      map.kind);
  j["claimed_M"] = map.claimed_M;
  j["claimed_L"] = map.claimed_L;
  return j;
}

MapSpec map_from_json(const Json& j) {
  const auto kind = get_kind(j);
  MapSpec map;
  if (kind == "vestfrid_1d") {
    map = MapSpec::vestfrid_1d(get_number(j, "eps"));
  } else if (kind == "coordinatewise_vestfrid") {
    if (!j.contains("eps") || !j.at("eps").is_array())
      throw Error(Errc::InvalidArgument, "coordinatewise_vestfrid needs an 'eps' array");
    const auto eps = j.at("eps").get<std::vector<double>>();
    map = MapSpec::coordinatewise_vestfrid(Eigen::Map<const Eigen::VectorXd>(eps.data(), static_cast<Eigen::Index>(eps.size())));
  } else if (kind == "signed_permutation") {
    auto sp = permutation_from_json(j);
    map = MapSpec::signed_permutation(std::move(sp.sigma), std::move(sp.lambda));
  } else if (kind == "identity") {
    map = MapSpec::identity_map(static_cast<Eigen::Index>(get_number(j, "dim")));
  } else if (kind == "noisy_isometry") {
    if (!j.contains("base")) throw Error(Errc::InvalidArgument, "noisy_isometry needs a 'base' permutation");
    const auto seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : std::uint64_t{0};
    map = MapSpec::noisy_isometry(permutation_from_json(j.at("base")), get_number(j, "amplitude"), seed);
  } else if (kind == "composite") {
    if (!j.contains("maps") || !j.at("maps").is_array())
      throw Error(Errc::InvalidArgument, "composite needs a 'maps' array");
    std::vector<MapSpec> maps;
    for (const auto& inner : j.at("maps")) maps.push_back(map_from_json(inner));
    map = MapSpec::composite(std::move(maps));
  } else {
    throw Error(Errc::InvalidArgument, "unknown map kind '" + kind + "'");
  }
  map.claimed_M = get_number_or(j, "claimed_M", map.claimed_M);
  map.claimed_L = get_number_or(j, "claimed_L", map.claimed_L);
  return map;
}

Json to_json(const MidpointBoundReport& report) {
  Json corollaries = Json::object();
  for (const auto& [name, value] : report.corollary_values) corollaries[name] = number_or_overflow(value);
  return Json{{"d", number_or_overflow(report.d)},
              {"n_star", report.n_star},
              {"k", number_or_overflow(report.k)},
              {"bound", number_or_overflow(report.bound)},
              {"method", std::string(to_string(report.method))},
              {"corollary_values", corollaries},
              {"capped_depths", report.capped_depths}};
}

Json to_json(const KepsInstance& instance) {
  return Json{{"eps", instance.eps},
              {"breakpoints", instance.map.breakpoints},
              {"slopes", instance.map.slopes},
              {"a", number_or_overflow(instance.a)},
              {"b", number_or_overflow(instance.b)},
              {"ratio", number_or_overflow(instance.ratio)}};
}

Json to_json(const Recovery& recovery) {
  const auto& d = recovery.diagnostics;
  Json candidates = Json::array();
  for (const auto& set : d.candidate_sets) candidates.push_back(set);
  return Json{{"sigma", recovery.isometry.sigma},
              {"lambda", recovery.isometry.lambda},
              {"D", number_or_overflow(d.D_used)},
              {"m", number_or_overflow(d.m_used)},
              {"margins",
               {{"condition_ii", number_or_overflow(d.condition_ii_margin)},
                {"eps_M", number_or_overflow(d.eps_M)}}},
              {"m_escalations", d.m_escalations},
              {"candidate_sets", candidates}};
}

SpacePoint point_from_json(const Json& j, NormKind kind) {
  if (!j.is_array()) throw Error(Errc::InvalidArgument, "a point must be an array of numbers");
  const auto coords = j.get<std::vector<double>>();
  return {Eigen::Map<const Eigen::VectorXd>(coords.data(), static_cast<Eigen::Index>(coords.size())), kind};
}

std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> read_operator_table(std::istream& in, Eigen::Index nX,
                                                                               Eigen::Index nY) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    bool numeric = true;
    const auto values = parse_csv_numbers(line, numeric);
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw Error(Errc::InvalidArgument, "non-numeric cell on line " + std::to_string(line_no));
    }
    if (static_cast<Eigen::Index>(values.size()) != nX + nY)
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                                               " cells, expected " + std::to_string(nX + nY));
    Eigen::VectorXd input = Eigen::Map<const Eigen::VectorXd>(values.data(), nX);
    Eigen::VectorXd output = Eigen::Map<const Eigen::VectorXd>(values.data() + nX, nY);
    rows.emplace_back(std::move(input), std::move(output));
  }
  return rows;
}

}  // namespace isoperturb
