#include <doctest.h>

#include <limits>
#include <sstream>

#include "isoperturb/error.hpp"
#include "isoperturb/random.hpp"
#include "isoperturb/serialization.hpp"

using namespace isoperturb;

TEST_CASE("perturbation functions round-trip") {
  const std::vector<PerturbationFunction> phis{
      PerturbationFunction::identity(), PerturbationFunction::affine(1.25, 0.5),
      PerturbationFunction::additive_power(0.3, 2.0),
      PerturbationFunction::tabulated({{0.0, 1.0}, {1.0, 2.5}, {4.0, 6.0}})};
  for (const auto& phi : phis) {
    const auto text = to_json(phi).dump();
    const auto back = perturbation_from_json(Json::parse(text));
    CHECK(to_json(back).dump() == text);
    for (const double t : {0.0, 0.3, 2.0, 17.0}) CHECK(back(t) == phi(t));
  }
  CHECK(Json::parse(R"({"kind":"tabulated","knots":[[0,1],[2,3]]})")["knots"][1][0] == 2);
}

TEST_CASE("perturbation parsing errors") {
  CHECK_THROWS_AS(perturbation_from_json(Json::parse(R"({"kind":"cubic"})")), Error);
  CHECK_THROWS_AS(perturbation_from_json(Json::parse(R"({"kind":"affine","M":1})")), Error);
  CHECK_THROWS_AS(perturbation_from_json(Json::parse(R"({"kind":"tabulated","knots":[[0,1,2]]})")), Error);
  CHECK_THROWS_AS(perturbation_from_json(Json::parse(R"([1,2])")), Error);
}

TEST_CASE("map specs round-trip and keep their behaviour") {
  auto rng = Rng::stream(61, 0);
  const auto p = random_signed_permutation(3, rng);
  const std::vector<MapSpec> maps{
      MapSpec::vestfrid_1d(0.1), MapSpec::coordinatewise_vestfrid(Eigen::Vector3d(0.1, 0.0, 0.05)),
      MapSpec::signed_permutation(p.sigma, p.lambda), MapSpec::identity_map(3),
      MapSpec::noisy_isometry(p, 0.4, 77),
      MapSpec::composite({MapSpec::coordinatewise_vestfrid(Eigen::Vector3d(0.1, 0.1, 0.1)),
                          MapSpec::noisy_isometry(p, 0.2, 5)})};
  for (const auto& map : maps) {
    const auto back = map_from_json(Json::parse(to_json(map).dump()));
    CHECK(back.claimed_M == map.claimed_M);
    CHECK(back.claimed_L == map.claimed_L);
    CHECK(back.dim() == map.dim());
    SpacePoint x{Eigen::VectorXd::LinSpaced(map.dim(), -1.5, 2.0), NormKind::Sup};
    CHECK((apply(back, x).coords - apply(map, x).coords).norm() == 0.0);
  }
  const auto overridden = map_from_json(Json::parse(R"({"kind":"vestfrid_1d","eps":0.1,"claimed_L":2})"));
  CHECK(overridden.claimed_L == 2.0);
  CHECK(overridden.claimed_M == doctest::Approx(1.1));
  CHECK_THROWS_AS(map_from_json(Json::parse(R"({"kind":"signed_permutation","sigma":[0,0],"lambda":[1,1]})")), Error);
}

TEST_CASE("non-finite numbers become the overflow sentinel") {
  CHECK(number_or_overflow(std::numeric_limits<double>::infinity()) == "overflow");
  CHECK(number_or_overflow(std::numeric_limits<double>::quiet_NaN()) == "overflow");
  CHECK(number_or_overflow(2.5) == 2.5);
  CHECK(csv_number(std::numeric_limits<double>::infinity()) == "overflow");
  CHECK(csv_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(csv_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("bound report serialization carries every field") {
  const auto report = optimize_bound(PerturbationFunction::affine(1.0, 1.0), 1024.0);
  const auto j = to_json(report);
  for (const char* key : {"d", "n_star", "k", "bound", "method", "corollary_values", "capped_depths"})
    CHECK(j.contains(key));
  CHECK(j["method"] == "affine-closed-form");
  CHECK(j["corollary_values"]["hyers_ulam"] == 63.0);
}

TEST_CASE("recovery serialization") {
  const auto T = oracle_from_map(MapSpec::signed_permutation({1, 0}, {-1, 1}));
  const auto j = to_json(recover(T));
  CHECK(j["sigma"] == Json::parse("[1,0]"));
  CHECK(j["lambda"] == Json::parse("[-1,1]"));
  CHECK(j["D"] == 1.0);
  CHECK(j["m"] == 1.0);
  CHECK(j["margins"]["condition_ii"] == 1.0);
}

TEST_CASE("operator tables") {
  std::istringstream in("x0,x1,y0,y1\n# comment\n1,0,0,1\n\n0,1,-1,0\n");
  const auto rows = read_operator_table(in, 2, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].first == Eigen::Vector2d(0.0, 1.0));
  CHECK(rows[1].second == Eigen::Vector2d(-1.0, 0.0));

  std::istringstream short_row("1,0,0\n");
  CHECK_THROWS_AS(read_operator_table(short_row, 2, 2), Error);
  std::istringstream late_text("1,0,0,1\na,b,c,d\n");
  CHECK_THROWS_AS(read_operator_table(late_text, 2, 2), Error);
}

TEST_CASE("points") {
  const auto p = point_from_json(Json::parse("[1.5, -2]"), NormKind::Ell1);
  CHECK(p.dim() == 2);
  CHECK(p.norm == NormKind::Ell1);
  CHECK(p.coords(1) == -2.0);
}
