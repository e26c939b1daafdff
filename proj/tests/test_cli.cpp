#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "isoperturb/cli.hpp"
#include "isoperturb/serialization.hpp"

using namespace isoperturb;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "isoperturb_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("bound: Hyers-Ulam row") {
  const auto r = run({"bound", "--phi", R"({"kind":"affine","M":1,"L":1})", "--d", "1024", "--deterministic"});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK_FALSE(j.contains("generated_at"));
  CHECK(j["rows"][0]["bound"].get<double>() <= 63.0);
  CHECK(j["rows"][0]["corollary_values"]["hyers_ulam"] == 63.0);
}

TEST_CASE("bound: identity over a grid reaches d / 2^65") {
  const auto r = run({"bound", "--phi", R"({"kind":"identity"})", "--d-min", "1", "--d-max", "1e6", "--d-count", "4",
                      "--format", "csv", "--deterministic"});
  REQUIRE(r.code == kExitOk);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].rfind("d,n_star,k,bound,method", 0) == 0);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string d, n, k, bound;
    std::getline(row, d, ',');
    std::getline(row, n, ',');
    std::getline(row, k, ',');
    std::getline(row, bound, ',');
    CHECK(n == "64");
    CHECK(std::stod(bound) == std::ldexp(std::stod(d), -65));
  }
}

TEST_CASE("bound: halving violation exits 3") {
  const auto r = run({"bound", "--phi", R"({"kind":"tabulated","knots":[[0,0],[1,1],[2,10]]})", "--d", "4"});
  CHECK(r.code == kExitHypothesis);
  CHECK(r.err.find("HalvingViolated") != std::string::npos);
}

TEST_CASE("simulate: Vestfrid sweep has no negative margin") {
  const auto r = run({"simulate", "--map", R"({"kind":"vestfrid_1d","eps":0.1})", "--pairs", "300", "--seed", "1",
                      "--format", "csv"});
  CHECK(r.code == kExitOk);
  const auto lines = csv_lines(r.out);
  CHECK(lines.front() == "pair_id,d,deviation,bound,margin");
  CHECK(lines.size() == 301);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].find(",-") == std::string::npos);
}

TEST_CASE("simulate: empty pair list") {
  const auto r = run({"simulate", "--pairs", "0", "--format", "csv"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "pair_id,d,deviation,bound,margin\n");
}

TEST_CASE("simulate: mismatched phi exits 3") {
  const auto r = run({"simulate", "--map", R"({"kind":"vestfrid_1d","eps":0.1})", "--phi",
                      R"({"kind":"affine","M":1.01,"L":0})"});
  CHECK(r.code == kExitHypothesis);
}

TEST_CASE("simulate: an understated claim yields a nonzero exit") {
  // The map stretches by 1.1 but claims to be an isometry, so the identity
  // passes the modulus check while its bound (zero) fails.
  const auto r = run({"simulate", "--map", R"({"kind":"vestfrid_1d","eps":0.1,"claimed_M":1})", "--phi",
                      R"({"kind":"identity"})", "--pairs", "50", "--format", "csv"});
  CHECK(r.code == kExitFailure);
  CHECK(r.out.find(",-") != std::string::npos);
}

TEST_CASE("recover: signed permutation") {
  const auto r = run({"recover", "--map", R"({"kind":"signed_permutation","sigma":[2,0,1],"lambda":[1,-1,1]})",
                      "--samples", "50", "--deterministic"});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["recovery"]["sigma"] == Json::parse("[2,0,1]"));
  CHECK(j["recovery"]["lambda"] == Json::parse("[1,-1,1]"));
  CHECK(j["stability"]["pass"] == true);
}

TEST_CASE("recover: claimed M above the limit exits 4") {
  const auto r = run({"recover", "--map",
                      R"({"kind":"signed_permutation","sigma":[0,1],"lambda":[1,1],"claimed_M":1.04})"});
  CHECK(r.code == kExitMTooLarge);
}

TEST_CASE("recover: degenerate table exits 5") {
  const auto path = scratch("doubled.csv");
  write_file(path, "x0,x1,y0,y1\n1,0,1,1\n-1,0,-1,-1\n0,1,1,1\n0,-1,-1,-1\n");
  const auto r = run({"recover", "--table", path.string(), "--nx", "2", "--ny", "2"});
  CHECK(r.code == kExitRecovery);
  CHECK(r.err.find("NotSingleValued") != std::string::npos);
}

TEST_CASE("recover: tabulated permutation") {
  const auto path = scratch("perm.csv");
  write_file(path, "1,0,0,-1\n-1,0,0,1\n0,1,1,0\n0,-1,-1,0\n");
  const auto r = run({"recover", "--table", path.string(), "--nx", "2", "--ny", "2", "--deterministic"});
  REQUIRE(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["recovery"]["sigma"] == Json::parse("[1,0]"));
  CHECK(j["recovery"]["lambda"] == Json::parse("[-1,1]"));
}

TEST_CASE("keps: CSV columns") {
  const auto r = run({"keps", "--eps", "0.1", "0.05", "--budget", "500", "--format", "csv"});
  REQUIRE(r.code == kExitOk);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "eps,vestfrid_ratio,best_found,cor33_bound");
  CHECK(lines[1].rfind("0.10000000000000001,0.47727272727272", 0) == 0);
  const auto j = run({"keps", "--eps", "0.1", "--budget", "0"});
  CHECK(Json::parse(j.out)["search_space"] == "piecewise-linear maps on R");
}

TEST_CASE("verify-suite subset and bad filters") {
  const auto r = run({"verify-suite", "--only", "bounds", "--deterministic"});
  CHECK(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["criteria"].size() == 3);
  CHECK(j["pass"] == true);
  CHECK(run({"verify-suite", "--only", "nonsense"}).code == kExitConfig);
}

TEST_CASE("config files and overrides") {
  const auto path = scratch("config.json");
  write_file(path, R"({"subcommand":"bound","deterministic":true,
                       "bound":{"phi":{"kind":"affine","M":1.1,"L":0},"d":[100]}})");
  const auto from_file = run({"--config", path.string(), "bound"});
  REQUIRE(from_file.code == kExitOk);
  CHECK(Json::parse(from_file.out)["rows"][0]["bound"].get<double>() <= 30.0);

  const auto overridden = run({"--config", path.string(), "bound", "--d", "1024", "--phi",
                               R"({"kind":"affine","M":1,"L":1})"});
  REQUIRE(overridden.code == kExitOk);
  CHECK(Json::parse(overridden.out)["rows"][0]["d"] == 1024.0);

  const auto broken = scratch("broken.json");
  write_file(broken, "{\"bound\": ");
  CHECK(run({"--config", broken.string(), "verify-suite"}).code == kExitConfig);
  CHECK(run({"--config", scratch("missing.json").string(), "bound"}).code == kExitConfig);
  CHECK(run({"bound", "--phi", "{not json"}).code == kExitConfig);
  CHECK(run({"bound", "--phi", R"({"kind":"affine","M":-1,"L":0})"}).code == kExitConfig);
  CHECK(run({"bogus"}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
}

TEST_CASE("deterministic runs are byte-identical") {
  const std::vector<std::string> args{"simulate", "--map",
                                      R"({"kind":"noisy_isometry","base":{"sigma":[1,0],"lambda":[1,-1]},"amplitude":0.3,"seed":4})",
                                      "--pairs", "100", "--seed", "9", "--deterministic", "--jobs", "2"};
  const auto a = run(args);
  const auto b = run(args);
  CHECK(a.code == kExitOk);
  CHECK(a.out == b.out);
  auto single = args;
  single.back() = "1";
  CHECK(run(single).out.size() == a.out.size());
  CHECK(Json::parse(run(single).out)["rows"] == Json::parse(a.out)["rows"]);
  CHECK(Json::parse(run({"bound", "--d", "5"}).out).contains("generated_at"));
}

TEST_CASE("--out writes the report to a file") {
  const auto path = scratch("out.csv");
  std::filesystem::remove(path);
  const auto r = run({"keps", "--eps", "0.1", "--budget", "0", "--format", "csv", "--out", path.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.empty());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "eps,vestfrid_ratio,best_found,cor33_bound");
}
