#include "isoperturb/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "isoperturb/error.hpp"
#include "isoperturb/parallel.hpp"
#include "isoperturb/random.hpp"
#include "isoperturb/serialization.hpp"
#include "isoperturb/verify.hpp"

namespace isoperturb {

namespace {

// Raised for malformed configuration; maps to kExitConfig.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Defaults of every RunConfig field; a --config file and then the flags are
// merged over this.
Json default_config() {
  return Json{
      {"subcommand", ""},
      {"seed", 1},
      {"jobs", 1},
      {"output_path", ""},
      {"output_format", "json"},
      {"deterministic", false},
      {"bound",
       {{"phi", {{"kind", "affine"}, {"M", 1.0}, {"L", 1.0}}},
        {"d", Json::array()},
        {"d_min", 1.0},
        {"d_max", 1e9},
        {"d_count", 19},
        {"n_max", 64},
        {"verify_halving", true}}},
      {"simulate",
       {{"map", {{"kind", "vestfrid_1d"}, {"eps", 0.1}}},
        {"phi", nullptr},
        {"pairs", 1000},
        {"radius", 100.0},
        {"norm", "sup"}}},
      {"recover",
       {{"map", nullptr}, {"table", ""}, {"nX", 0}, {"nY", 0}, {"M", 1.0}, {"L", 0.0}, {"samples", 1000}}},
      {"keps", {{"eps", {0.01, 0.05, 0.1, 0.15, 0.19}}, {"knots", 8}, {"budget", 5000}}},
      {"verify-suite", {{"only", ""}}},
  };
}

// Recursive merge: objects merge key by key, everything else is replaced.
void merge(Json& into, const Json& from) {
  if (!into.is_object() || !from.is_object()) {
    into = from;
    return;
  }
  for (const auto& [key, value] : from.items()) {
    if (into.contains(key) && into[key].is_object() && value.is_object())
      merge(into[key], value);
    else
      into[key] = value;
  }
}

// Inline JSON, or @path to read it from a file.
Json parse_json_argument(const std::string& text) {
  try {
    if (!text.empty() && text.front() == '@') {
      std::ifstream file(text.substr(1));
      if (!file) throw ConfigError("cannot open " + text.substr(1));
      return Json::parse(file);
    }
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T field(const Json& section, const char* key) {
  try {
    return section.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream out;
  out << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

struct Report {
  Json json = Json::object();
  std::string csv;
};

Json envelope(const Json& config) {
  Json j{{"subcommand", config["subcommand"]}, {"config", config}};
  if (!config["deterministic"].get<bool>()) j["generated_at"] = timestamp();
  return j;
}

std::vector<double> d_grid(const Json& section) {
  auto ds = field<std::vector<double>>(section, "d");
  if (!ds.empty()) return ds;
  const auto count = field<std::size_t>(section, "d_count");
  const double lo = field<double>(section, "d_min");
  const double hi = field<double>(section, "d_max");
  if (count == 1) return {lo};
  return geometric_grid(lo, hi, count);
}

Report run_bound(const Json& config) {
  const auto& section = config["bound"];
  const auto phi = perturbation_from_json(section["phi"]);
  const auto n_max = field<int>(section, "n_max");
  if (field<bool>(section, "verify_halving")) {
    const auto halving = check_halving(phi, default_check_grid());
    if (!halving.ok)
      throw Error(Errc::HalvingViolated, "phi(t)/2 > phi(t/2) at t = " + csv_number(halving.first_violation.value_or(0.0)));
  }
  const auto ds = d_grid(section);
  std::vector<MidpointBoundReport> reports(ds.size());
  parallel_for(ds.size(), config["jobs"].get<unsigned>(),
               [&](std::size_t i) { reports[i] = optimize_bound(phi, ds[i], n_max); });

  Report report;
  report.json = envelope(config);
  report.json["phi"] = to_json(phi);
  Json rows = Json::array();
  for (const auto& r : reports) rows.push_back(to_json(r));
  report.json["rows"] = rows;

  std::ostringstream csv;
  csv << "d,n_star,k,bound,method";
  if (!reports.empty())
    for (const auto& [name, value] : reports.front().corollary_values) csv << ',' << name;
  csv << '\n';
  for (const auto& r : reports) {
    csv << csv_number(r.d) << ',' << r.n_star << ',' << csv_number(r.k) << ',' << csv_number(r.bound) << ','
        << to_string(r.method);
    for (const auto& [name, value] : r.corollary_values) csv << ',' << csv_number(value);
    csv << '\n';
  }
  report.csv = csv.str();
  return report;
}

Report run_simulate(const Json& config, int& status) {
  const auto& section = config["simulate"];
  const auto map = map_from_json(section["map"]);
  const auto phi = section["phi"].is_null() ? PerturbationFunction::affine(map.claimed_M, map.claimed_L)
                                            : perturbation_from_json(section["phi"]);
  const auto kind = norm_kind_from_string(field<std::string>(section, "norm"));
  auto rng = Rng::stream(config["seed"].get<std::uint64_t>(), 0);
  const auto pairs = random_pairs(map.dim(), kind, field<double>(section, "radius"),
                                  field<std::size_t>(section, "pairs"), rng);
  const auto check = check_against_bound(map, phi, pairs, config["jobs"].get<unsigned>());
  bool negative = false;
  for (const auto& row : check.rows) negative = negative || row.margin < 0.0;
  status = negative ? kExitFailure : kExitOk;

  Report report;
  report.json = envelope(config);
  report.json["map"] = to_json(map);
  report.json["phi"] = to_json(phi);
  report.json["violations"] = check.violations;
  report.json["min_margin"] = number_or_overflow(check.rows.empty() ? 0.0 : check.min_margin);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "pair_id,d,deviation,bound,margin\n";
  for (const auto& row : check.rows) {
    rows.push_back(Json{{"pair_id", row.pair_id},
                        {"d", number_or_overflow(row.d)},
                        {"deviation", number_or_overflow(row.deviation)},
                        {"bound", number_or_overflow(row.bound)},
                        {"margin", number_or_overflow(row.margin)}});
    csv << row.pair_id << ',' << csv_number(row.d) << ',' << csv_number(row.deviation) << ','
        << csv_number(row.bound) << ',' << csv_number(row.margin) << '\n';
  }
  report.json["rows"] = rows;
  report.csv = csv.str();
  return report;
}

OperatorOracle oracle_from_config(const Json& section) {
  if (!section["map"].is_null()) return oracle_from_map(map_from_json(section["map"]));
  const auto path = field<std::string>(section, "table");
  if (path.empty()) throw ConfigError("recover needs either a map or a table");
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open " + path);
  const auto nX = field<Eigen::Index>(section, "nX");
  const auto nY = field<Eigen::Index>(section, "nY");
  if (nX <= 0 || nY <= 0) throw ConfigError("a table needs positive nX and nY");
  return oracle_from_table(read_operator_table(file, nX, nY), field<double>(section, "M"),
                           field<double>(section, "L"));
}

Report run_recover(const Json& config) {
  const auto& section = config["recover"];
  const auto T = oracle_from_config(section);
  const auto recovery = recover(T);

  auto rng = Rng::stream(config["seed"].get<std::uint64_t>(), 0);
  std::vector<Eigen::VectorXd> samples(field<std::size_t>(section, "samples"), Eigen::VectorXd(T.nX));
  for (auto& f : samples)
    for (auto& v : f) v = rng.uniform(-1.0, 1.0);
  Json stability = nullptr;
  try {
    const auto s = stability_report(T, recovery.isometry, samples);
    stability = Json{{"sup_excess", number_or_overflow(s.sup_excess)},
                     {"delta_hat", number_or_overflow(s.delta_hat)},
                     {"max_ratio", number_or_overflow(s.max_ratio)},
                     {"pass", s.pass},
                     {"samples", samples.size()}};
  } catch (const Error& e) {
    if (e.code() != Errc::NotTabulated) throw;
    stability = Json{{"skipped", "samples are not in the table"}};
  }

  Report report;
  report.json = envelope(config);
  report.json["recovery"] = to_json(recovery);
  report.json["stability"] = stability;
  std::ostringstream csv;
  csv << "x,sigma,lambda\n";
  for (std::size_t x = 0; x < recovery.isometry.sigma.size(); ++x)
    csv << x << ',' << recovery.isometry.sigma[x] << ',' << recovery.isometry.lambda[x] << '\n';
  report.csv = csv.str();
  return report;
}

Report run_keps(const Json& config) {
  const auto& section = config["keps"];
  const auto eps_list = field<std::vector<double>>(section, "eps");
  const auto knots = field<int>(section, "knots");
  const auto budget = field<std::uint64_t>(section, "budget");
  const auto seed = config["seed"].get<std::uint64_t>();
  const KepsSearchOptions options{500, config["jobs"].get<unsigned>()};

  Report report;
  report.json = envelope(config);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "eps,vestfrid_ratio,best_found,cor33_bound\n";
  for (const double eps : eps_list) {
    const auto bounds = upper_bounds(eps);
    const auto best = search_lower_bound(eps, knots, budget, seed, options);
    rows.push_back(Json{{"eps", eps},
                        {"vestfrid_ratio", vestfrid_ratio(eps)},
                        {"best_found", number_or_overflow(best.ratio)},
                        {"cor33_bound", bounds.cor33},
                        {"instance", to_json(best)}});
    csv << csv_number(eps) << ',' << csv_number(vestfrid_ratio(eps)) << ',' << csv_number(best.ratio) << ','
        << csv_number(bounds.cor33) << '\n';
  }
  // Coordinatewise sup-norm maps cannot beat the best one-dimensional ratio.
  report.json["search_space"] = "piecewise-linear maps on R";
  report.json["rows"] = rows;
  report.csv = csv.str();
  return report;
}

Report run_verify_suite(const Json& config, int& status, std::ostream& err) {
  SuiteOptions options;
  options.seed = config["seed"].get<std::uint64_t>();
  options.jobs = config["jobs"].get<unsigned>();
  options.only = field<std::string>(config["verify-suite"], "only");
  if (!options.only.empty()) {
    bool known = false;
    for (const auto& g : suite_groups()) known = known || g == options.only;
    for (int id = 1; id <= 10; ++id) known = known || std::to_string(id) == options.only;
    if (!known) throw ConfigError("unknown --only value '" + options.only + "'");
  }
  const auto results = run_acceptance_suite(options);
  bool all = true;
  Report report;
  report.json = envelope(config);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "id,group,name,pass,detail\n";
  for (const auto& r : results) {
    all = all && r.pass;
    err << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << "): " << r.detail << '\n';
    Json row{{"id", r.id}, {"group", r.group}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}};
    if (!config["deterministic"].get<bool>()) row["seconds"] = r.seconds;
    rows.push_back(row);
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    csv << r.id << ',' << r.group << ',' << r.name << ',' << (r.pass ? "pass" : "fail") << ',' << detail << '\n';
  }
  report.json["criteria"] = rows;
  report.json["pass"] = all;
  report.csv = csv.str();
  status = all ? kExitOk : kExitFailure;
  return report;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::HalvingViolated:
    case Errc::ModulusMismatch:
    case Errc::HypothesisFailed:
    case Errc::EpsVanishes:
      return kExitHypothesis;
    case Errc::MTooLarge:
      return kExitMTooLarge;
    case Errc::NotSingleValued:
    case Errc::NotBijective:
    case Errc::EmptyForBothSigns:
    case Errc::ConditionIIViolated:
    case Errc::CardinalityMismatch:
    case Errc::NotTabulated:
      return kExitRecovery;
    case Errc::NegativeInput:
    case Errc::NonFinite:
    case Errc::InvalidArgument:
    case Errc::OutOfRange:
    case Errc::DimensionMismatch:
    case Errc::IndexOutOfRange:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Midpoint bounds and isometry recovery for perturbed isometries", "isoperturb"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out_path;
  std::string format;
  bool deterministic = false;
  auto* o_config = app.add_option("--config", config_path, "RunConfig JSON file");
  auto* o_seed = app.add_option("--seed", seed, "64-bit seed");
  auto* o_jobs = app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* o_out = app.add_option("--out", out_path, "output file (default: stdout)");
  auto* o_format = app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  auto* o_det = app.add_flag("--deterministic", deterministic, "omit timestamps");

  // Subcommand flags land in the config overlay only when given.
  Json overlay = Json::object();
  std::vector<std::function<void()>> collect;
  const auto json_opt = [&](CLI::App* sub, const std::string& flag, const std::string& section, const char* key,
                            const std::string& help) {
    auto text = std::make_shared<std::string>();
    auto* opt = sub->add_option(flag, *text, help + " (inline JSON or @file)");
    collect.push_back([&overlay, opt, text, section, key] {
      if (opt->count() > 0) overlay[section][key] = parse_json_argument(*text);
    });
  };
  const auto value_opt = [&]<typename T>(CLI::App* sub, const std::string& flag, const std::string& section,
                                         const char* key, const std::string& help, T*) {
    auto value = std::make_shared<T>();
    auto* opt = sub->add_option(flag, *value, help);
    collect.push_back([&overlay, opt, value, section, key] {
      if (opt->count() > 0) overlay[section][key] = *value;
    });
  };

  auto* bound = app.add_subcommand("bound", "optimized midpoint bound over a d grid");
  json_opt(bound, "--phi", "bound", "phi", "perturbation function");
  value_opt(bound, "--d", "bound", "d", "explicit distances", static_cast<std::vector<double>*>(nullptr));
  value_opt(bound, "--d-min", "bound", "d_min", "smallest d", static_cast<double*>(nullptr));
  value_opt(bound, "--d-max", "bound", "d_max", "largest d", static_cast<double*>(nullptr));
  value_opt(bound, "--d-count", "bound", "d_count", "geometric grid size", static_cast<std::size_t*>(nullptr));
  value_opt(bound, "--n-max", "bound", "n_max", "deepest dyadic level", static_cast<int*>(nullptr));
  value_opt(bound, "--verify-halving", "bound", "verify_halving", "check the halving property",
            static_cast<bool*>(nullptr));

  auto* simulate = app.add_subcommand("simulate", "per-pair margins of a simulated map");
  json_opt(simulate, "--map", "simulate", "map", "map spec");
  json_opt(simulate, "--phi", "simulate", "phi", "dominating perturbation (default: the map's claim)");
  value_opt(simulate, "--pairs", "simulate", "pairs", "number of random pairs", static_cast<std::size_t*>(nullptr));
  value_opt(simulate, "--radius", "simulate", "radius", "sampling box half-width", static_cast<double*>(nullptr));
  value_opt(simulate, "--norm", "simulate", "norm", "sup, euclid or ell1", static_cast<std::string*>(nullptr));

  auto* recover_cmd = app.add_subcommand("recover", "recover the signed permutation behind an operator");
  json_opt(recover_cmd, "--map", "recover", "map", "analytic operator");
  value_opt(recover_cmd, "--table", "recover", "table", "CSV of input/output rows",
            static_cast<std::string*>(nullptr));
  value_opt(recover_cmd, "--nx", "recover", "nX", "input dimension of the table", static_cast<Eigen::Index*>(nullptr));
  value_opt(recover_cmd, "--ny", "recover", "nY", "output dimension of the table", static_cast<Eigen::Index*>(nullptr));
  value_opt(recover_cmd, "--M", "recover", "M", "claimed multiplicative constant", static_cast<double*>(nullptr));
  value_opt(recover_cmd, "--L", "recover", "L", "claimed additive constant", static_cast<double*>(nullptr));
  value_opt(recover_cmd, "--samples", "recover", "samples", "stability samples", static_cast<std::size_t*>(nullptr));

  auto* keps = app.add_subcommand("keps", "lower-bound search for the midpoint constant");
  value_opt(keps, "--eps", "keps", "eps", "eps values in (0, 0.2)", static_cast<std::vector<double>*>(nullptr));
  value_opt(keps, "--knots", "keps", "knots", "breakpoints per map", static_cast<int*>(nullptr));
  value_opt(keps, "--budget", "keps", "budget", "candidate evaluations", static_cast<std::uint64_t*>(nullptr));

  auto* verify = app.add_subcommand("verify-suite", "run the acceptance criteria");
  value_opt(verify, "--only", "verify-suite", "only", "group name or criterion id",
            static_cast<std::string*>(nullptr));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  Json config = default_config();
  try {
    if (o_config->count() > 0) {
      std::ifstream file(config_path);
      if (!file) throw ConfigError("cannot open " + config_path);
      Json loaded;
      try {
        loaded = Json::parse(file);
      } catch (const Json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
      }
      if (!loaded.is_object()) throw ConfigError("config must be a JSON object");
      merge(config, loaded);
    }
    for (const auto& c : collect) c();
    merge(config, overlay);
    if (o_seed->count() > 0) config["seed"] = seed;
    if (o_jobs->count() > 0) config["jobs"] = jobs;
    if (o_out->count() > 0) config["output_path"] = out_path;
    if (o_format->count() > 0) config["output_format"] = format;
    if (o_det->count() > 0) config["deterministic"] = deterministic;
    config["subcommand"] = app.get_subcommands().front()->get_name();

    for (const char* key : {"seed", "jobs"})
      if (!config[key].is_number_integer() || config[key].get<std::int64_t>() < 0) throw ConfigError(std::string(key) + " must be a non-negative integer");
    if (config["jobs"].get<unsigned>() == 0) throw ConfigError("jobs must be positive");
    const auto fmt = field<std::string>(config, "output_format");
    if (fmt != "json" && fmt != "csv") throw ConfigError("output_format must be json or csv");
    if (!config["deterministic"].is_boolean()) throw ConfigError("deterministic must be a boolean");
    field<std::string>(config, "output_path");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  int status = kExitOk;
  Report report;
  const auto& name = config["subcommand"].get_ref<const std::string&>();
  try {
    if (name == "bound")
      report = run_bound(config);
    else if (name == "simulate")
      report = run_simulate(config, status);
    else if (name == "recover")
      report = run_recover(config);
    else if (name == "keps")
      report = run_keps(config);
    else
      report = run_verify_suite(config, status, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string body = config["output_format"] == "csv" ? report.csv : report.json.dump(2) + "\n";
  const auto path = config["output_path"].get<std::string>();
  if (path.empty()) {
    out << body;
  } else {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
      err << "config error: cannot write " << path << '\n';
      return kExitConfig;
    }
    file << body;
  }
  return status;
}

}  // namespace isoperturb
