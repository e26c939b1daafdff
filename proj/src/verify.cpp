#include "isoperturb/verify.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>

#include "isoperturb/banach_stone.hpp"
#include "isoperturb/bounds.hpp"
#include "isoperturb/error.hpp"
#include "isoperturb/keps.hpp"
#include "isoperturb/parallel.hpp"
#include "isoperturb/perturb.hpp"
#include "isoperturb/random.hpp"
#include "isoperturb/spaces.hpp"

namespace isoperturb {

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "FAILED " << what << "; ";
    }
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

// 1. Midpoint bound soundness on generated phi-isometries.
void theorem_soundness(Outcome& out, const SuiteOptions& opt) {
  constexpr std::size_t kMaps = 50;
  constexpr std::size_t kPairs = 1000;
  const NormKind norms[] = {NormKind::Sup, NormKind::Euclid, NormKind::Ell1};
  std::vector<std::size_t> violations(kMaps, 0);
  std::vector<double> min_margin(kMaps, 0.0);
  std::vector<std::string> errors(kMaps);
  parallel_for(kMaps, opt.jobs, [&](std::size_t i) {
    auto rng = Rng::stream(opt.seed, 100 + i);
    MapSpec map;
    switch (i % 3) {
      case 0: map = MapSpec::vestfrid_1d(rng.uniform(0.01, 0.19)); break;
      case 1: {
        Eigen::VectorXd eps(rng.integer(1, 8));
        for (auto& e : eps) e = rng.uniform(0.0, 0.19);
        map = MapSpec::coordinatewise_vestfrid(eps);
        break;
      }
      default: {
        const auto dim = rng.integer(1, 8);
        map = MapSpec::noisy_isometry(random_signed_permutation(dim, rng), rng.uniform(0.01, 0.5), rng.bits());
      }
    }
    const NormKind kind = map.dim() == 1 ? NormKind::Sup : norms[(i / 3) % 3];
    const double radius = std::pow(10.0, rng.uniform(0.0, 4.0));
    const auto pairs = random_pairs(map.dim(), kind, radius, kPairs, rng);
    try {
      const auto report =
          check_against_bound(map, PerturbationFunction::affine(map.claimed_M, map.claimed_L), pairs);
      violations[i] = report.violations;
      min_margin[i] = report.min_margin;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::size_t total = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kMaps; ++i) {
    out.require(errors[i].empty(), "map " + std::to_string(i) + ": " + errors[i]);
    total += violations[i];
    worst = std::min(worst, min_margin[i]);
  }
  out.require(total == 0, std::to_string(total) + " violations");
  out.detail << kMaps << " maps x " << kPairs << " pairs, violations=" << total << ", min margin=" << fmt(worst);
}

// 2. L-isometry depth schedule and its sqrt(d) majorant.
void hyers_ulam(Outcome& out, const SuiteOptions&) {
  std::size_t checked = 0;
  for (const double L : {0.1, 1.0, 10.0}) {
    const auto phi = PerturbationFunction::affine(1.0, L);
    for (const double d : geometric_grid(1.0, 1e9, 91)) {
      const double bound = optimize_bound(phi, d).bound;
      out.require(bound <= hyers_ulam_majorant(L, d), "L=" + fmt(L) + " d=" + fmt(d) + " bound " + fmt(bound));
      ++checked;
    }
  }
  const auto scheduled = hyers_ulam_bound(1.0, 1024.0);
  out.require(scheduled.n == 4 && scheduled.bound == 63.0, "d=1024 L=1 schedule gave " + fmt(scheduled.bound));
  const double closed = theorem_bound(PerturbationFunction::affine(1.0, 1.0), 1024.0, 4);
  const double looped = iterate_by_composition(PerturbationFunction::affine(1.0, 1.0), 31, 32.0);
  out.require(std::abs(closed - looped) <= 1e-9 * std::abs(looped) && closed == 63.0,
              "closed form " + fmt(closed) + " vs loop " + fmt(looped));
  out.detail << checked << " (L, d) points below (2+L)sqrt(d)+(1+L); d=1024 L=1: n=" << scheduled.n
             << " bound=" << fmt(scheduled.bound) << " loop=" << fmt(looped);
}

// 3. Integral of 1/eps along n compositions is at most n.
void integral_lemma(Outcome& out, const SuiteOptions& opt) {
  auto rng = Rng::stream(opt.seed, 3);
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int draw = 0; draw < 100; ++draw) {
    PerturbationFunction phi;
    switch (draw % 3) {
      case 0: phi = PerturbationFunction::affine(rng.uniform(1.0, 1.2), rng.uniform(0.05, 5.0)); break;
      case 1: phi = PerturbationFunction::additive_power(rng.uniform(0.0, 0.9), rng.uniform(0.1, 3.0)); break;
      default: {
        std::vector<std::pair<double, double>> knots{{0.0, rng.uniform(0.1, 2.0)}};
        for (int k = 0; k < 6; ++k) {
          const double dt = rng.uniform(0.1, 5.0);
          knots.emplace_back(knots.back().first + dt, knots.back().second + dt * rng.uniform(1.0, 1.5));
        }
        phi = PerturbationFunction::tabulated(knots);
      }
    }
    const double t = rng.log_uniform(0.01, 100.0);
    const auto n = static_cast<std::uint64_t>(rng.integer(1, 50));
    const auto check = integral_bound_check(phi, t, n);
    out.require(check.pass, std::string(phi.kind_name()) + " t=" + fmt(t) + " n=" + std::to_string(n) +
                                " integral " + fmt(check.integral));
    worst_excess = std::max(worst_excess, check.integral - check.bound);
  }
  double worst_equality = 0.0;
  for (const double L : {0.1, 1.0, 2.0, 7.5}) {
    for (const std::uint64_t n : {1, 5, 17, 40}) {
      const auto check = integral_bound_check(PerturbationFunction::affine(1.0, L), 1.0 + L, n);
      worst_equality = std::max(worst_equality, std::abs(check.integral - static_cast<double>(n)));
    }
  }
  out.require(worst_equality <= 1e-6, "constant-eps equality off by " + fmt(worst_equality));
  out.detail << "100 draws, max(integral - n)=" << fmt(worst_excess)
             << "; constant-eps |integral - n| max=" << fmt(worst_equality);
}

// 4. Bi-Lipschitz bound 3 eps d + 4L/eps and the eps = 0.1 depth-2 value.
void bilipschitz(Outcome& out, const SuiteOptions&) {
  std::size_t checked = 0;
  double worst_ratio = 0.0;
  for (int step = 1; step <= 39; ++step) {
    const double eps = 0.005 * step;
    for (const double L : {0.0, 1.0, 10.0}) {
      const auto phi = PerturbationFunction::affine(1.0 + eps, L);
      for (const double d : geometric_grid(1.0, 1e6, 25)) {
        const double bound = optimize_bound(phi, d).bound;
        const double majorant = 3.0 * eps * d + 4.0 * L / eps;
        out.require(bound <= majorant, "eps=" + fmt(eps) + " L=" + fmt(L) + " d=" + fmt(d));
        worst_ratio = std::max(worst_ratio, bound / majorant);
        ++checked;
      }
    }
  }
  const double depth2 = theorem_bound(PerturbationFunction::affine(1.1, 0.0), 100.0, 2);
  const double expected = std::pow(1.1, 7) * 12.5;
  out.require(std::abs(depth2 - expected) <= 1e-6 && std::abs(depth2 - 24.3589638) <= 1e-6,
              "depth-2 candidate " + fmt(depth2));
  out.require(depth2 < 30.0, "depth-2 candidate not below 30");
  out.detail << checked << " grid points, max bound/(3 eps d + 4L/eps)=" << fmt(worst_ratio)
             << "; eps=0.1 d=100 n=2 -> " << fmt(depth2);
}

// 5. Vestfrid ratio, its eps -> 0 limit, and the searched ratios.
void vestfrid(Outcome& out, const SuiteOptions& opt) {
  const auto measured = [](double eps, double x) {
    const auto map = MapSpec::vestfrid_1d(eps);
    return midpoint_deviation(map, make_point({-x}), make_point({x})) / (eps * 2.0 * x);
  };
  const double r = measured(0.1, 3.0);
  out.require(std::abs(r - (2.1 / 4.4)) <= 1e-9 && std::abs(r - 0.4772727) <= 1e-7, "ratio at eps=0.1 is " + fmt(r));

  const double eps_list[] = {0.1, 0.05, 0.01, 0.001};
  Eigen::MatrixXd design(4, 3);
  Eigen::VectorXd ratios(4);
  for (int i = 0; i < 4; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = eps_list[i];
    design(i, 2) = eps_list[i] * eps_list[i];
    ratios(i) = measured(eps_list[i], 1.0);
  }
  const double limit = design.colPivHouseholderQr().solve(ratios)(0);
  out.require(std::abs(limit - 0.5) <= 1e-3, "eps->0 extrapolation " + fmt(limit));
  out.require(std::abs(ratios(3) - 0.5) <= 1e-3, "ratio at eps=0.001 " + fmt(ratios(3)));

  double best = 0.0;
  for (const double eps : {0.01, 0.05, 0.1, 0.15, 0.19}) {
    const auto found = search_lower_bound(eps, 8, 5000, opt.seed, {500, opt.jobs});
    out.require(found.ratio <= 3.0 + 1e-9, "search exceeded 3 at eps=" + fmt(eps));
    out.require(found.ratio >= vestfrid_ratio(eps) - 1e-9, "search fell below Vestfrid at eps=" + fmt(eps));
    best = std::max(best, found.ratio);
  }
  out.detail << "ratio(0.1)=" << fmt(r) << ", extrapolated limit=" << fmt(limit) << ", max searched=" << fmt(best);
}

MapSpec signed_permutation_map(const SignedPermutation& p) { return MapSpec::signed_permutation(p.sigma, p.lambda); }

struct RecoveryInstance {
  SignedPermutation truth;
  MapSpec map;
  double M = 1.0;
};

RecoveryInstance make_recovery_instance(Rng& rng, Eigen::Index n) {
  RecoveryInstance inst;
  inst.M = 1.0 + rng.uniform(0.0, 0.03);
  Eigen::VectorXd eps(n);
  for (auto& e : eps) e = rng.uniform(0.0, inst.M - 1.0);
  eps(rng.integer(0, n - 1)) = inst.M - 1.0;
  inst.truth = random_signed_permutation(n, rng);
  inst.map = MapSpec::composite({MapSpec::coordinatewise_vestfrid(eps),
                                 MapSpec::signed_permutation(inst.truth.sigma, inst.truth.lambda)});
  return inst;
}

std::vector<Eigen::VectorXd> random_functions(Rng& rng, Eigen::Index n, std::size_t count) {
  std::vector<Eigen::VectorXd> fs(count, Eigen::VectorXd(n));
  for (auto& f : fs) {
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (auto& v : f) v = scale * rng.uniform(-1.0, 1.0);
  }
  return fs;
}

// 6 and 7 share the instance family.
void recovery_family(Outcome& six, Outcome& seven, const SuiteOptions& opt) {
  constexpr std::size_t kInstances = 200;
  const Eigen::Index sizes[] = {2, 4, 8, 16, 32, 64};
  std::vector<int> exact(kInstances, 0);
  std::vector<double> ratio_excess(kInstances, 0.0);
  std::vector<std::size_t> sign_failures(kInstances, 0);
  std::vector<std::size_t> sign_checked(kInstances, 0);
  std::vector<double> modulus_worst(kInstances, -1.0);
  std::vector<std::string> errors(kInstances);
  parallel_for(kInstances, opt.jobs, [&](std::size_t i) {
    auto rng = Rng::stream(opt.seed, 600 + i);
    const auto inst = make_recovery_instance(rng, sizes[i % 6]);
    const auto T = oracle_from_map(inst.map);
    try {
      const auto rec = recover(T);
      exact[i] = rec.isometry.sigma == inst.truth.sigma && rec.isometry.lambda == inst.truth.lambda;
      const auto fs = random_functions(rng, T.nX, 1000);
      const auto stab = stability_report(T, rec.isometry, fs);
      ratio_excess[i] = stab.max_ratio - 76.0 * (inst.M - 1.0);
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& f : fs) {
        for (const auto& e : sign_check(T, rec.isometry, f)) {
          if (!e.qualifies) continue;
          ++sign_checked[i];
          if (!e.pass) ++sign_failures[i];
        }
        worst = std::max(worst, modulus_check(T, rec.isometry, f));
      }
      modulus_worst[i] = worst;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  int recovered = 0;
  double worst_ratio = -std::numeric_limits<double>::infinity();
  double worst_modulus = -std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < kInstances; ++i) {
    six.require(errors[i].empty(), "instance " + std::to_string(i) + ": " + errors[i]);
    recovered += exact[i];
    worst_ratio = std::max(worst_ratio, ratio_excess[i]);
    worst_modulus = std::max(worst_modulus, modulus_worst[i]);
    checked += sign_checked[i];
    failures += sign_failures[i];
  }
  six.require(recovered == static_cast<int>(kInstances), std::to_string(recovered) + "/200 exact");
  six.require(worst_ratio <= 1e-9, "stability ratio exceeds 76(M-1) by " + fmt(worst_ratio));
  six.detail << recovered << "/" << kInstances << " exact recoveries; max(||Tf-If||/||f|| - 76(M-1))="
             << fmt(worst_ratio);
  seven.require(failures == 0 && checked > 0, std::to_string(failures) + " sign failures");
  seven.require(worst_modulus <= 1e-9, "modulus excess " + fmt(worst_modulus));
  seven.detail << checked << " qualifying coordinates, sign failures=" << failures
               << "; max modulus excess=" << fmt(worst_modulus);
}

// 8. Condition (ii) margin equals 16 - 15 M^2 and vanishes at sqrt(16/15).
void margin_identity(Outcome& out, const SuiteOptions&) {
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double M = 1.0 + 0.1 * i / 1000.0;
    worst = std::max(worst, std::abs(condition_ii_margin(M) - (16.0 - 15.0 * M * M)));
  }
  out.require(worst <= 1e-12, "identity off by " + fmt(worst));
  double lo = 1.0;
  double hi = 1.1;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (condition_ii_margin(mid) > 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  out.require(std::abs(root - std::sqrt(16.0 / 15.0)) <= 1e-9, "zero crossing at " + fmt(root));
  out.require(std::abs(recovery_m_limit() - root) <= 1e-9, "recovery limit disagrees with the root");
  out.detail << "max |margin - (16 - 15M^2)|=" << fmt(worst) << ", zero at M=" << fmt(root);
}

// 9. Surjection repair displacement certificate.
void bijection_repair(Outcome& out, const SuiteOptions& opt) {
  constexpr double kDelta0 = 0.5;
  int accepted = 0;
  int attempts = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  while (accepted < 50 && attempts < 500) {
    auto rng = Rng::stream(opt.seed, 900 + static_cast<std::uint64_t>(attempts++));
    const auto dim = rng.integer(1, 2);
    const auto n = static_cast<std::size_t>(rng.integer(20, 100));
    std::vector<SpacePoint> domain;
    while (domain.size() < n) {
      SpacePoint p{Eigen::VectorXd(dim), NormKind::Sup};
      for (auto& c : p.coords) c = rng.uniform(-5.0, 5.0);
      domain.push_back(p);
      if (domain.size() < n && rng.uniform() < 0.3) {
        SpacePoint q = p;
        for (auto& c : q.coords) c += rng.uniform(-0.05, 0.05);
        domain.push_back(q);
      }
    }
    Eigen::VectorXd eps(dim);
    for (auto& e : eps) e = rng.uniform(0.0, 0.05);
    const auto base = MapSpec::composite(
        {MapSpec::coordinatewise_vestfrid(eps), signed_permutation_map(random_signed_permutation(dim, rng))});
    std::vector<SpacePoint> codomain;
    for (const auto& p : domain) codomain.push_back(apply(base, p));
    // Collapse each point onto an earlier neighbour closer than 0.1.
    std::vector<std::size_t> image(n);
    bool collapsed = false;
    for (std::size_t i = 0; i < n; ++i) {
      image[i] = i;
      for (std::size_t j = 0; j < i; ++j) {
        if (image[j] == j && distance(domain[i], domain[j]) < 0.1) {
          image[i] = j;
          collapsed = true;
          break;
        }
      }
    }
    if (!collapsed || !(sampled_eps(domain, codomain, image, kDelta0) < kDelta0)) continue;
    ++accepted;
    try {
      const auto repair = repair_to_bijection(domain, codomain, image, kDelta0);
      // Recompute the certificate from scratch.
      double eps_hat = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double dx = distance(domain[i], domain[j]);
          const double dt = distance(codomain[image[i]], codomain[image[j]]);
          if (dx <= kDelta0 || dt <= kDelta0) eps_hat = std::max(eps_hat, std::abs(dt - dx));
        }
      const double bound = 2.0 * kDelta0 + 2.0 * eps_hat;
      std::vector<bool> hit(n, false);
      bool bijective = true;
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = repair.bijection[i];
        bijective = bijective && y < n && !hit[y];
        if (y < n) hit[y] = true;
        if (y < n) worst_slack = std::min(worst_slack, bound - distance(codomain[image[i]], codomain[y]));
      }
      for (const auto net_point : repair.net)
        out.require(repair.bijection[net_point] == image[net_point], "repair moved a net point");
      out.require(bijective, "repair is not a bijection");
    } catch (const Error& e) {
      out.require(false, std::string("instance failed: ") + e.what());
    }
  }
  out.require(accepted == 50, "only " + std::to_string(accepted) + " admissible instances");
  out.require(worst_slack >= -1e-12, "displacement exceeds 2 delta0 + 2 eps by " + fmt(-worst_slack));
  out.detail << accepted << " instances, min certificate slack=" << fmt(worst_slack);
}

// 10. Growth exponent 1/(2 - alpha) of the power-perturbation bound.
void power_alpha(Outcome& out, const SuiteOptions&) {
  const auto ds = geometric_grid(1e3, 1e9, 61);
  for (const double alpha : {0.0, 0.25, 0.5, 0.75}) {
    std::vector<double> bounds;
    for (const double d : ds) bounds.push_back(power_alpha_bound(alpha, d).bound);
    const double slope = loglog_slope(ds, bounds);
    const double target = 1.0 / (2.0 - alpha);
    out.require(std::abs(slope - target) <= 0.05, "alpha=" + fmt(alpha) + " slope " + fmt(slope));
    out.detail << "alpha=" << alpha << ": slope " << fmt(slope) << " vs " << fmt(target) << "; ";
  }
}

struct Criterion {
  int id;
  const char* name;
  const char* group;
};

constexpr Criterion kCriteria[] = {
    {1, "midpoint bound soundness", "spaces"},
    {2, "Hyers-Ulam sqrt(d) bound", "bounds"},
    {3, "integral of 1/eps along compositions", "perturb"},
    {4, "bi-Lipschitz 3 eps d + 4L/eps bound", "bounds"},
    {5, "Vestfrid ratio and K bracket", "keps"},
    {6, "signed permutation recovery and stability", "banach_stone"},
    {7, "sign agreement and modulus deviation", "banach_stone"},
    {8, "condition (ii) margin identity", "banach_stone"},
    {9, "surjection repair certificate", "spaces"},
    {10, "alpha-power growth exponent", "bounds"},
};

}  // namespace

const std::vector<std::string>& suite_groups() {
  static const std::vector<std::string> groups{"perturb", "bounds", "spaces", "banach_stone", "keps"};
  return groups;
}

std::vector<CriterionResult> run_acceptance_suite(const SuiteOptions& options) {
  const auto selected = [&](const Criterion& c) {
    return options.only.empty() || options.only == c.group || options.only == std::to_string(c.id);
  };
  std::vector<Outcome> outcomes(std::size(kCriteria));
  std::vector<double> seconds(std::size(kCriteria), 0.0);
  const auto timed = [&](std::size_t index, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      outcomes[index].require(false, std::string("exception: ") + e.what());
    }
    seconds[index] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const std::function<void(Outcome&, const SuiteOptions&)> single[] = {
      theorem_soundness, hyers_ulam, integral_lemma, bilipschitz, vestfrid, nullptr, nullptr, margin_identity,
      bijection_repair, power_alpha};

  std::vector<CriterionResult> results;
  for (std::size_t i = 0; i < std::size(kCriteria); ++i) {
    if (!selected(kCriteria[i])) continue;
    if (kCriteria[i].id == 6 || kCriteria[i].id == 7) {
      // One sweep feeds both; run it once when either is selected.
      if (kCriteria[i].id == 7 && selected(kCriteria[5])) continue;
      timed(i, [&] { recovery_family(outcomes[5], outcomes[6], options); });
    } else {
      timed(i, [&] { single[i](outcomes[i], options); });
    }
  }
  for (std::size_t i = 0; i < std::size(kCriteria); ++i) {
    if (!selected(kCriteria[i])) continue;
    results.push_back({kCriteria[i].id, kCriteria[i].name, kCriteria[i].group, outcomes[i].pass,
                       outcomes[i].detail.str(), seconds[i]});
  }
  return results;
}

}  // namespace isoperturb
