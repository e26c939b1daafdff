#include "isoperturb/bounds.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "isoperturb/error.hpp"

namespace isoperturb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive_distance(double d) {
  if (!std::isfinite(d)) throw Error(Errc::NonFinite, "distance is not finite");
  if (!(d > 0.0)) throw Error(Errc::InvalidArgument, "distance must be positive");
}

void require_bilip_eps(double eps) {
  if (!(eps > 0.0) || !(eps < 0.2))
    throw Error(Errc::OutOfRange, "eps must lie in (0, 0.2), got " + std::to_string(eps));
}

// Smallest affine (1 + eps) t + L dominating a tabulated phi on all of R+.
Affine tabulated_affine_majorant(const Tabulated& tab) {
  const auto& k = tab.knots;
  double slope = 1.0;
  for (std::size_t i = 1; i < k.size(); ++i)
    slope = std::max(slope, (k[i].second - k[i - 1].second) / (k[i].first - k[i - 1].first));
  const auto phi = PerturbationFunction::tabulated(k);
  double offset = phi(0.0);
  for (const auto& [t, v] : k) offset = std::max(offset, v - slope * t);
  return {slope, std::max(0.0, offset)};
}

struct Candidate {
  double value = kInf;
  BoundMethod method = BoundMethod::ExactIterate;
};

Candidate depth_candidate(const PerturbationFunction& phi, double d, int n,
                          const IterateLimits& limits, bool& capped) {
  const double k = std::ldexp(1.0, n + 1);
  const auto outcome = try_iterate(phi, k - 1.0, d / k, limits);
  capped = outcome.status == IterateStatus::CapExceeded;
  if (outcome.ok()) {
    const auto method = phi.as<Affine>() ? BoundMethod::AffineClosedForm : BoundMethod::ExactIterate;
    return {outcome.value, method};
  }
  if (!capped) return {};
  // phi^{o(k-1)}(d/k) <= g^{o k}(d/k) for any non-decreasing g >= phi.
  if (const auto* p = phi.as<AdditivePower>()) {
    const double a = p->alpha;
    const double value = std::pow(std::pow(d / k, 1.0 - a) + p->c * (1.0 - a) * k, 1.0 / (1.0 - a));
    return {value, BoundMethod::IntegralMajorant};
  }
  if (const auto* tab = phi.as<Tabulated>()) {
    const auto g = tabulated_affine_majorant(*tab);
    const double eps = g.M - 1.0;
    const double value = eps > 0.0 ? exp_majorant(eps, g.L, d, k) : d / k + k * g.L;
    return {value, BoundMethod::ExpMajorant};
  }
  return {};
}

}  // namespace

std::string_view to_string(BoundMethod method) noexcept {
  switch (method) {
    case BoundMethod::ExactIterate: return "exact-iterate";
    case BoundMethod::AffineClosedForm: return "affine-closed-form";
    case BoundMethod::ExpMajorant: return "exp-majorant";
    case BoundMethod::IntegralMajorant: return "integral-majorant";
    case BoundMethod::Trivial: return "trivial";
  }
  return "unknown";
}

double theorem_bound(const PerturbationFunction& phi, double d, int n, bool verify_halving,
                     const IterateLimits& limits) {
  require_positive_distance(d);
  if (n < 0) throw Error(Errc::InvalidArgument, "depth must be nonnegative");
  if (verify_halving) {
    const auto check = check_halving(phi, default_check_grid());
    if (!check.ok)
      throw Error(Errc::HalvingViolated, "phi(t)/2 > phi(t/2) at t = " + std::to_string(*check.first_violation));
  }
  const double k = std::ldexp(1.0, n + 1);
  const auto outcome = try_iterate(phi, k - 1.0, d / k, limits);
  return outcome.ok() ? outcome.value : kInf;
}

double trivial_bound(const PerturbationFunction& phi, double d) {
  require_positive_distance(d);
  return phi(0.5 * d);
}

MidpointBoundReport optimize_bound(const PerturbationFunction& phi, double d, int n_max,
                                   const IterateLimits& limits) {
  require_positive_distance(d);
  if (n_max < 0) throw Error(Errc::InvalidArgument, "n_max must be nonnegative");

  MidpointBoundReport report;
  report.d = d;
  report.bound = kInf;
  report.profile.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    bool capped = false;
    const auto candidate = depth_candidate(phi, d, n, limits, capped);
    if (capped) report.capped_depths.push_back(n);
    report.profile.push_back(candidate.value);
    if (candidate.value < report.bound) {
      report.bound = candidate.value;
      report.n_star = n;
      report.method = candidate.method;
    }
  }
  report.k = std::ldexp(1.0, report.n_star + 1);
  if (report.n_star == 0) report.method = BoundMethod::Trivial;

  auto& cv = report.corollary_values;
  cv["trivial"] = trivial_bound(phi, d);
  if (const auto* a = phi.as<Affine>()) {
    if (a->M == 1.0) {
      cv["hyers_ulam"] = hyers_ulam_bound(a->L, d).bound;
      cv["hyers_ulam_majorant"] = hyers_ulam_majorant(a->L, d);
    } else if (a->M > 1.0) {
      const double eps = a->M - 1.0;
      cv["bilip"] = bilip_bound(eps, a->L, d);
      if (eps < 0.2) cv["exp_majorant"] = exp_majorant(eps, a->L, d, static_cast<double>(dyadic_k_for_eps(eps)));
    }
  } else if (const auto* p = phi.as<AdditivePower>()) {
    cv["power_alpha"] = power_alpha_bound(p->alpha, d, p->c).bound;
  }
  return report;
}

DyadicBound hyers_ulam_bound(double L, double d) {
  require_positive_distance(d);
  if (!(L >= 0.0)) throw Error(Errc::InvalidArgument, "L must be nonnegative");
  // ilogb is floor(log2 x) exactly for normal x.
  const int n = std::max(0, std::ilogb(std::sqrt(d)) - 1);
  const double k = std::ldexp(1.0, n + 1);
  return {d / k + (k - 1.0) * L, n};
}

double hyers_ulam_majorant(double L, double d) { return (2.0 + L) * std::sqrt(d) + (1.0 + L); }

double bilip_bound(double eps, double L, double d) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be positive");
  if (eps < 0.2) return 3.0 * eps * d + 4.0 * L / eps;
  return 0.5 * (1.0 + eps) * d + 0.5 * L;
}

double exp_majorant(double eps, double L, double d, double k) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be positive");
  if (!(k >= 1.0)) throw Error(Errc::InvalidArgument, "k must be >= 1");
  const double growth = std::exp(eps * k);
  return growth * d / k + std::expm1(eps * k) * L / eps;
}

std::uint64_t dyadic_k_for_eps(double eps) {
  require_bilip_eps(eps);
  const double center = std::log2(1.0 / eps);
  const int lo = static_cast<int>(std::ceil(center - 1.5));
  const int hi = static_cast<int>(std::floor(center - 0.5));
  int best = std::max(lo, 0);
  double best_gap = kInf;
  for (int n = std::max(lo, 0); n <= hi; ++n) {
    const double gap = std::abs(std::ldexp(1.0, n + 1) - 1.0 / eps);
    if (gap < best_gap) {
      best_gap = gap;
      best = n;
    }
  }
  return std::uint64_t{1} << (best + 1);
}

double net_bound(double eps, double xiE, double xiF, double d) {
  require_bilip_eps(eps);
  return 3.0 * eps * d + 34.0 * (xiE + xiF) / eps;
}

PowerAlphaBound power_alpha_bound(double alpha, double d, double c) {
  require_positive_distance(d);
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in [0, 1)");
  if (!(c > 0.0)) throw Error(Errc::InvalidArgument, "c must be positive");
  const double q = 1.0 - alpha;
  PowerAlphaBound best{kInf, 2.0};
  for (int j = 1; j <= 65; ++j) {
    const double k = std::ldexp(1.0, j);
    const double value = std::pow(std::pow(d / k, q) + c * q * k, 1.0 / q);
    if (value < best.bound) best = {value, k};
  }
  return best;
}

double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw Error(Errc::InvalidArgument, "slope fit needs two or more matching samples");
  const auto rows = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd design(rows, 2);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = std::log(xs[static_cast<std::size_t>(i)]);
    rhs(i) = std::log(ys[static_cast<std::size_t>(i)]);
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
  return coef(1);
}

}  // namespace isoperturb
