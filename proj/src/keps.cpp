#include "isoperturb/keps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "isoperturb/error.hpp"
#include "isoperturb/parallel.hpp"
#include "isoperturb/random.hpp"

namespace isoperturb {

namespace {

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < 0.2)) throw Error(Errc::OutOfRange, "eps must lie in (0, 0.2), got " + std::to_string(eps));
}

PiecewiseLinearMap vestfrid_shape(double eps, int knots) {
  PiecewiseLinearMap f;
  for (int i = 0; i < knots; ++i) f.breakpoints.push_back(knots == 1 ? 0.0 : -1.0 + 2.0 * i / (knots - 1));
  f.slopes.assign(static_cast<std::size_t>(knots) + 1, 1.0 + eps);
  f.slopes.front() = 1.0 / (1.0 + eps);
  return f;
}

PiecewiseLinearMap random_shape(double eps, int knots, Rng& rng) {
  PiecewiseLinearMap f;
  for (int i = 0; i < knots; ++i) f.breakpoints.push_back(rng.uniform(-1.0, 1.0));
  std::sort(f.breakpoints.begin(), f.breakpoints.end());
  const double lo = 1.0 / (1.0 + eps);
  const double hi = 1.0 + eps;
  for (int i = 0; i <= knots; ++i) {
    const double u = rng.uniform();
    f.slopes.push_back(u < 0.35 ? lo : (u < 0.7 ? hi : rng.uniform(lo, hi)));
  }
  return f;
}

// Box-Muller; only reproducibility matters here, not tail quality.
double gaussian(Rng& rng) {
  const double u = std::max(rng.uniform(), 1e-300);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * rng.uniform());
}

PiecewiseLinearMap mutate(const PiecewiseLinearMap& f, double eps, Rng& rng) {
  PiecewiseLinearMap g = f;
  const double lo = 1.0 / (1.0 + eps);
  const double hi = 1.0 + eps;
  const auto knots = static_cast<std::int64_t>(g.breakpoints.size());
  if (rng.uniform() < 0.5) {
    auto& b = g.breakpoints[static_cast<std::size_t>(rng.integer(0, knots - 1))];
    b += 0.1 * gaussian(rng);
    std::sort(g.breakpoints.begin(), g.breakpoints.end());
    // Keep breakpoints distinct so the lattice stays well defined.
    for (std::size_t i = 1; i < g.breakpoints.size(); ++i)
      g.breakpoints[i] = std::max(g.breakpoints[i], g.breakpoints[i - 1] + 1e-9);
  } else {
    auto& s = g.slopes[static_cast<std::size_t>(rng.integer(0, knots))];
    const double u = rng.uniform();
    if (u < 0.25) s = lo;
    else if (u < 0.5) s = hi;
    else s = std::clamp(s + 0.25 * eps * gaussian(rng), lo, hi);
  }
  return g;
}

KepsInstance climb(double eps, PiecewiseLinearMap start, std::uint64_t steps, Rng& rng) {
  auto best = best_lattice_pair(start, eps);
  for (std::uint64_t i = 0; i < steps; ++i) {
    auto candidate = best_lattice_pair(mutate(best.map, eps, rng), eps);
    if (candidate.ratio > best.ratio) best = std::move(candidate);
  }
  return best;
}

}  // namespace

double PiecewiseLinearMap::operator()(double x) const {
  const double origin = breakpoints.front();
  if (x <= origin) return slopes.front() * (x - origin);
  double value = 0.0;
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    const double right = i + 1 < breakpoints.size() ? breakpoints[i + 1] : x;
    if (x <= right) return value + slopes[i + 1] * (x - breakpoints[i]);
    value += slopes[i + 1] * (right - breakpoints[i]);
  }
  return value;
}

double vestfrid_ratio(double eps) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be positive");
  return (2.0 + eps) / (4.0 * (1.0 + eps));
}

double midpoint_ratio(const PiecewiseLinearMap& f, double eps, double a, double b) {
  const double deviation = std::abs(f(0.5 * (a + b)) - 0.5 * (f(a) + f(b)));
  return deviation / (eps * std::abs(b - a));
}

KepsInstance best_lattice_pair(const PiecewiseLinearMap& f, double eps) {
  if (f.breakpoints.empty() || f.slopes.size() != f.breakpoints.size() + 1)
    throw Error(Errc::InvalidArgument, "piecewise-linear map needs K breakpoints and K+1 slopes");
  const double span = f.breakpoints.back() - f.breakpoints.front();
  const double reach = 1e3 * (span + 1.0);
  std::vector<double> lattice = f.breakpoints;
  lattice.push_back(f.breakpoints.front() - reach);
  lattice.push_back(f.breakpoints.back() + reach);
  std::sort(lattice.begin(), lattice.end());

  KepsInstance best;
  best.eps = eps;
  best.map = f;
  best.ratio = -1.0;
  const auto consider = [&](double a, double b) {
    if (a == b) return;
    const double r = midpoint_ratio(f, eps, a, b);
    if (r > best.ratio) {
      best.ratio = r;
      best.a = std::min(a, b);
      best.b = std::max(a, b);
    }
  };
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    for (std::size_t j = 0; j < lattice.size(); ++j) {
      if (i < j) consider(lattice[i], lattice[j]);
      if (i != j) consider(lattice[i], 2.0 * lattice[j] - lattice[i]);
    }
  }
  best.ratio = std::max(best.ratio, 0.0);
  return best;
}

KepsInstance search_lower_bound(double eps, int knots, std::uint64_t budget, std::uint64_t seed,
                                const KepsSearchOptions& options) {
  require_eps(eps);
  if (knots < 1) throw Error(Errc::InvalidArgument, "knots must be >= 1");
  const auto seed_shape = vestfrid_shape(eps, knots);
  if (budget == 0) return best_lattice_pair(seed_shape, eps);

  const std::uint64_t per_restart = std::max<std::uint64_t>(1, options.steps_per_restart);
  const std::uint64_t restarts = (budget + per_restart - 1) / per_restart;
  std::vector<KepsInstance> results(restarts);
  parallel_for(restarts, options.jobs, [&](std::size_t r) {
    auto rng = Rng::stream(seed, r);
    const std::uint64_t steps = std::min(per_restart, budget - r * per_restart);
    auto start = r == 0 ? seed_shape : random_shape(eps, knots, rng);
    results[r] = climb(eps, std::move(start), steps, rng);
  });
  std::size_t winner = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].ratio > results[winner].ratio) winner = r;
  return results[winner];
}

KepsUpperBounds upper_bounds(double eps) {
  require_eps(eps);
  return {3.0, std::numbers::e};
}

}  // namespace isoperturb
