#include "isoperturb/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "isoperturb/error.hpp"
#include "isoperturb/quadrature.hpp"

namespace isoperturb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_nonneg_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw Error(Errc::NonFinite, std::string(what) + " is not finite");
  if (value < 0.0) throw Error(Errc::NegativeInput, std::string(what) + " is negative");
}

double eval_tabulated(const Tabulated& tab, double t) {
  const auto& k = tab.knots;
  if (k.size() == 1) return std::max(0.0, k.front().second + (t - k.front().first));
  if (t <= k.front().first) {
    const double slope = (k[1].second - k[0].second) / (k[1].first - k[0].first);
    return std::max(0.0, k[0].second - slope * (k[0].first - t));
  }
  if (t >= k.back().first) {
    const auto& p = k[k.size() - 2];
    const auto& q = k.back();
    const double slope = std::max(1.0, (q.second - p.second) / (q.first - p.first));
    return q.second + slope * (t - q.first);
  }
  const auto it = std::upper_bound(k.begin(), k.end(), t,
                                   [](double v, const auto& knot) { return v < knot.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.first) / (hi.first - lo.first);
  return lo.second + w * (hi.second - lo.second);
}

// M^count t + L (M^count - 1)/(M - 1), written with expm1/log1p so that M
// close to 1 does not cancel.
double affine_closed_form(const Affine& a, double count, double t) {
  if (count == 0.0) return t;
  if (a.M == 1.0) return t + count * a.L;
  const double log_growth = count * std::log1p(a.M - 1.0);
  const double power = std::exp(log_growth);
  const double geometric = std::expm1(log_growth) / (a.M - 1.0);
  return power * t + a.L * geometric;
}

}  // namespace

PerturbationFunction PerturbationFunction::identity() { return PerturbationFunction(Identity{}); }

PerturbationFunction PerturbationFunction::affine(double M, double L) {
  if (!std::isfinite(M) || !std::isfinite(L) || M < 0.0 || L < 0.0)
    throw Error(Errc::InvalidArgument, "affine phi needs finite M >= 0 and L >= 0");
  return PerturbationFunction(Affine{M, L});
}

PerturbationFunction PerturbationFunction::additive_power(double alpha, double c) {
  if (!(alpha >= 0.0 && alpha < 1.0) || !(c > 0.0) || !std::isfinite(c))
    throw Error(Errc::InvalidArgument, "additive power phi needs alpha in [0,1) and c > 0");
  return PerturbationFunction(AdditivePower{alpha, c});
}

PerturbationFunction PerturbationFunction::tabulated(std::vector<std::pair<double, double>> knots) {
  if (knots.empty()) throw Error(Errc::InvalidArgument, "tabulated phi needs at least one knot");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const auto [t, v] = knots[i];
    if (!std::isfinite(t) || !std::isfinite(v) || t < 0.0 || v < 0.0)
      throw Error(Errc::InvalidArgument, "tabulated knots must be finite and nonnegative");
    if (i > 0 && !(t > knots[i - 1].first))
      throw Error(Errc::InvalidArgument, "tabulated knot abscissae must increase strictly");
    if (i > 0 && v < knots[i - 1].second)
      throw Error(Errc::InvalidArgument, "tabulated phi must be non-decreasing");
  }
  return PerturbationFunction(Tabulated{std::move(knots)});
}

std::string_view PerturbationFunction::kind_name() const noexcept {
  return std::visit(Overloaded{[](const Identity&) { return std::string_view("identity"); },
                               [](const Affine&) { return std::string_view("affine"); },
                               [](const AdditivePower&) { return std::string_view("additive_power"); },
                               [](const Tabulated&) { return std::string_view("tabulated"); }},
                    kind_);
}

double PerturbationFunction::operator()(double t) const noexcept {
  return std::visit(Overloaded{[t](const Identity&) { return t; },
                               [t](const Affine& a) { return a.M * t + a.L; },
                               [t](const AdditivePower& p) { return t + p.c * std::pow(t, p.alpha); },
                               [t](const Tabulated& tab) { return eval_tabulated(tab, t); }},
                    kind_);
}

bool PerturbationFunction::has_closed_form_iterate() const noexcept {
  return std::holds_alternative<Identity>(kind_) || std::holds_alternative<Affine>(kind_);
}

double eval(const PerturbationFunction& phi, double t) {
  require_nonneg_finite(t, "t");
  return phi(t);
}

IterateOutcome try_iterate(const PerturbationFunction& phi, double count, double t,
                           const IterateLimits& limits) {
  require_nonneg_finite(t, "t");
  if (!(count >= 0.0) || count != std::floor(count))
    throw Error(Errc::InvalidArgument, "composition count must be a nonnegative integer");

  const auto finish = [&](double value) {
    if (!std::isfinite(value) || value > limits.ceiling)
      return IterateOutcome{IterateStatus::Overflow, std::numeric_limits<double>::infinity()};
    return IterateOutcome{IterateStatus::Ok, value};
  };

  if (phi.as<Identity>()) return finish(t);
  if (const auto* a = phi.as<Affine>()) return finish(affine_closed_form(*a, count, t));

  if (count > static_cast<double>(limits.cap))
    return {IterateStatus::CapExceeded, std::numeric_limits<double>::infinity()};
  const auto steps = static_cast<std::uint64_t>(count);
  double value = t;
  for (std::uint64_t i = 0; i < steps; ++i) {
    value = phi(value);
    if (!std::isfinite(value) || value > limits.ceiling) return finish(value);
  }
  return finish(value);
}

double iterate(const PerturbationFunction& phi, std::uint64_t m, double t,
               const IterateLimits& limits) {
  const auto outcome = try_iterate(phi, static_cast<double>(m), t, limits);
  switch (outcome.status) {
    case IterateStatus::Ok: return outcome.value;
    case IterateStatus::Overflow:
      throw Error(Errc::PositiveOverflow, "iterate exceeded ceiling " + std::to_string(limits.ceiling));
    case IterateStatus::CapExceeded:
      throw Error(Errc::CapExceeded, "iterate needs " + std::to_string(m) + " compositions, cap is " +
                                         std::to_string(limits.cap));
  }
  return outcome.value;
}

double iterate_by_composition(const PerturbationFunction& phi, std::uint64_t m, double t) {
  require_nonneg_finite(t, "t");
  double value = t;
  for (std::uint64_t i = 0; i < m; ++i) value = phi(value);
  return value;
}

HalvingCheck check_halving(const PerturbationFunction& phi, const std::vector<double>& grid,
                           double rel_tol) {
  if (grid.empty()) throw Error(Errc::InvalidArgument, "halving grid is empty");
  for (const double t : grid) {
    require_nonneg_finite(t, "grid point");
    const double half_value = 0.5 * phi(t);
    if (half_value > phi(0.5 * t) + rel_tol * half_value) return {false, t};
  }
  return {};
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count == 0)
    throw Error(Errc::InvalidArgument, "geometric grid needs 0 < lo <= hi and count > 0");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  grid.back() = hi;
  return grid;
}

const std::vector<double>& default_check_grid() {
  static const std::vector<double> grid = [] {
    auto g = geometric_grid(1e-6, 1e9, 601);
    g.insert(g.begin(), 0.0);
    return g;
  }();
  return grid;
}

IntegralCheck integral_bound_check(const PerturbationFunction& phi, double t, std::uint64_t n,
                                   double abs_tol) {
  require_nonneg_finite(t, "t");
  if (!(t > 0.0)) throw Error(Errc::InvalidArgument, "integral check needs t > 0");
  if (n == 0) throw Error(Errc::InvalidArgument, "integral check needs n >= 1");

  // The orbit t, phi(t), ..., phi^{o n}(t) doubles as the breakpoint list.
  std::vector<double> breaks{t};
  breaks.reserve(n + 1);
  for (std::uint64_t k = 0; k < n; ++k) {
    const double next = phi(breaks.back());
    if (!std::isfinite(next) || next > IterateLimits{}.ceiling)
      throw Error(Errc::PositiveOverflow, "orbit of t exceeded the ceiling");
    if (!(next > breaks.back()))
      throw Error(Errc::EpsVanishes, "phi(x) - x <= 0 at x = " + std::to_string(breaks.back()));
    breaks.push_back(next);
  }
  const double upper = breaks.back();

  const auto eps = [&phi](double x) { return phi(x) - x; };
  std::vector<double> probes = breaks;
  if (const auto* tab = phi.as<Tabulated>()) {
    for (const auto& [kt, kv] : tab->knots)
      if (kt > t && kt < upper) probes.push_back(kt);
  }
  constexpr int kProbeCount = 1024;
  for (int i = 1; i < kProbeCount; ++i) probes.push_back(t + (upper - t) * i / kProbeCount);
  for (const double x : probes) {
    if (!(eps(x) > 0.0)) throw Error(Errc::EpsVanishes, "phi(x) - x <= 0 at x = " + std::to_string(x));
  }

  if (const auto* tab = phi.as<Tabulated>()) {
    for (const auto& [kt, kv] : tab->knots)
      if (kt > t && kt < upper) breaks.push_back(kt);
    std::sort(breaks.begin(), breaks.end());
  }

  const auto quad = integrate_adaptive([&eps](double x) { return 1.0 / eps(x); }, breaks, abs_tol);
  IntegralCheck check;
  check.integral = quad.value;
  check.error_estimate = quad.error;
  check.upper_limit = upper;
  check.bound = static_cast<double>(n);
  check.pass = quad.value <= check.bound + 1e-6;
  return check;
}

}  // namespace isoperturb
