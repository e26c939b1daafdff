#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isoperturb/error.hpp"
#include "isoperturb/keps.hpp"
#include "isoperturb/random.hpp"

using namespace isoperturb;

namespace {

// Independent evaluation: integrate the slope field from the first breakpoint.
double integrate_slopes(const PiecewiseLinearMap& f, double x) {
  const auto& b = f.breakpoints;
  double value = 0.0;
  if (x < b.front()) return -f.slopes.front() * (b.front() - x);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double right = i + 1 < b.size() ? std::min(b[i + 1], x) : x;
    if (right <= b[i]) break;
    value += f.slopes[i + 1] * (right - b[i]);
  }
  return value;
}

double independent_ratio(const PiecewiseLinearMap& f, double eps, double a, double b) {
  const double mid = integrate_slopes(f, 0.5 * (a + b));
  const double dev = std::abs(mid - 0.5 * (integrate_slopes(f, a) + integrate_slopes(f, b)));
  return dev / (eps * std::abs(b - a));
}

}  // namespace

TEST_CASE("vestfrid_ratio examples") {
  CHECK(vestfrid_ratio(0.1) == doctest::Approx(2.1 / 4.4).epsilon(1e-15));
  CHECK(vestfrid_ratio(0.1) == doctest::Approx((1.1 - 1.0 / 1.1) / 2.0 / (0.1 * 2.0)).epsilon(1e-14));
  CHECK(vestfrid_ratio(1e-9) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(vestfrid_ratio(1.0) == doctest::Approx(0.375));
}

TEST_CASE("piecewise-linear evaluation") {
  const PiecewiseLinearMap f{{-1.0, 0.5, 2.0}, {0.5, 1.0, 2.0, 1.5}};
  CHECK(f(-1.0) == 0.0);
  CHECK(f(-3.0) == doctest::Approx(-1.0));
  CHECK(f(0.5) == doctest::Approx(1.5));
  CHECK(f(1.0) == doctest::Approx(2.5));
  CHECK(f(4.0) == doctest::Approx(1.5 + 3.0 + 3.0));
  auto rng = Rng::stream(51, 0);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-10.0, 10.0);
    CHECK(f(x) == doctest::Approx(integrate_slopes(f, x)).epsilon(1e-13));
  }
}

TEST_CASE("lattice search recovers the Vestfrid ratio") {
  const PiecewiseLinearMap v{{0.0}, {1.0 / 1.1, 1.1}};
  const auto best = best_lattice_pair(v, 0.1);
  CHECK(best.ratio == doctest::Approx(vestfrid_ratio(0.1)).epsilon(1e-12));
  CHECK(best.a == doctest::Approx(-best.b));
}

TEST_CASE("search_lower_bound examples") {
  const auto seed_only = search_lower_bound(0.1, 1, 0, 7);
  CHECK(seed_only.ratio == doctest::Approx(0.4772727272727).epsilon(1e-12));
  const auto found = search_lower_bound(0.1, 8, 20000, 7);
  CHECK(found.ratio >= vestfrid_ratio(0.1) - 1e-9);
  CHECK(found.ratio <= 3.0);
  CHECK_THROWS_AS(search_lower_bound(0.2, 4, 10, 1), Error);
  CHECK_THROWS_AS(search_lower_bound(0.0, 4, 10, 1), Error);
}

TEST_CASE("property: searched instances are admissible and their ratios reproduce") {
  auto rng = Rng::stream(52, 0);
  for (int draw = 0; draw < 20; ++draw) {
    const double eps = rng.uniform(0.005, 0.195);
    const int knots = static_cast<int>(rng.integer(1, 10));
    const auto inst = search_lower_bound(eps, knots, 1500, rng.bits(), {300, 1});
    const double lo = 1.0 / (1.0 + eps);
    const double hi = 1.0 + eps;
    for (const double s : inst.map.slopes) {
      CHECK(s >= lo);
      CHECK(s <= hi);
    }
    CHECK(std::is_sorted(inst.map.breakpoints.begin(), inst.map.breakpoints.end()));
    CHECK(independent_ratio(inst.map, eps, inst.a, inst.b) == doctest::Approx(inst.ratio).epsilon(1e-10));
    CHECK(inst.ratio >= vestfrid_ratio(eps) - 1e-9);
    CHECK(inst.ratio <= 3.0 + 1e-9);
  }
}

TEST_CASE("property: lattice maximum matches an exhaustive independent scan") {
  auto rng = Rng::stream(53, 0);
  for (int draw = 0; draw < 30; ++draw) {
    const double eps = rng.uniform(0.01, 0.19);
    PiecewiseLinearMap f;
    const int knots = static_cast<int>(rng.integer(1, 6));
    for (int i = 0; i < knots; ++i) f.breakpoints.push_back(rng.uniform(-2.0, 2.0));
    std::sort(f.breakpoints.begin(), f.breakpoints.end());
    for (int i = 0; i <= knots; ++i) f.slopes.push_back(rng.uniform(1.0 / (1.0 + eps), 1.0 + eps));
    const double reach = 1e3 * (f.breakpoints.back() - f.breakpoints.front() + 1.0);
    auto lattice = f.breakpoints;
    lattice.push_back(f.breakpoints.front() - reach);
    lattice.push_back(f.breakpoints.back() + reach);
    double best = 0.0;
    for (const double p : lattice)
      for (const double q : lattice) {
        if (p != q) best = std::max(best, independent_ratio(f, eps, p, q));
        if (p != q) best = std::max(best, independent_ratio(f, eps, p, 2.0 * q - p));
      }
    CHECK(best_lattice_pair(f, eps).ratio == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("search is reproducible and independent of the worker count") {
  const auto a = search_lower_bound(0.07, 6, 3000, 1234, {500, 1});
  const auto b = search_lower_bound(0.07, 6, 3000, 1234, {500, 3});
  CHECK(a.ratio == b.ratio);
  CHECK(a.a == b.a);
  CHECK(a.b == b.b);
  CHECK(a.map.breakpoints == b.map.breakpoints);
  CHECK(a.map.slopes == b.map.slopes);
}

TEST_CASE("upper_bounds examples") {
  CHECK(upper_bounds(0.1).cor33 == 3.0);
  CHECK(upper_bounds(0.1).asymptotic_liminf == doctest::Approx(std::numbers::e));
  CHECK(upper_bounds(0.19).asymptotic_liminf == doctest::Approx(2.718281828));
  try {
    upper_bounds(0.25);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OutOfRange);
  }
}
