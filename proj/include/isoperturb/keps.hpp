#pragma once

#include <cstdint>
#include <vector>

namespace isoperturb {

// Piecewise-linear bijection of R: breakpoints b_1 < ... < b_K and slopes
// s_0..s_K (s_i on the interval right of b_i), anchored at f(b_1) = 0. All
// slopes lie in [1/(1+eps), 1+eps], so f is a (1+eps)t-isometry.
struct PiecewiseLinearMap {
  std::vector<double> breakpoints;
  std::vector<double> slopes;

  double operator()(double x) const;
};

struct KepsInstance {
  double eps = 0.0;
  PiecewiseLinearMap map;
  double a = 0.0;
  double b = 0.0;
  double ratio = 0.0;  // deviation / (eps |a - b|) at (a, b)
};

// (2 + eps) / (4 (1 + eps)): the ratio of the two-slope example at (-x, x).
double vestfrid_ratio(double eps);

// |f((a+b)/2) - (f(a)+f(b))/2| / (eps |b - a|)
double midpoint_ratio(const PiecewiseLinearMap& f, double eps, double a, double b);

// Best ratio over the breakpoint lattice (plus two far sentinels), pairing
// lattice points directly and reflecting one through another.
KepsInstance best_lattice_pair(const PiecewiseLinearMap& f, double eps);

struct KepsSearchOptions {
  std::uint64_t steps_per_restart = 500;
  unsigned jobs = 1;
};

// Random-restart hill climbing over breakpoints and slopes. Restart 0 starts
// from the Vestfrid shape, so the result never falls below vestfrid_ratio.
// budget counts candidate evaluations; budget 0 returns the seed instance.
KepsInstance search_lower_bound(double eps, int knots, std::uint64_t budget, std::uint64_t seed,
                                const KepsSearchOptions& options = {});

struct KepsUpperBounds {
  double cor33 = 3.0;
  double asymptotic_liminf = 0.0;  // e, a reference for eps -> 0 only
};

// Throws OutOfRange outside (0, 0.2).
KepsUpperBounds upper_bounds(double eps);

}  // namespace isoperturb
