#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isoperturb/perturb.hpp"

namespace isoperturb {

enum class BoundMethod { ExactIterate, AffineClosedForm, ExpMajorant, IntegralMajorant, Trivial };

std::string_view to_string(BoundMethod method) noexcept;

struct MidpointBoundReport {
  double d = 0.0;
  int n_star = 0;
  // 2^{n_star + 1}; held as a double since depth 64 gives 2^65.
  double k = 2.0;
  double bound = 0.0;
  BoundMethod method = BoundMethod::Trivial;
  std::map<std::string, double> corollary_values;
  // Depths whose exact iterate hit the composition cap; a majorant was used.
  std::vector<int> capped_depths;
  // Best candidate per depth 0..n_max (+inf where nothing was computable).
  std::vector<double> profile;
};

// phi^{o (2^{n+1} - 1)}(d / 2^{n+1}). Capped or overflowing iterates come
// back as +inf. With verify_halving set, throws HalvingViolated when the
// hypothesis fails on the default grid.
double theorem_bound(const PerturbationFunction& phi, double d, int n, bool verify_halving = false,
                     const IterateLimits& limits = {});

// phi(d/2): the depth-0 bound.
double trivial_bound(const PerturbationFunction& phi, double d);

// Exhaustive scan of theorem_bound over n = 0..n_max.
MidpointBoundReport optimize_bound(const PerturbationFunction& phi, double d, int n_max = 64,
                                   const IterateLimits& limits = {});

struct DyadicBound {
  double bound = 0.0;
  int n = 0;
};

// L-isometry bound at depth max(0, floor(log2 sqrt d) - 1).
DyadicBound hyers_ulam_bound(double L, double d);

// (2 + L) sqrt(d) + (1 + L), valid for d >= 1.
double hyers_ulam_majorant(double L, double d);

// 3 eps d + 4 L / eps for eps < 0.2, else (1 + eps) d / 2 + L / 2.
double bilip_bound(double eps, double L, double d);

// e^{eps k} d / k + (e^{eps k} - 1) L / eps; dominates phi^{o k}(d/k) for
// phi(t) = (1 + eps) t + L.
double exp_majorant(double eps, double L, double d, double k);

// Dyadic k = 2^{n+1} within [1/(sqrt2 eps), sqrt2/eps]. eps in (0, 0.2).
std::uint64_t dyadic_k_for_eps(double eps);

// Midpoint bound for (1 + eps)-bi-Lipschitz maps between xiE/xiF-dense sets.
double net_bound(double eps, double xiE, double xiF, double d);

struct PowerAlphaBound {
  double bound = 0.0;
  double k = 2.0;
};

// Minimises ((d/k)^{1-alpha} + c (1-alpha) k)^{1/(1-alpha)} over dyadic
// k = 2, 4, ..., 2^65; majorises phi^{o k}(d/k) for phi(t) = t + c t^alpha.
PowerAlphaBound power_alpha_bound(double alpha, double d, double c = 1.0);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace isoperturb
