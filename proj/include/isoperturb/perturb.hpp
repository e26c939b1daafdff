#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace isoperturb {

// Analytic families of the perturbation function phi: R+ -> R+.
struct Identity {};

// phi(t) = M t + L
struct Affine {
  double M = 1.0;
  double L = 0.0;
};

// phi(t) = t + c t^alpha, alpha in [0, 1)
struct AdditivePower {
  double alpha = 0.0;
  double c = 1.0;
};

// Piecewise-linear through (t, phi(t)) knots. Below the first knot the first
// segment's slope is used (clamped at zero); beyond the last knot the last
// segment's slope, floored at 1.
struct Tabulated {
  std::vector<std::pair<double, double>> knots;
};

class PerturbationFunction {
 public:
  using Kind = std::variant<Identity, Affine, AdditivePower, Tabulated>;

  PerturbationFunction() = default;

  static PerturbationFunction identity();
  static PerturbationFunction affine(double M, double L);
  static PerturbationFunction additive_power(double alpha, double c = 1.0);
  static PerturbationFunction tabulated(std::vector<std::pair<double, double>> knots);

  const Kind& kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept;

  template <class T>
  const T* as() const noexcept {
    return std::get_if<T>(&kind_);
  }

  // Unchecked evaluation; t must be finite and nonnegative.
  double operator()(double t) const noexcept;

  // Closed form for phi^{o m} exists (Identity, Affine).
  bool has_closed_form_iterate() const noexcept;

 private:
  explicit PerturbationFunction(Kind kind) : kind_(std::move(kind)) {}

  Kind kind_ = Identity{};
};

// Checked evaluation. Throws NegativeInput / NonFinite.
double eval(const PerturbationFunction& phi, double t);

struct IterateLimits {
  std::uint64_t cap = std::uint64_t{1} << 20;  // loop compositions allowed
  double ceiling = 1e300;
};

enum class IterateStatus { Ok, Overflow, CapExceeded };

struct IterateOutcome {
  IterateStatus status = IterateStatus::Ok;
  double value = 0.0;

  bool ok() const noexcept { return status == IterateStatus::Ok; }
};

// phi^{o count}(t). `count` is a nonnegative integer carried as a double so
// dyadic depths beyond 2^64 can be passed to the closed forms.
IterateOutcome try_iterate(const PerturbationFunction& phi, double count, double t,
                           const IterateLimits& limits = {});

// Throwing front end: PositiveOverflow or CapExceeded.
double iterate(const PerturbationFunction& phi, std::uint64_t m, double t,
               const IterateLimits& limits = {});

// Always loops, ignoring closed forms. Used to cross-check them.
double iterate_by_composition(const PerturbationFunction& phi, std::uint64_t m, double t);

struct HalvingCheck {
  bool ok = true;
  std::optional<double> first_violation;
};

// phi(t)/2 <= phi(t/2) on every grid point, up to a relative tolerance.
HalvingCheck check_halving(const PerturbationFunction& phi, const std::vector<double>& grid,
                           double rel_tol = 1e-12);

// `count` points from lo to hi, evenly spaced in log scale.
std::vector<double> geometric_grid(double lo, double hi, std::size_t count);

// Default grid for hypothesis checks: 1e-6 .. 1e9.
const std::vector<double>& default_check_grid();

struct IntegralCheck {
  double integral = 0.0;
  double error_estimate = 0.0;
  double upper_limit = 0.0;  // phi^{o n}(t)
  double bound = 0.0;        // n
  bool pass = false;
};

// Integral of 1/(phi(x) - x) over [t, phi^{o n}(t)], compared against n.
// Throws EpsVanishes when phi(x) <= x somewhere on the range.
IntegralCheck integral_bound_check(const PerturbationFunction& phi, double t, std::uint64_t n,
                                   double abs_tol = 1e-8);

}  // namespace isoperturb
