#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "isoperturb/perturb.hpp"
#include "isoperturb/random.hpp"

namespace isoperturb {

enum class NormKind { Sup, Euclid, Ell1 };

std::string_view to_string(NormKind kind) noexcept;
NormKind norm_kind_from_string(std::string_view name);

template <class Derived>
typename Derived::Scalar norm(const Eigen::MatrixBase<Derived>& v, NormKind kind) {
  switch (kind) {
    case NormKind::Sup: return v.template lpNorm<Eigen::Infinity>();
    case NormKind::Euclid: return v.norm();
    case NormKind::Ell1: return v.template lpNorm<1>();
  }
  return v.template lpNorm<Eigen::Infinity>();
}

// Norm of the all-ones vector of length dim.
double unit_cube_norm(Eigen::Index dim, NormKind kind);

struct SpacePoint {
  Eigen::VectorXd coords;
  NormKind norm = NormKind::Sup;

  Eigen::Index dim() const noexcept { return coords.size(); }
};

SpacePoint make_point(std::initializer_list<double> coords, NormKind kind = NormKind::Sup);

// Distance in a's norm. Throws DimensionMismatch.
double distance(const SpacePoint& a, const SpacePoint& b);

struct MapSpec;

// T(x) = (1+eps) x for x >= 0, x / (1+eps) for x < 0, on R.
struct Vestfrid1D {
  double eps = 0.0;
};

// The Vestfrid map applied independently to each coordinate.
struct CoordinatewiseVestfrid {
  Eigen::VectorXd eps;
};

// (Tp)[sigma[i]] = lambda[i] * p[i].
struct SignedPermutation {
  std::vector<Eigen::Index> sigma;
  std::vector<int> lambda;
};

// T(p) = P p + g(p), with ||g|| <= amplitude in the point's norm and
// Lip(g) <= 1/2, so T is a bijection inverted by fixed-point refinement.
struct NoisyIsometry {
  SignedPermutation base;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd frequencies;  // rows have l1 norm 0.5 / max(amplitude, 0.25)
  Eigen::VectorXd phases;
};

struct Composite {
  std::vector<MapSpec> maps;  // applied front to back
};

struct MapSpec {
  using Kind = std::variant<Vestfrid1D, CoordinatewiseVestfrid, SignedPermutation, NoisyIsometry, Composite>;

  Kind kind;
  // phi(t) = claimed_M t + claimed_L bounds both T and its inverse.
  double claimed_M = 1.0;
  double claimed_L = 0.0;

  static MapSpec vestfrid_1d(double eps);
  static MapSpec coordinatewise_vestfrid(Eigen::VectorXd eps);
  static MapSpec signed_permutation(std::vector<Eigen::Index> sigma, std::vector<int> lambda);
  static MapSpec identity_map(Eigen::Index dim);
  static MapSpec noisy_isometry(SignedPermutation base, double amplitude, std::uint64_t seed);
  static MapSpec composite(std::vector<MapSpec> maps);

  // Required input dimension.
  Eigen::Index dim() const;
  std::string_view kind_name() const noexcept;
};

// Uniformly random signed permutation of {0..dim-1}.
SignedPermutation random_signed_permutation(Eigen::Index dim, Rng& rng);

SpacePoint apply(const MapSpec& map, const SpacePoint& p);

// Throws InversionDiverged when the noisy refinement fails within 200 steps.
SpacePoint invert(const MapSpec& map, const SpacePoint& q);

struct EmpiricalModulus {
  std::vector<double> t_grid;
  std::vector<double> eps_hat;
  std::size_t sample_count = 0;  // pairs inspected
};

// Sampled lower estimate of eps_T(t) = sup | ||Tx-Ty|| - ||x-y|| | over pairs
// with ||x-y|| <= t or ||Tx-Ty|| <= t. t_grid must be increasing.
EmpiricalModulus measure_eps(const MapSpec& map, const std::vector<SpacePoint>& cloud,
                             const std::vector<double>& t_grid);

// ||T((a+b)/2) - (Ta+Tb)/2||.
double midpoint_deviation(const MapSpec& map, const SpacePoint& a, const SpacePoint& b);

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct DeviationSup {
  double value = 0.0;
  SpacePoint a;
  SpacePoint b;
  std::size_t pairs = 0;
};

// Exhaustive scan of midpoint_deviation over all pairs of a regular grid on
// the box. Throws BudgetExceeded when grid_per_axis^(2 dim) > 1e8.
DeviationSup deviation_sup_oracle(const MapSpec& map, const Box& region, std::size_t grid_per_axis,
                                  NormKind kind = NormKind::Sup);

using PointPair = std::pair<SpacePoint, SpacePoint>;

// `count` pairs drawn uniformly from [-radius, radius]^dim.
std::vector<PointPair> random_pairs(Eigen::Index dim, NormKind kind, double radius, std::size_t count,
                                    Rng& rng);

struct PairMargin {
  std::size_t pair_id = 0;
  double d = 0.0;
  double deviation = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - deviation
};

struct BoundCheckReport {
  std::vector<PairMargin> rows;
  std::size_t violations = 0;  // margin < -1e-9
  double min_margin = 0.0;
};

// Compares every pair's midpoint deviation with optimize_bound(phi, ||a-b||).
// Throws ModulusMismatch unless phi(t) >= M t + L on the check grid, and
// HalvingViolated unless phi has the halving property.
BoundCheckReport check_against_bound(const MapSpec& map, const PerturbationFunction& phi,
                                     const std::vector<PointPair>& pairs, unsigned jobs = 1);

struct NetCheckReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double xi_domain = 0.0;
  double xi_codomain = 0.0;
  double min_margin = 0.0;
};

// Restricts `map` (claimed L = 0, claimed M <= 1 + eps) to the lattice
// spacing * Z^dim and compares the deviation at the lattice point nearest
// the midpoint with net_bound(eps, xi_E, xi_F, ||a-b||).
NetCheckReport net_midpoint_check(const MapSpec& map, double eps, double spacing, double radius,
                                  std::size_t pair_count, NormKind kind, Rng& rng);

struct SeparatedNet {
  std::vector<std::size_t> indices;
  double min_separation = 0.0;  // +inf for a single point
  double cover_radius = 0.0;    // max distance from an input point to the net
};

// Greedy maximal delta0-separated subset, scanned in input order.
SeparatedNet greedy_separated_net(const std::vector<SpacePoint>& points, double delta0);

struct BijectionRepair {
  std::vector<std::size_t> bijection;  // domain index -> codomain index
  std::vector<std::size_t> net;        // domain indices of the separated net
  std::vector<std::size_t> block_of;   // domain index -> position in `net`
  std::vector<double> displacements;   // ||Tx - T~x|| per domain point
  double eps_hat = 0.0;                // empirical eps_T(delta0)
  double bound = 0.0;                  // 2 delta0 + 2 eps_hat
  double max_displacement = 0.0;
  double min_net_image_separation = 0.0;
  bool certified = false;
};

// Empirical eps_T(t) of a finite map given as domain index -> codomain index.
double sampled_eps(const std::vector<SpacePoint>& domain, const std::vector<SpacePoint>& codomain,
                   const std::vector<std::size_t>& image_index, double t);

// Turns a finite map T (domain[i] -> codomain[image_index[i]]) into a
// bijection that agrees with T on a delta0-separated net and moves no point
// by more than 2 delta0 + 2 eps_T(delta0).
BijectionRepair repair_to_bijection(const std::vector<SpacePoint>& domain,
                                    const std::vector<SpacePoint>& codomain,
                                    const std::vector<std::size_t>& image_index, double delta0);

}  // namespace isoperturb
