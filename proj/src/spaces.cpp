#include "isoperturb/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "isoperturb/bounds.hpp"
#include "isoperturb/error.hpp"
#include "isoperturb/parallel.hpp"

namespace isoperturb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_same_dim(Eigen::Index expected, Eigen::Index actual) {
  if (expected != actual)
    throw Error(Errc::DimensionMismatch,
                "expected dimension " + std::to_string(expected) + ", got " + std::to_string(actual));
}

double vestfrid_forward(double eps, double x) { return x >= 0.0 ? (1.0 + eps) * x : x / (1.0 + eps); }
double vestfrid_inverse(double eps, double y) { return y >= 0.0 ? y / (1.0 + eps) : (1.0 + eps) * y; }

Eigen::VectorXd permute_forward(const SignedPermutation& sp, const Eigen::VectorXd& p) {
  Eigen::VectorXd q(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) q(sp.sigma[static_cast<std::size_t>(i)]) = sp.lambda[static_cast<std::size_t>(i)] * p(i);
  return q;
}

Eigen::VectorXd permute_inverse(const SignedPermutation& sp, const Eigen::VectorXd& q) {
  Eigen::VectorXd p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) p(i) = sp.lambda[static_cast<std::size_t>(i)] * q(sp.sigma[static_cast<std::size_t>(i)]);
  return p;
}

Eigen::VectorXd noise(const NoisyIsometry& n, const Eigen::VectorXd& p, NormKind kind) {
  const double scale = n.amplitude / unit_cube_norm(p.size(), kind);
  return scale * (n.frequencies * p + n.phases).array().sin().matrix();
}

Eigen::VectorXd forward(const MapSpec& map, const Eigen::VectorXd& p, NormKind kind);
Eigen::VectorXd backward(const MapSpec& map, const Eigen::VectorXd& q, NormKind kind);

Eigen::VectorXd forward(const MapSpec& map, const Eigen::VectorXd& p, NormKind kind) {
  return std::visit(
      Overloaded{
          [&](const Vestfrid1D& v) -> Eigen::VectorXd {
            return p.unaryExpr([eps = v.eps](double x) { return vestfrid_forward(eps, x); });
          },
          [&](const CoordinatewiseVestfrid& v) -> Eigen::VectorXd {
            Eigen::VectorXd q(p.size());
            for (Eigen::Index i = 0; i < p.size(); ++i) q(i) = vestfrid_forward(v.eps(i), p(i));
            return q;
          },
          [&](const SignedPermutation& sp) -> Eigen::VectorXd { return permute_forward(sp, p); },
          [&](const NoisyIsometry& n) -> Eigen::VectorXd { return permute_forward(n.base, p) + noise(n, p, kind); },
          [&](const Composite& c) -> Eigen::VectorXd {
            Eigen::VectorXd x = p;
            for (const auto& inner : c.maps) x = forward(inner, x, kind);
            return x;
          }},
      map.kind);
}

Eigen::VectorXd backward(const MapSpec& map, const Eigen::VectorXd& q, NormKind kind) {
  return std::visit(
      Overloaded{
          [&](const Vestfrid1D& v) -> Eigen::VectorXd {
            return q.unaryExpr([eps = v.eps](double y) { return vestfrid_inverse(eps, y); });
          },
          [&](const CoordinatewiseVestfrid& v) -> Eigen::VectorXd {
            Eigen::VectorXd p(q.size());
            for (Eigen::Index i = 0; i < q.size(); ++i) p(i) = vestfrid_inverse(v.eps(i), q(i));
            return p;
          },
          [&](const SignedPermutation& sp) -> Eigen::VectorXd { return permute_inverse(sp, q); },
          [&](const NoisyIsometry& n) -> Eigen::VectorXd {
            // p = P^{-1}(q - g(p)) is a contraction with rate Lip(g) <= 1/2.
            constexpr int kMaxSteps = 200;
            Eigen::VectorXd p = permute_inverse(n.base, q);
            for (int step = 0; step < kMaxSteps; ++step) {
              const Eigen::VectorXd next = permute_inverse(n.base, q - noise(n, p, kind));
              const double change = (next - p).lpNorm<Eigen::Infinity>();
              p = next;
              if (change <= 1e-15 * (1.0 + p.lpNorm<Eigen::Infinity>())) return p;
            }
            const double residual = (forward(map, p, kind) - q).lpNorm<Eigen::Infinity>();
            if (residual <= 1e-12 * (1.0 + q.lpNorm<Eigen::Infinity>())) return p;
            throw Error(Errc::InversionDiverged, "noisy isometry refinement residual " + std::to_string(residual));
          },
          [&](const Composite& c) -> Eigen::VectorXd {
            Eigen::VectorXd x = q;
            for (auto it = c.maps.rbegin(); it != c.maps.rend(); ++it) x = backward(*it, x, kind);
            return x;
          }},
      map.kind);
}

}  // namespace

std::string_view to_string(NormKind kind) noexcept {
  switch (kind) {
    case NormKind::Sup: return "sup";
    case NormKind::Euclid: return "euclid";
    case NormKind::Ell1: return "ell1";
  }
  return "sup";
}

NormKind norm_kind_from_string(std::string_view name) {
  if (name == "sup") return NormKind::Sup;
  if (name == "euclid") return NormKind::Euclid;
  if (name == "ell1") return NormKind::Ell1;
  throw Error(Errc::InvalidArgument, "unknown norm '" + std::string(name) + "'");
}

double unit_cube_norm(Eigen::Index dim, NormKind kind) {
  switch (kind) {
    case NormKind::Sup: return 1.0;
    case NormKind::Euclid: return std::sqrt(static_cast<double>(dim));
    case NormKind::Ell1: return static_cast<double>(dim);
  }
  return 1.0;
}

SpacePoint make_point(std::initializer_list<double> coords, NormKind kind) {
  SpacePoint p;
  p.coords = Eigen::Map<const Eigen::VectorXd>(coords.begin(), static_cast<Eigen::Index>(coords.size()));
  p.norm = kind;
  return p;
}

double distance(const SpacePoint& a, const SpacePoint& b) {
  require_same_dim(a.dim(), b.dim());
  return norm(a.coords - b.coords, a.norm);
}

MapSpec MapSpec::vestfrid_1d(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(Errc::InvalidArgument, "Vestfrid eps must be >= 0");
  return {Vestfrid1D{eps}, 1.0 + eps, 0.0};
}

MapSpec MapSpec::coordinatewise_vestfrid(Eigen::VectorXd eps) {
  if (eps.size() == 0) throw Error(Errc::InvalidArgument, "coordinatewise Vestfrid needs a dimension");
  if (!(eps.array() >= 0.0).all() || !eps.allFinite())
    throw Error(Errc::InvalidArgument, "Vestfrid eps must be >= 0");
  const double M = 1.0 + eps.maxCoeff();
  return {CoordinatewiseVestfrid{std::move(eps)}, M, 0.0};
}

MapSpec MapSpec::signed_permutation(std::vector<Eigen::Index> sigma, std::vector<int> lambda) {
  if (sigma.empty() || sigma.size() != lambda.size())
    throw Error(Errc::InvalidArgument, "sigma and lambda must be non-empty and of equal length");
  std::vector<bool> seen(sigma.size(), false);
  for (const auto s : sigma) {
    if (s < 0 || static_cast<std::size_t>(s) >= sigma.size() || seen[static_cast<std::size_t>(s)])
      throw Error(Errc::InvalidArgument, "sigma is not a permutation");
    seen[static_cast<std::size_t>(s)] = true;
  }
  for (const int l : lambda)
    if (l != 1 && l != -1) throw Error(Errc::InvalidArgument, "lambda entries must be +1 or -1");
  return {SignedPermutation{std::move(sigma), std::move(lambda)}, 1.0, 0.0};
}

MapSpec MapSpec::identity_map(Eigen::Index dim) {
  std::vector<Eigen::Index> sigma(static_cast<std::size_t>(dim));
  std::iota(sigma.begin(), sigma.end(), Eigen::Index{0});
  return signed_permutation(std::move(sigma), std::vector<int>(static_cast<std::size_t>(dim), 1));
}

MapSpec MapSpec::noisy_isometry(SignedPermutation base, double amplitude, std::uint64_t seed) {
  const auto checked = signed_permutation(base.sigma, base.lambda);
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
    throw Error(Errc::InvalidArgument, "noise amplitude must be >= 0");
  const auto dim = static_cast<Eigen::Index>(base.sigma.size());
  NoisyIsometry n{std::get<SignedPermutation>(checked.kind), amplitude, seed, Eigen::MatrixXd(dim, dim),
                  Eigen::VectorXd(dim)};
  Rng rng(seed);
  const double row_l1 = 0.5 / std::max(amplitude, 0.25);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) n.frequencies(r, c) = rng.uniform(-1.0, 1.0);
    const double l1 = n.frequencies.row(r).lpNorm<1>();
    n.frequencies.row(r) *= row_l1 / std::max(l1, 1e-300);
    n.phases(r) = rng.uniform(0.0, 2.0 * M_PI);
  }
  return {std::move(n), 1.0, 2.0 * amplitude};
}

MapSpec MapSpec::composite(std::vector<MapSpec> maps) {
  if (maps.empty()) throw Error(Errc::InvalidArgument, "composite needs at least one map");
  const auto dim = maps.front().dim();
  double M = 1.0;
  double L = 0.0;
  for (const auto& m : maps) {
    require_same_dim(dim, m.dim());
    // Forward composes phi_new o phi_acc, the inverse phi_acc o phi_new.
    L = std::max(m.claimed_M * L + m.claimed_L, M * m.claimed_L + L);
    M *= m.claimed_M;
  }
  return {Composite{std::move(maps)}, M, L};
}

Eigen::Index MapSpec::dim() const {
  return std::visit(Overloaded{[](const Vestfrid1D&) -> Eigen::Index { return 1; },
                               [](const CoordinatewiseVestfrid& v) -> Eigen::Index { return v.eps.size(); },
                               [](const SignedPermutation& sp) -> Eigen::Index {
                                 return static_cast<Eigen::Index>(sp.sigma.size());
                               },
                               [](const NoisyIsometry& n) -> Eigen::Index {
                                 return static_cast<Eigen::Index>(n.base.sigma.size());
                               },
                               [](const Composite& c) -> Eigen::Index { return c.maps.front().dim(); }},
                    kind);
}

std::string_view MapSpec::kind_name() const noexcept {
  return std::visit(Overloaded{[](const Vestfrid1D&) { return std::string_view("vestfrid_1d"); },
                               [](const CoordinatewiseVestfrid&) { return std::string_view("coordinatewise_vestfrid"); },
                               [](const SignedPermutation&) { return std::string_view("signed_permutation"); },
                               [](const NoisyIsometry&) { return std::string_view("noisy_isometry"); },
                               [](const Composite&) { return std::string_view("composite"); }},
                    kind);
}

SignedPermutation random_signed_permutation(Eigen::Index dim, Rng& rng) {
  SignedPermutation sp;
  sp.sigma.resize(static_cast<std::size_t>(dim));
  std::iota(sp.sigma.begin(), sp.sigma.end(), Eigen::Index{0});
  for (std::size_t i = sp.sigma.size(); i > 1; --i)
    std::swap(sp.sigma[i - 1], sp.sigma[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
  sp.lambda.resize(sp.sigma.size());
  for (auto& l : sp.lambda) l = rng.sign() > 0 ? 1 : -1;
  return sp;
}

SpacePoint apply(const MapSpec& map, const SpacePoint& p) {
  require_same_dim(map.dim(), p.dim());
  return {forward(map, p.coords, p.norm), p.norm};
}

SpacePoint invert(const MapSpec& map, const SpacePoint& q) {
  require_same_dim(map.dim(), q.dim());
  return {backward(map, q.coords, q.norm), q.norm};
}

EmpiricalModulus measure_eps(const MapSpec& map, const std::vector<SpacePoint>& cloud,
                             const std::vector<double>& t_grid) {
  if (cloud.size() < 2) throw Error(Errc::InvalidArgument, "cloud needs at least two points");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw Error(Errc::InvalidArgument, "t grid must be increasing");

  std::vector<SpacePoint> images;
  images.reserve(cloud.size());
  for (const auto& p : cloud) images.push_back(apply(map, p));

  // Each pair enters every t >= min(||x-y||, ||Tx-Ty||).
  std::vector<std::pair<double, double>> entries;
  entries.reserve(cloud.size() * (cloud.size() - 1) / 2);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) {
      const double dx = distance(cloud[i], cloud[j]);
      const double dt = distance(images[i], images[j]);
      entries.emplace_back(std::min(dx, dt), std::abs(dt - dx));
    }
  }
  std::sort(entries.begin(), entries.end());

  EmpiricalModulus result;
  result.t_grid = t_grid;
  result.eps_hat.resize(t_grid.size());
  result.sample_count = entries.size();
  double running = 0.0;
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    while (cursor < entries.size() && entries[cursor].first <= t_grid[g]) running = std::max(running, entries[cursor++].second);
    result.eps_hat[g] = running;
  }
  return result;
}

double midpoint_deviation(const MapSpec& map, const SpacePoint& a, const SpacePoint& b) {
  require_same_dim(a.dim(), b.dim());
  require_same_dim(map.dim(), a.dim());
  const Eigen::VectorXd mid = 0.5 * (a.coords + b.coords);
  const Eigen::VectorXd image_mid = forward(map, mid, a.norm);
  const Eigen::VectorXd mean_image = 0.5 * (forward(map, a.coords, a.norm) + forward(map, b.coords, a.norm));
  return norm(image_mid - mean_image, a.norm);
}

DeviationSup deviation_sup_oracle(const MapSpec& map, const Box& region, std::size_t grid_per_axis,
                                  NormKind kind) {
  const auto dim = map.dim();
  require_same_dim(dim, region.lo.size());
  require_same_dim(dim, region.hi.size());
  if (grid_per_axis < 2) throw Error(Errc::InvalidArgument, "grid_per_axis must be >= 2");
  const double pair_count = std::pow(static_cast<double>(grid_per_axis), 2.0 * static_cast<double>(dim));
  if (pair_count > 1e8) throw Error(Errc::BudgetExceeded, "grid would need " + std::to_string(pair_count) + " pairs");

  std::size_t point_count = 1;
  for (Eigen::Index i = 0; i < dim; ++i) point_count *= grid_per_axis;
  std::vector<Eigen::VectorXd> points(point_count, Eigen::VectorXd(dim));
  std::vector<Eigen::VectorXd> images(point_count);
  const double steps = static_cast<double>(grid_per_axis - 1);
  for (std::size_t idx = 0; idx < point_count; ++idx) {
    std::size_t rest = idx;
    for (Eigen::Index axis = 0; axis < dim; ++axis) {
      const auto g = static_cast<double>(rest % grid_per_axis);
      rest /= grid_per_axis;
      points[idx](axis) = region.lo(axis) + (region.hi(axis) - region.lo(axis)) * g / steps;
    }
    images[idx] = forward(map, points[idx], kind);
  }

  DeviationSup best;
  best.value = -1.0;
  for (std::size_t i = 0; i < point_count; ++i) {
    for (std::size_t j = i + 1; j < point_count; ++j) {
      const Eigen::VectorXd mid = 0.5 * (points[i] + points[j]);
      const double dev = norm(forward(map, mid, kind) - 0.5 * (images[i] + images[j]), kind);
      ++best.pairs;
      if (dev > best.value) {
        best.value = dev;
        best.a = {points[i], kind};
        best.b = {points[j], kind};
      }
    }
  }
  best.value = std::max(best.value, 0.0);
  return best;
}

std::vector<PointPair> random_pairs(Eigen::Index dim, NormKind kind, double radius, std::size_t count,
                                    Rng& rng) {
  std::vector<PointPair> pairs;
  pairs.reserve(count);
  const auto draw = [&] {
    SpacePoint p{Eigen::VectorXd(dim), kind};
    for (Eigen::Index i = 0; i < dim; ++i) p.coords(i) = rng.uniform(-radius, radius);
    return p;
  };
  for (std::size_t i = 0; i < count; ++i) {
    auto a = draw();
    auto b = draw();
    pairs.emplace_back(std::move(a), std::move(b));
  }
  return pairs;
}

BoundCheckReport check_against_bound(const MapSpec& map, const PerturbationFunction& phi,
                                     const std::vector<PointPair>& pairs, unsigned jobs) {
  for (const double t : default_check_grid()) {
    const double required = map.claimed_M * t + map.claimed_L;
    if (phi(t) < required - 1e-12 * (1.0 + required))
      throw Error(Errc::ModulusMismatch, "phi(" + std::to_string(t) + ") = " + std::to_string(phi(t)) +
                                             " is below the claimed modulus " + std::to_string(required));
  }
  const auto halving = check_halving(phi, default_check_grid());
  if (!halving.ok)
    throw Error(Errc::HalvingViolated, "phi(t)/2 > phi(t/2) at t = " + std::to_string(*halving.first_violation));

  BoundCheckReport report;
  report.rows.resize(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    auto& row = report.rows[i];
    row.pair_id = i;
    row.d = distance(a, b);
    row.deviation = midpoint_deviation(map, a, b);
    row.bound = row.d > 0.0 ? optimize_bound(phi, row.d).bound : 0.0;
    row.margin = row.bound - row.deviation;
  });
  report.min_margin = pairs.empty() ? 0.0 : kInf;
  for (const auto& row : report.rows) {
    report.min_margin = std::min(report.min_margin, row.margin);
    if (row.margin < -1e-9) ++report.violations;
  }
  return report;
}

NetCheckReport net_midpoint_check(const MapSpec& map, double eps, double spacing, double radius,
                                  std::size_t pair_count, NormKind kind, Rng& rng) {
  if (map.claimed_L != 0.0 || map.claimed_M > 1.0 + eps)
    throw Error(Errc::ModulusMismatch, "net check needs a (1+eps)-bi-Lipschitz map");
  if (!(spacing > 0.0)) throw Error(Errc::InvalidArgument, "spacing must be positive");
  const auto dim = map.dim();
  const auto cells = static_cast<std::int64_t>(std::floor(radius / spacing));

  NetCheckReport report;
  report.xi_domain = 0.5 * spacing * unit_cube_norm(dim, kind);
  // Every image point lies within M xi_E of the image lattice.
  report.xi_codomain = map.claimed_M * report.xi_domain;
  report.min_margin = kInf;
  const auto lattice_point = [&] {
    SpacePoint p{Eigen::VectorXd(dim), kind};
    for (Eigen::Index i = 0; i < dim; ++i) p.coords(i) = spacing * static_cast<double>(rng.integer(-cells, cells));
    return p;
  };
  for (std::size_t i = 0; i < pair_count; ++i) {
    const auto a = lattice_point();
    const auto b = lattice_point();
    const double d = distance(a, b);
    if (d == 0.0) continue;
    SpacePoint z{(0.5 * (a.coords + b.coords) / spacing).array().round().matrix() * spacing, kind};
    const Eigen::VectorXd mean_image = 0.5 * (apply(map, a).coords + apply(map, b).coords);
    const double dev = norm(apply(map, z).coords - mean_image, kind);
    const double margin = net_bound(eps, report.xi_domain, report.xi_codomain, d) - dev;
    report.min_margin = std::min(report.min_margin, margin);
    ++report.pairs;
    if (margin < -1e-9) ++report.violations;
  }
  return report;
}

SeparatedNet greedy_separated_net(const std::vector<SpacePoint>& points, double delta0) {
  if (!(delta0 > 0.0)) throw Error(Errc::InvalidArgument, "delta0 must be positive");
  SeparatedNet net;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool separated = std::all_of(net.indices.begin(), net.indices.end(),
                                       [&](std::size_t j) { return distance(points[i], points[j]) >= delta0; });
    if (separated) net.indices.push_back(i);
  }
  net.min_separation = kInf;
  for (std::size_t a = 0; a < net.indices.size(); ++a)
    for (std::size_t b = a + 1; b < net.indices.size(); ++b)
      net.min_separation = std::min(net.min_separation, distance(points[net.indices[a]], points[net.indices[b]]));
  for (const auto& p : points) {
    double nearest = kInf;
    for (const auto j : net.indices) nearest = std::min(nearest, distance(p, points[j]));
    net.cover_radius = std::max(net.cover_radius, nearest);
  }
  return net;
}

double sampled_eps(const std::vector<SpacePoint>& domain, const std::vector<SpacePoint>& codomain,
                   const std::vector<std::size_t>& image_index, double t) {
  double eps = 0.0;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    for (std::size_t j = i + 1; j < domain.size(); ++j) {
      const double dx = distance(domain[i], domain[j]);
      const double dt = distance(codomain[image_index[i]], codomain[image_index[j]]);
      if (dx <= t || dt <= t) eps = std::max(eps, std::abs(dt - dx));
    }
  }
  return eps;
}

namespace {

// Assigns codomain points to blocks with exact capacities. Blocks are only
// eligible when the point lies within `radius` of the block's anchor image.
class BlockAssignment {
 public:
  BlockAssignment(std::vector<std::vector<std::size_t>> eligible, std::vector<std::size_t> capacity)
      : eligible_(std::move(eligible)), capacity_(std::move(capacity)), members_(capacity_.size()),
        block_of_(eligible_.size(), kUnassigned), pinned_(eligible_.size(), false) {}

  static constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

  bool place(std::size_t y, std::size_t block, bool pin) {
    if (members_[block].size() >= capacity_[block]) return false;
    members_[block].push_back(y);
    block_of_[y] = block;
    pinned_[y] = pin;
    return true;
  }

  // Kuhn-style augmenting path that may relocate unpinned points.
  bool augment(std::size_t y) {
    std::vector<bool> visited(capacity_.size(), false);
    return search(y, visited);
  }

  std::size_t block_of(std::size_t y) const { return block_of_[y]; }
  const std::vector<std::size_t>& members(std::size_t block) const { return members_[block]; }

 private:
  bool search(std::size_t y, std::vector<bool>& visited) {
    for (const auto block : eligible_[y]) {
      if (visited[block]) continue;
      visited[block] = true;
      if (members_[block].size() < capacity_[block]) {
        place(y, block, false);
        return true;
      }
      for (std::size_t slot = 0; slot < members_[block].size(); ++slot) {
        const auto other = members_[block][slot];
        if (pinned_[other]) continue;
        members_[block].erase(members_[block].begin() + static_cast<std::ptrdiff_t>(slot));
        block_of_[other] = kUnassigned;
        if (search(other, visited)) {
          place(y, block, false);
          return true;
        }
        members_[block].insert(members_[block].begin() + static_cast<std::ptrdiff_t>(slot), other);
        block_of_[other] = block;
      }
    }
    return false;
  }

  std::vector<std::vector<std::size_t>> eligible_;
  std::vector<std::size_t> capacity_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> block_of_;
  std::vector<bool> pinned_;
};

}  // namespace

BijectionRepair repair_to_bijection(const std::vector<SpacePoint>& domain,
                                    const std::vector<SpacePoint>& codomain,
                                    const std::vector<std::size_t>& image_index, double delta0) {
  if (domain.size() != codomain.size() || image_index.size() != domain.size())
    throw Error(Errc::CardinalityMismatch, "domain, codomain and map must have equal sizes");
  if (!(delta0 > 0.0)) throw Error(Errc::InvalidArgument, "delta0 must be positive");
  for (const auto j : image_index)
    if (j >= codomain.size()) throw Error(Errc::IndexOutOfRange, "image index outside the codomain");

  BijectionRepair repair;
  const std::size_t size = domain.size();
  repair.eps_hat = sampled_eps(domain, codomain, image_index, delta0);
  if (!(repair.eps_hat < delta0))
    throw Error(Errc::HypothesisFailed, "eps_T(delta0) = " + std::to_string(repair.eps_hat) + " >= delta0");
  repair.bound = 2.0 * delta0 + 2.0 * repair.eps_hat;
  constexpr double kSlack = 1e-12;

  const auto net = greedy_separated_net(domain, delta0);
  repair.net = net.indices;
  const std::size_t blocks = repair.net.size();

  // Domain blocks: nearest net point (ties go to the earlier one).
  repair.block_of.assign(size, 0);
  std::vector<std::size_t> capacity(blocks, 0);
  for (std::size_t i = 0; i < size; ++i) {
    double nearest = kInf;
    for (std::size_t b = 0; b < blocks; ++b) {
      const double dist = distance(domain[i], domain[repair.net[b]]);
      if (dist < nearest) {
        nearest = dist;
        repair.block_of[i] = b;
      }
    }
    ++capacity[repair.block_of[i]];
  }

  repair.min_net_image_separation = kInf;
  for (std::size_t a = 0; a < blocks; ++a)
    for (std::size_t b = a + 1; b < blocks; ++b)
      repair.min_net_image_separation =
          std::min(repair.min_net_image_separation,
                   distance(codomain[image_index[repair.net[a]]], codomain[image_index[repair.net[b]]]));
  if (repair.min_net_image_separation <= 0.0)
    throw Error(Errc::HypothesisFailed, "T is not injective on the separated net");

  // Codomain blocks: within delta0 + eps_hat of the anchor image T(a).
  const double radius = delta0 + repair.eps_hat + kSlack;
  std::vector<std::vector<std::size_t>> eligible(size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t b = 0; b < blocks; ++b)
      if (distance(codomain[y], codomain[image_index[repair.net[b]]]) <= radius) eligible[y].push_back(b);

  BlockAssignment assignment(eligible, capacity);
  std::vector<std::size_t> anchor_block(size, BlockAssignment::kUnassigned);
  for (std::size_t b = 0; b < blocks; ++b) {
    anchor_block[image_index[repair.net[b]]] = b;
    assignment.place(image_index[repair.net[b]], b, true);
  }
  // Prefer the block of a preimage so an already-bijective T is kept as is.
  std::vector<std::size_t> preimage(size, BlockAssignment::kUnassigned);
  for (std::size_t i = 0; i < size; ++i)
    if (preimage[image_index[i]] == BlockAssignment::kUnassigned) preimage[image_index[i]] = i;
  for (std::size_t y = 0; y < size; ++y) {
    if (anchor_block[y] != BlockAssignment::kUnassigned || preimage[y] == BlockAssignment::kUnassigned) continue;
    const auto b = repair.block_of[preimage[y]];
    if (std::find(eligible[y].begin(), eligible[y].end(), b) != eligible[y].end()) assignment.place(y, b, false);
  }
  for (std::size_t y = 0; y < size; ++y) {
    if (assignment.block_of(y) != BlockAssignment::kUnassigned) continue;
    if (!assignment.augment(y))
      throw Error(Errc::BlockDecompositionFailed,
                  "no block of equal size can absorb codomain point " + std::to_string(y));
  }

  // Inside each block: T(a) for the anchor, then greedy by ||Tx - y||.
  repair.bijection.assign(size, BlockAssignment::kUnassigned);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto anchor = repair.net[b];
    repair.bijection[anchor] = image_index[anchor];
    std::vector<std::size_t> xs;
    for (std::size_t i = 0; i < size; ++i)
      if (repair.block_of[i] == b && i != anchor) xs.push_back(i);
    std::vector<std::size_t> ys;
    for (const auto y : assignment.members(b))
      if (y != image_index[anchor]) ys.push_back(y);
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (const auto x : xs)
      for (const auto y : ys) candidates.emplace_back(distance(codomain[image_index[x]], codomain[y]), x, y);
    std::sort(candidates.begin(), candidates.end());
    std::vector<bool> y_taken(size, false);
    for (const auto& [dist, x, y] : candidates) {
      if (repair.bijection[x] != BlockAssignment::kUnassigned || y_taken[y]) continue;
      repair.bijection[x] = y;
      y_taken[y] = true;
    }
  }

  repair.displacements.resize(size);
  std::vector<bool> hit(size, false);
  bool bijective = true;
  for (std::size_t i = 0; i < size; ++i) {
    const auto y = repair.bijection[i];
    if (y == BlockAssignment::kUnassigned || hit[y]) {
      bijective = false;
      repair.displacements[i] = kInf;
      continue;
    }
    hit[y] = true;
    repair.displacements[i] = distance(codomain[image_index[i]], codomain[y]);
    repair.max_displacement = std::max(repair.max_displacement, repair.displacements[i]);
  }
  if (!bijective) repair.max_displacement = kInf;
  repair.certified = bijective && repair.max_displacement <= repair.bound + kSlack &&
                     (blocks < 2 || repair.min_net_image_separation >= delta0 - repair.eps_hat - kSlack);
  return repair;
}

}  // namespace isoperturb
