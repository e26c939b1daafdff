#include "isoperturb/banach_stone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "isoperturb/error.hpp"

namespace isoperturb {

namespace {

std::string describe(const RecoveryDiagnostics& diag) {
  std::ostringstream out;
  out << "D=" << diag.D_used << " m=" << diag.m_used << " escalations=" << diag.m_escalations
      << " margin=" << diag.condition_ii_margin << " (" << diag.last_failure << ")";
  return out.str();
}

}  // namespace

Eigen::VectorXd OperatorOracle::operator()(const Eigen::VectorXd& f) const {
  if (f.size() != nX) throw Error(Errc::DimensionMismatch, "oracle input has the wrong length");
  Eigen::VectorXd out = eval(f);
  if (out.size() != nY) throw Error(Errc::DimensionMismatch, "oracle output has the wrong length");
  return out;
}

OperatorOracle oracle_from_map(const MapSpec& map) {
  const auto dim = map.dim();
  return {dim, dim, [map](const Eigen::VectorXd& f) { return apply(map, SpacePoint{f, NormKind::Sup}).coords; },
          map.claimed_M, map.claimed_L};
}

OperatorOracle oracle_from_table(std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> rows, double claimed_M,
                                 double claimed_L) {
  if (rows.empty()) throw Error(Errc::InvalidArgument, "operator table is empty");
  const auto nX = rows.front().first.size();
  const auto nY = rows.front().second.size();
  for (const auto& [in, out] : rows)
    if (in.size() != nX || out.size() != nY) throw Error(Errc::DimensionMismatch, "ragged operator table");
  auto table = std::make_shared<const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>>(std::move(rows));
  return {nX, nY,
          [table](const Eigen::VectorXd& f) -> Eigen::VectorXd {
            for (const auto& [in, out] : *table)
              if ((in - f).lpNorm<Eigen::Infinity>() <= 1e-12) return out;
            throw Error(Errc::NotTabulated, "operator table has no row for the requested input");
          },
          claimed_M, claimed_L};
}

double recovery_m_limit() noexcept { return std::sqrt(16.0 / 15.0); }

double candidate_threshold(double M) noexcept { return 14.0 - 13.0 * M; }

double condition_ii_margin(double M) noexcept {
  const double eps_M = 2.0 * M - 1.0 - candidate_threshold(M);
  return 1.0 - eps_M * M - eps_M;
}

Eigen::VectorXd peak_vector(Eigen::Index n, Eigen::Index x, double m, int sign) {
  if (x < 0 || x >= n) throw Error(Errc::IndexOutOfRange, "peak index outside 0.." + std::to_string(n - 1));
  if (!(m > 0.0)) throw Error(Errc::InvalidArgument, "peak height must be positive");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(x) = sign >= 0 ? m : -m;
  return v;
}

CandidateSet candidate_set(const OperatorOracle& T, Eigen::Index x, double D, double m) {
  const Eigen::VectorXd up = T(peak_vector(T.nX, x, m, +1));
  const Eigen::VectorXd down = T(peak_vector(T.nX, x, m, -1));
  std::vector<Eigen::Index> positive;
  std::vector<Eigen::Index> negative;
  for (Eigen::Index y = 0; y < T.nY; ++y) {
    if (up(y) >= D * m && down(y) <= -D * m) positive.push_back(y);
    if (down(y) >= D * m && up(y) <= -D * m) negative.push_back(y);
  }
  if (positive.empty() && negative.empty())
    throw Error(Errc::EmptyForBothSigns, "no candidate for index " + std::to_string(x));
  if (!positive.empty()) return {std::move(positive), +1, !negative.empty()};
  return {std::move(negative), -1, false};
}

Eigen::VectorXd RecoveredIsometry::apply(const Eigen::VectorXd& f) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sigma.size()));
  for (std::size_t x = 0; x < sigma.size(); ++x) out(sigma[x]) = lambda[x] * f(static_cast<Eigen::Index>(x));
  return out;
}

Recovery recover(const OperatorOracle& T, const RecoveryOptions& options) {
  const double M = T.claimed_M;
  if (!(M >= 1.0)) throw Error(Errc::InvalidArgument, "claimed M must be >= 1");
  if (!(M < recovery_m_limit()))
    throw Error(Errc::MTooLarge, "M = " + std::to_string(M) + " is not below sqrt(16/15)");
  if (T.nX != T.nY) throw Error(Errc::CardinalityMismatch, "recovery needs nX == nY");

  RecoveryDiagnostics diag;
  diag.D_used = candidate_threshold(M);
  diag.eps_M = 2.0 * M - 1.0 - diag.D_used;
  diag.condition_ii_margin = condition_ii_margin(M);
  if (!(diag.condition_ii_margin > 0.0))
    throw Error(Errc::ConditionIIViolated, "condition (ii) margin " + std::to_string(diag.condition_ii_margin));

  const int doublings = T.claimed_L > 0.0 ? options.max_doublings : 0;
  Errc failure = Errc::NotSingleValued;
  for (int step = 0; step <= doublings; ++step) {
    const double m = std::ldexp(1.0, step);
    diag.m_used = m;
    diag.m_escalations = step;
    diag.candidate_sets.assign(static_cast<std::size_t>(T.nX), {});
    diag.candidate_signs.assign(static_cast<std::size_t>(T.nX), 0);

    RecoveredIsometry iso;
    iso.sigma.resize(static_cast<std::size_t>(T.nX));
    iso.lambda.resize(static_cast<std::size_t>(T.nX));
    bool single_valued = true;
    for (Eigen::Index x = 0; x < T.nX && single_valued; ++x) {
      const auto ux = static_cast<std::size_t>(x);
      try {
        auto cands = candidate_set(T, x, diag.D_used, m);
        diag.candidate_sets[ux] = cands.indices;
        diag.candidate_signs[ux] = cands.sign;
        if (cands.ambiguous) {
          diag.last_failure = "both signs give candidates at index " + std::to_string(x);
          single_valued = false;
        } else if (cands.indices.size() != 1) {
          diag.last_failure = std::to_string(cands.indices.size()) + " candidates at index " + std::to_string(x);
          single_valued = false;
        } else {
          iso.sigma[ux] = cands.indices.front();
          iso.lambda[ux] = cands.sign;
        }
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyForBothSigns) throw;
        diag.last_failure = "no candidate at index " + std::to_string(x);
        single_valued = false;
      }
    }
    if (!single_valued) {
      failure = Errc::NotSingleValued;
      continue;
    }
    std::vector<bool> hit(static_cast<std::size_t>(T.nY), false);
    bool bijective = true;
    for (const auto y : iso.sigma) {
      if (hit[static_cast<std::size_t>(y)]) bijective = false;
      hit[static_cast<std::size_t>(y)] = true;
    }
    if (!bijective) {
      diag.last_failure = "two indices share a candidate";
      failure = Errc::NotBijective;
      continue;
    }
    diag.last_failure.clear();
    return {std::move(iso), std::move(diag)};
  }
  throw Error(failure, "recovery failed after the m schedule: " + describe(diag));
}

StabilityReport stability_report(const OperatorOracle& T, const RecoveredIsometry& R,
                                 const std::vector<Eigen::VectorXd>& samples) {
  const double slope = 76.0 * (T.claimed_M - 1.0);
  StabilityReport report;
  report.sup_excess = samples.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& f : samples) {
    const double size = f.lpNorm<Eigen::Infinity>();
    const double gap = (T(f) - R.apply(f)).lpNorm<Eigen::Infinity>();
    report.sup_excess = std::max(report.sup_excess, gap - slope * size);
    if (size > 0.0) report.max_ratio = std::max(report.max_ratio, gap / size);
  }
  report.delta_hat = std::max(0.0, report.sup_excess);
  report.pass = T.claimed_L > 0.0 || report.sup_excess <= 1e-9;
  return report;
}

std::vector<SignCheckEntry> sign_check(const OperatorOracle& T, const RecoveredIsometry& R,
                                       const Eigen::VectorXd& f) {
  const double threshold = 30.0 * (T.claimed_M - 1.0) * f.lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd image = T(f);
  std::vector<SignCheckEntry> entries(static_cast<std::size_t>(T.nX));
  for (Eigen::Index x = 0; x < T.nX; ++x) {
    auto& entry = entries[static_cast<std::size_t>(x)];
    entry.x = x;
    entry.qualifies = std::abs(f(x)) > threshold;
    if (!entry.qualifies) continue;
    const double expected = R.lambda[static_cast<std::size_t>(x)] * f(x);
    const double observed = image(R.sigma[static_cast<std::size_t>(x)]);
    entry.pass = (expected > 0.0 && observed > 0.0) || (expected < 0.0 && observed < 0.0);
  }
  return entries;
}

double modulus_check(const OperatorOracle& T, const RecoveredIsometry& R, const Eigen::VectorXd& f) {
  const double M = T.claimed_M;
  const double allowance = 15.0 * (M * M - M) * f.lpNorm<Eigen::Infinity>();
  const Eigen::VectorXd image = T(f);
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < T.nX; ++x) {
    const double gap = std::abs(std::abs(image(R.sigma[static_cast<std::size_t>(x)])) - std::abs(f(x)));
    worst = std::max(worst, gap - allowance);
  }
  return worst;
}

}  // namespace isoperturb
