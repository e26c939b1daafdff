#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "isoperturb/banach_stone.hpp"
#include "isoperturb/error.hpp"
#include "isoperturb/random.hpp"

using namespace isoperturb;

namespace {

struct Instance {
  SignedPermutation truth;
  OperatorOracle T;
  double M = 1.0;
};

// T = P o V with V coordinatewise Vestfrid of max parameter M - 1.
Instance perturbed_permutation(Rng& rng, Eigen::Index n, double M) {
  Instance inst;
  inst.M = M;
  Eigen::VectorXd eps(n);
  for (auto& e : eps) e = rng.uniform(0.0, M - 1.0);
  eps(0) = M - 1.0;
  inst.truth = random_signed_permutation(n, rng);
  inst.T = oracle_from_map(MapSpec::composite(
      {MapSpec::coordinatewise_vestfrid(eps), MapSpec::signed_permutation(inst.truth.sigma, inst.truth.lambda)}));
  return inst;
}

Errc code_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::InvalidArgument;
}

Eigen::VectorXd random_f(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd f(n);
  for (auto& v : f) v = rng.uniform(-1.0, 1.0);
  return f;
}

}  // namespace

TEST_CASE("peak_vector examples") {
  CHECK(peak_vector(4, 2, 2.0, 1) == Eigen::Vector4d(0.0, 0.0, 2.0, 0.0));
  const auto neg = peak_vector(3, 0, 1.0, -1);
  CHECK(neg(0) == -1.0);
  CHECK(neg.tail(2).isZero());
  CHECK(code_of([] { peak_vector(3, 3, 1.0, 1); }) == Errc::IndexOutOfRange);

  auto rng = Rng::stream(41, 0);
  for (int i = 0; i < 100; ++i) {
    const auto n = rng.integer(1, 20);
    const double m = rng.log_uniform(1e-3, 1e3);
    CHECK(peak_vector(n, rng.integer(0, n - 1), m, rng.sign() > 0 ? 1 : -1).lpNorm<Eigen::Infinity>() == m);
  }
}

TEST_CASE("constants") {
  CHECK(recovery_m_limit() == doctest::Approx(1.0327955589886444).epsilon(1e-15));
  CHECK(candidate_threshold(1.02) == doctest::Approx(0.74).epsilon(1e-14));
  CHECK(condition_ii_margin(1.0) == 1.0);
  for (int i = 0; i <= 100; ++i) {
    const double M = 1.0 + 0.001 * i;
    CHECK(std::abs(condition_ii_margin(M) - (16.0 - 15.0 * M * M)) <= 1e-12);
    CHECK((candidate_threshold(M) > 0.0) == (M < 14.0 / 13.0));
  }
}

TEST_CASE("candidate_set examples") {
  const auto exact = oracle_from_map(MapSpec::signed_permutation({2, 0, 3, 1}, {1, 1, 1, 1}));
  const auto set = candidate_set(exact, 1, 0.9, 1.0);
  CHECK(set.indices == std::vector<Eigen::Index>{0});
  CHECK(set.sign == 1);
  CHECK_FALSE(set.ambiguous);

  auto rng = Rng::stream(42, 0);
  Eigen::VectorXd eps = Eigen::VectorXd::Constant(6, 0.02);
  const auto truth = random_signed_permutation(6, rng);
  const auto T = oracle_from_map(
      MapSpec::composite({MapSpec::coordinatewise_vestfrid(eps), MapSpec::signed_permutation(truth.sigma, truth.lambda)}));
  for (Eigen::Index x = 0; x < 6; ++x) {
    const auto c = candidate_set(T, x, 14.0 - 13.0 * 1.02, 1.0);
    // Brute force over every codomain coordinate.
    std::vector<Eigen::Index> expected;
    for (const int s : {1, -1}) {
      const auto plus = T(peak_vector(6, x, 1.0, s));
      const auto minus = T(peak_vector(6, x, 1.0, -s));
      std::vector<Eigen::Index> hits;
      for (Eigen::Index y = 0; y < 6; ++y)
        if (plus(y) >= 0.74 && minus(y) <= -0.74) hits.push_back(y);
      if (!hits.empty() && expected.empty()) expected = hits;
    }
    CHECK(c.indices == expected);
    CHECK(c.indices == std::vector<Eigen::Index>{truth.sigma[x]});
    CHECK(c.sign == truth.lambda[x]);
  }

  OperatorOracle zero{3, 3, [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(3).eval(); }, 1.0, 0.0};
  CHECK(code_of([&] { candidate_set(zero, 0, 0.5, 1.0); }) == Errc::EmptyForBothSigns);
}

TEST_CASE("recover examples") {
  const auto P = MapSpec::signed_permutation({1, 2, 0}, {1, -1, -1});
  const auto rec = recover(oracle_from_map(P));
  CHECK(rec.isometry.sigma == std::vector<Eigen::Index>{1, 2, 0});
  CHECK(rec.isometry.lambda == std::vector<int>{1, -1, -1});
  CHECK(rec.diagnostics.D_used == 1.0);
  CHECK(rec.diagnostics.m_used == 1.0);
  CHECK(rec.diagnostics.eps_M == 0.0);
  CHECK(rec.diagnostics.condition_ii_margin == 1.0);

  auto rng = Rng::stream(43, 0);
  const auto inst = perturbed_permutation(rng, 8, 1.01);
  const auto r = recover(inst.T);
  CHECK(r.isometry.sigma == inst.truth.sigma);
  CHECK(r.isometry.lambda == inst.truth.lambda);
  CHECK(r.diagnostics.D_used == doctest::Approx(14.0 - 13.0 * 1.01));

  auto too_large = inst.T;
  too_large.claimed_M = 1.04;
  CHECK(code_of([&] { recover(too_large); }) == Errc::MTooLarge);
}

TEST_CASE("recover rejects mismatched cardinalities and degenerate oracles") {
  OperatorOracle wide{2, 3,
                      [](const Eigen::VectorXd& f) {
                        Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
                        g.head(2) = f;
                        return g;
                      },
                      1.0, 0.0};
  CHECK(code_of([&] { recover(wide); }) == Errc::CardinalityMismatch);

  // Both inputs land on coordinate 0.
  OperatorOracle collapse{2, 2,
                          [](const Eigen::VectorXd& f) {
                            Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
                            g(0) = f(0) + f(1);
                            return g;
                          },
                          1.0, 0.0};
  CHECK(code_of([&] { recover(collapse); }) == Errc::NotBijective);

  // Each peak lights two coordinates.
  OperatorOracle doubled{2, 2, [](const Eigen::VectorXd& f) { return Eigen::VectorXd::Constant(2, f.sum()).eval(); },
                         1.0, 0.0};
  CHECK(code_of([&] { recover(doubled); }) == Errc::NotSingleValued);
}

TEST_CASE("recover escalates m when L > 0") {
  // A bounded distraction on coordinate y0 makes y0 a candidate for small
  // peaks only; it is the image of index 0, which keeps a + sign.
  auto rng = Rng::stream(44, 0);
  auto truth = random_signed_permutation(5, rng);
  truth.lambda[0] = 1;
  const auto y0 = truth.sigma[0];
  const auto base = oracle_from_map(MapSpec::signed_permutation(truth.sigma, truth.lambda));
  OperatorOracle T{5, 5,
                   [base, y0](const Eigen::VectorXd& f) {
                     Eigen::VectorXd g = base(f);
                     g(y0) += 3.0 * std::clamp(f.sum(), -1.0, 1.0);
                     return g;
                   },
                   1.0, 6.0};
  const auto rec = recover(T);
  CHECK(rec.isometry.sigma == truth.sigma);
  CHECK(rec.isometry.lambda == truth.lambda);
  CHECK(rec.diagnostics.m_escalations == 2);
  CHECK(rec.diagnostics.m_used == 4.0);
}

TEST_CASE("property: recovery round trip and deterministic diagnostics") {
  auto rng = Rng::stream(45, 0);
  const Eigen::Index sizes[] = {2, 4, 8, 16, 32, 64};
  for (int i = 0; i < 60; ++i) {
    const auto inst = perturbed_permutation(rng, sizes[i % 6], 1.0 + rng.uniform(0.0, 0.03));
    const auto a = recover(inst.T);
    const auto b = recover(inst.T);
    CHECK(a.isometry.sigma == inst.truth.sigma);
    CHECK(a.isometry.lambda == inst.truth.lambda);
    CHECK(a.isometry.sigma == b.isometry.sigma);
    CHECK(a.diagnostics.candidate_sets == b.diagnostics.candidate_sets);
    // Singletons persist when the peaks are rescaled.
    for (const double m : {0.5, 3.0, 100.0})
      for (Eigen::Index x = 0; x < inst.T.nX; ++x)
        CHECK(candidate_set(inst.T, x, a.diagnostics.D_used, m).indices.size() == 1);
  }
}

TEST_CASE("stability, sign and modulus checks") {
  const auto P = oracle_from_map(MapSpec::signed_permutation({1, 0, 2}, {-1, 1, 1}));
  const auto I = recover(P).isometry;
  auto rng = Rng::stream(46, 0);
  std::vector<Eigen::VectorXd> fs;
  for (int i = 0; i < 100; ++i) fs.push_back(random_f(rng, 3));
  const auto exact = stability_report(P, I, fs);
  CHECK(exact.sup_excess <= 0.0);
  CHECK(exact.pass);
  for (const auto& f : fs) {
    for (const auto& e : sign_check(P, I, f)) CHECK(e.pass);
    CHECK(modulus_check(P, I, f) <= 0.0);
  }
  for (const auto& e : sign_check(P, I, Eigen::VectorXd::Zero(3))) CHECK_FALSE(e.qualifies);

  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = perturbed_permutation(rng, 16, 1.01);
    const auto R = recover(inst.T).isometry;
    std::vector<Eigen::VectorXd> samples;
    for (int i = 0; i < 200; ++i) samples.push_back(random_f(rng, 16));
    const auto s = stability_report(inst.T, R, samples);
    CHECK(s.pass);
    CHECK(s.max_ratio <= 76.0 * 0.01);
    // Direct evaluation of both sides.
    for (const auto& f : samples) {
      const double lhs = (inst.T(f) - R.apply(f)).lpNorm<Eigen::Infinity>();
      CHECK(lhs <= 76.0 * 0.01 * f.lpNorm<Eigen::Infinity>() + 1e-12);
      CHECK(modulus_check(inst.T, R, f) <= 1e-9);
    }
    Eigen::VectorXd wide(16);
    for (auto& v : wide) v = rng.sign() * rng.uniform(0.31, 1.0);
    for (const auto& e : sign_check(inst.T, R, wide)) {
      CHECK(e.qualifies);
      CHECK(e.pass);
    }
  }
}

TEST_CASE("additive noise gives an empirical Delta of at most 2a") {
  const double a = 0.05;
  const auto base = oracle_from_map(MapSpec::signed_permutation({0, 2, 1}, {1, 1, -1}));
  OperatorOracle T{3, 3,
                   [base, a](const Eigen::VectorXd& f) {
                     Eigen::VectorXd g = base(f);
                     g.array() += a * (f.array() * 7.0).sin();
                     return g;
                   },
                   1.0, 2.0 * a};
  const auto R = recover(T).isometry;
  auto rng = Rng::stream(47, 0);
  std::vector<Eigen::VectorXd> fs;
  for (int i = 0; i < 300; ++i) fs.push_back(random_f(rng, 3) * 10.0);
  CHECK(stability_report(T, R, fs).delta_hat <= 2.0 * a + 1e-12);
}

TEST_CASE("table oracle") {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> rows;
  const auto P = oracle_from_map(MapSpec::signed_permutation({1, 0}, {1, -1}));
  for (Eigen::Index x = 0; x < 2; ++x)
    for (const int s : {1, -1}) {
      const auto f = peak_vector(2, x, 1.0, s);
      rows.emplace_back(f, P(f));
    }
  const auto T = oracle_from_table(rows, 1.0, 0.0);
  const auto rec = recover(T);
  CHECK(rec.isometry.sigma == std::vector<Eigen::Index>{1, 0});
  CHECK(rec.isometry.lambda == std::vector<int>{1, -1});
  CHECK(code_of([&] { T(Eigen::Vector2d(0.5, 0.5)); }) == Errc::NotTabulated);
}
