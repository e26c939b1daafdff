#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "isoperturb/spaces.hpp"

namespace isoperturb {

// Black-box map between finite sup-norm spaces R^nX -> R^nY, claimed to be a
// phi-isometry for phi(t) = claimed_M t + claimed_L with T(0) = 0.
struct OperatorOracle {
  Eigen::Index nX = 0;
  Eigen::Index nY = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  double claimed_M = 1.0;
  double claimed_L = 0.0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& f) const;
};

// Wraps an analytic map acting on the sup-norm space of its dimension.
OperatorOracle oracle_from_map(const MapSpec& map);

// Lookup table of (input, output) rows; inputs not in the table raise
// NotTabulated. Matching tolerance is 1e-12 in the sup norm.
OperatorOracle oracle_from_table(std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> rows, double claimed_M,
                                 double claimed_L);

// sqrt(16/15): largest M for which recovery is attempted.
double recovery_m_limit() noexcept;

// 14 - 13 M
double candidate_threshold(double M) noexcept;

// 1 - eps(M) M - eps(M) with eps(M) = 2M - 1 - (14 - 13M).
double condition_ii_margin(double M) noexcept;

// sign * m * e_x in R^n.
Eigen::VectorXd peak_vector(Eigen::Index n, Eigen::Index x, double m, int sign);

struct CandidateSet {
  std::vector<Eigen::Index> indices;
  int sign = 1;
  bool ambiguous = false;  // both signs produced non-empty sets
};

// {y : T(s m e_x)(y) >= D m and T(-s m e_x)(y) <= -D m} for the sign s that
// makes it non-empty. Throws EmptyForBothSigns.
CandidateSet candidate_set(const OperatorOracle& T, Eigen::Index x, double D, double m);

struct RecoveredIsometry {
  std::vector<Eigen::Index> sigma;
  std::vector<int> lambda;

  // (If)(sigma(x)) = lambda(x) f(x)
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
};

struct RecoveryDiagnostics {
  double D_used = 0.0;
  double m_used = 0.0;
  double eps_M = 0.0;
  double condition_ii_margin = 0.0;
  int m_escalations = 0;
  std::vector<std::vector<Eigen::Index>> candidate_sets;  // at m_used
  std::vector<int> candidate_signs;
  std::string last_failure;
};

struct Recovery {
  RecoveredIsometry isometry;
  RecoveryDiagnostics diagnostics;
};

struct RecoveryOptions {
  int max_doublings = 20;  // m runs through 1, 2, ..., 2^max_doublings when L > 0
};

// Throws MTooLarge, CardinalityMismatch, ConditionIIViolated, and
// NotSingleValued / NotBijective once the m schedule is exhausted. The
// error message carries the diagnostics of the last attempt.
Recovery recover(const OperatorOracle& T, const RecoveryOptions& options = {});

struct StabilityReport {
  double sup_excess = 0.0;  // max ||Tf - If|| - 76(M-1)||f||
  double delta_hat = 0.0;   // max(0, sup_excess)
  double max_ratio = 0.0;   // max ||Tf - If|| / ||f||
  bool pass = false;        // L = 0: sup_excess <= 1e-9
};

StabilityReport stability_report(const OperatorOracle& T, const RecoveredIsometry& R,
                                 const std::vector<Eigen::VectorXd>& samples);

struct SignCheckEntry {
  Eigen::Index x = 0;
  bool qualifies = false;  // |f(x)| > 30(M-1)||f||
  bool pass = true;
};

std::vector<SignCheckEntry> sign_check(const OperatorOracle& T, const RecoveredIsometry& R,
                                       const Eigen::VectorXd& f);

// max_x ||Tf(sigma x)| - |f(x)|| - 15(M^2 - M)||f||
double modulus_check(const OperatorOracle& T, const RecoveredIsometry& R, const Eigen::VectorXd& f);

}  // namespace isoperturb
