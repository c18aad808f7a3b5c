#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/problem.hpp"

// Closed-form Lagrangian-dual optimality certificate for the relaxed QCQP.
//
// Given a feasible x, the multipliers solve J(x) lambda = Q x in the least-
// squares sense. With d(lambda) = lambda_1, x is certified globally optimal
// when M(lambda) = Q - sum lambda_i A_i is (numerically) PSD and the duality
// gap |x^T Q x - lambda_1| vanishes.

namespace certpose {

enum class GapMode {
  /// |f - d| <= tau_gap.
  kAbsolute,
  /// |f - d| / max(f, relative_gap_floor) <= tau_gap.
  kRelative,
};

enum class Verdict { kOptimal, kUnknown };

inline const char* to_string(Verdict v) { return v == Verdict::kOptimal ? "optimal" : "unknown"; }

struct CertifierConfig {
  double tau_mu = -0.02;
  double tau_gap = 1e-14;
  GapMode gap_mode = GapMode::kAbsolute;
  double relative_gap_floor = 1e-6;
  /// Largest constraint residual accepted as feasible.
  double feasibility_tolerance = 1e-6;
  /// Smallest singular value of J(x) below which multipliers are not unique.
  double rank_tolerance = 1e-10;

  void validate() const {
    if (!(tau_mu <= 0.0)) throw InvalidArgument("CertifierConfig: tau_mu must be <= 0");
    if (!(tau_gap >= 0.0)) throw InvalidArgument("CertifierConfig: tau_gap must be >= 0");
    if (!(relative_gap_floor > 0.0)) throw InvalidArgument("CertifierConfig: relative_gap_floor must be > 0");
    if (!(feasibility_tolerance > 0.0) || !(rank_tolerance > 0.0)) {
      throw InvalidArgument("CertifierConfig: tolerances must be > 0");
    }
  }

  /// Paper defaults with the gap measured relative to the cost.
  static CertifierConfig relative(double tau_gap_rel = 1e-10) {
    CertifierConfig cfg;
    cfg.gap_mode = GapMode::kRelative;
    cfg.tau_gap = tau_gap_rel;
    return cfg;
  }
};

struct DualCandidate {
  Vector6d lambda = Vector6d::Zero();
  /// |J lambda - Q x|.
  double residual = 0.0;
  double jacobian_min_singular_value = 0.0;
};

struct CertificateReport {
  Vector6d lambda_hat = Vector6d::Zero();
  double primal_cost = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  /// The quantity compared with tau_gap (equal to gap in absolute mode).
  double gap_measure = 0.0;
  double min_eigenvalue = 0.0;
  double residual = 0.0;
  double jacobian_min_singular_value = 0.0;
  bool rank_deficient = false;
  Verdict verdict = Verdict::kUnknown;
};

/// Largest |h_i(x)| over the six relaxed constraints.
inline double max_constraint_violation(const Vector12d& x) {
  Vector6d h;
  const auto& a = constraint_matrices();
  for (int i = 0; i < 6; ++i) h[i] = x.dot(a[i] * x);
  h[0] -= 1.0;
  return h.cwiseAbs().maxCoeff();
}

/// Least-squares multipliers for J(x) lambda = Q x. Throws InfeasiblePoint
/// when x violates the constraints by more than the configured tolerance and
/// RankDeficientJacobian when LICQ fails at x.
inline DualCandidate dual_candidate(const ProblemData& data, const PrimalPoint& x_hat,
                                    const CertifierConfig& cfg = {}) {
  const Vector12d& x = x_hat.vector();
  if (max_constraint_violation(x) > cfg.feasibility_tolerance) {
    throw InfeasiblePoint("dual_candidate: point violates the relaxed constraints");
  }
  const Matrix12x6d j = constraint_jacobian(x);
  const Eigen::JacobiSVD<Matrix12x6d> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
  DualCandidate out;
  out.jacobian_min_singular_value = svd.singularValues()[5];
  if (!(out.jacobian_min_singular_value > cfg.rank_tolerance)) {
    throw RankDeficientJacobian("dual_candidate: constraint Jacobian is rank deficient");
  }
  Vector12d qx = Vector12d::Zero();
  qx.head<9>() = apply_c(data, x.head<9>());
  out.lambda = svd.solve(qx);
  out.residual = (j * out.lambda - qx).norm();
  return out;
}

/// M(lambda) = Q - sum_i lambda_i A_i.
inline Matrix12d hessian_of_lagrangian(const ProblemData& data, const Vector6d& lambda) {
  Matrix12d m = data.q;
  for (int i = 0; i < 6; ++i) m -= lambda[i] * data.a[i];
  return m;
}

/// Smallest eigenvalue of a symmetric 12x12 matrix.
inline double min_eigenvalue(const Matrix12d& m) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidArgument("min_eigenvalue: matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix12d> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

/// Verifies optimality of a feasible x. A failed constraint qualification
/// yields verdict Unknown with rank_deficient set, never Optimal.
inline CertificateReport certify(const ProblemData& data, const PrimalPoint& x_hat, const CertifierConfig& cfg = {}) {
  cfg.validate();
  CertificateReport report;
  report.primal_cost = cost(data, x_hat);
  DualCandidate dual;
  try {
    dual = dual_candidate(data, x_hat, cfg);
  } catch (const RankDeficientJacobian&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.rank_deficient = true;
    report.dual_value = nan;
    report.gap = nan;
    report.gap_measure = nan;
    report.min_eigenvalue = nan;
    report.residual = nan;
    report.verdict = Verdict::kUnknown;
    return report;
  }
  report.lambda_hat = dual.lambda;
  report.residual = dual.residual;
  report.jacobian_min_singular_value = dual.jacobian_min_singular_value;
  report.dual_value = dual.lambda[0];
  report.gap = std::abs(report.primal_cost - report.dual_value);
  report.gap_measure = cfg.gap_mode == GapMode::kAbsolute
                           ? report.gap
                           : report.gap / std::max(report.primal_cost, cfg.relative_gap_floor);
  report.min_eigenvalue = min_eigenvalue(hessian_of_lagrangian(data, dual.lambda));
  report.verdict = (report.min_eigenvalue >= cfg.tau_mu && report.gap_measure <= cfg.tau_gap) ? Verdict::kOptimal
                                                                                              : Verdict::kUnknown;
  return report;
}

inline CertificateReport certify(const ProblemData& data, const EssentialElement& e, const CertifierConfig& cfg = {}) {
  return certify(data, PrimalPoint(e), cfg);
}

}  // namespace certpose
