#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/problem.hpp"
#include "certpose/random.hpp"

// Riemannian trust-region refinement on the essential manifold, parameterized
// as SO(3) x S^2 through E = skew(t) R.

namespace certpose {

using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix9x5d = Eigen::Matrix<double, 9, 5>;

/// Tangent vector at (R, t): R is perturbed as R exp(skew(omega)), t along dt
/// with dt orthogonal to t. The metric is omega.omega' + dt.dt'.
struct TangentVector {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d dt = Eigen::Vector3d::Zero();

  double dot(const TangentVector& other) const { return omega.dot(other.omega) + dt.dot(other.dt); }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline TangentVector operator*(double s, const TangentVector& v) { return {s * v.omega, s * v.dt}; }
inline TangentVector operator+(const TangentVector& a, const TangentVector& b) {
  return {a.omega + b.omega, a.dt + b.dt};
}

struct RtrConfig {
  int max_outer_iterations = 100;
  double gradient_norm_tolerance = 1e-10;
  double initial_trust_radius = 0.1;
  double max_trust_radius = 1.0;
  /// Minimum ratio of actual to predicted decrease for accepting a step.
  double acceptance_ratio = 0.1;
  int max_inner_iterations = 25;
  double tcg_theta = 1.0;
  double tcg_kappa = 0.1;

  void validate() const {
    if (max_outer_iterations < 1 || max_inner_iterations < 1 || !(gradient_norm_tolerance > 0.0) ||
        !(initial_trust_radius > 0.0) || !(max_trust_radius >= initial_trust_radius) || !(tcg_theta > 0.0) ||
        !(tcg_kappa > 0.0)) {
      throw InvalidArgument("RtrConfig: parameters must be positive");
    }
    if (!(acceptance_ratio > 0.0 && acceptance_ratio <= 0.25)) {
      throw InvalidArgument("RtrConfig: acceptance_ratio must be in (0, 1/4]");
    }
  }
};

struct SolveReport {
  EssentialElement solution;
  double final_cost = 0.0;
  double gradient_norm = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  /// Gradient tolerance met, or the Newton step's predicted decrease fell
  /// below the round-off level of the cost.
  bool converged = false;
  /// Cost at the initial point and after every accepted step.
  std::vector<double> cost_trace;
};

namespace detail {

// Entries of M paired with skew(a): <M, skew(a)> = a . skew_pairing(M).
inline Eigen::Vector3d skew_pairing(const Eigen::Matrix3d& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

inline Eigen::Matrix3d euclidean_gradient(const ProblemData& data, const Eigen::Matrix3d& e) {
  return unvec(2.0 * apply_c(data, vec(e)));
}

// Orthonormal frame of the tangent space: three rotation directions followed
// by two sphere directions.
struct TangentFrame {
  Eigen::Vector3d b1;
  Eigen::Vector3d b2;

  explicit TangentFrame(const Eigen::Vector3d& t) { tangent_basis(t, b1, b2); }

  TangentVector vector(const Vector5d& c) const { return {c.head<3>(), c[3] * b1 + c[4] * b2}; }
  Vector5d coordinates(const TangentVector& v) const {
    Vector5d c;
    c << v.omega, b1.dot(v.dt), b2.dot(v.dt);
    return c;
  }
};

// Second-derivative term <G, E''> of the chart, polarized into a bilinear form.
inline double curvature_term(const Eigen::Matrix3d& g, const EssentialElement& p, const TangentVector& a,
                             const TangentVector& b) {
  const Eigen::Matrix3d& e = p.matrix();
  const Eigen::Matrix3d& r = p.rotation().matrix();
  const Eigen::Matrix3d sa = skew(a.omega);
  const Eigen::Matrix3d sb = skew(b.omega);
  const Eigen::Matrix3d second = -a.dt.dot(b.dt) * e + skew(a.dt) * r * sb + skew(b.dt) * r * sa +
                                 0.5 * e * (sa * sb + sb * sa);
  return (g.array() * second.array()).sum();
}

}  // namespace detail

/// dE = skew(dt) R + E skew(omega).
inline Eigen::Matrix3d differential(const EssentialElement& p, const TangentVector& xi) {
  return skew(xi.dt) * p.rotation().matrix() + p.matrix() * skew(xi.omega);
}

/// Projects an ambient pair (omega, dt) onto the tangent space at p.
inline TangentVector project_tangent(const EssentialElement& p, const TangentVector& v) {
  const Eigen::Vector3d& t = p.translation().vector();
  return {v.omega, v.dt - t.dot(v.dt) * t};
}

/// R exp(skew(omega)), (t + dt) / |t + dt|.
inline EssentialElement retract(const EssentialElement& p, const TangentVector& xi) {
  const Rotation3 r = p.rotation() * Rotation3::exp(xi.omega);
  const UnitVector3 t = UnitVector3::normalized(p.translation().vector() + xi.dt);
  return EssentialElement(r, t);
}

inline TangentVector riemannian_gradient(const ProblemData& data, const EssentialElement& p) {
  const Eigen::Matrix3d g = detail::euclidean_gradient(data, p.matrix());
  const TangentVector ambient{detail::skew_pairing(p.matrix().transpose() * g),
                              detail::skew_pairing(g * p.rotation().matrix().transpose())};
  return project_tangent(p, ambient);
}

/// Quadratic model of the pullback f(retract(p, .)) in the frame's coordinates.
struct LocalModel {
  double cost = 0.0;
  Vector5d gradient = Vector5d::Zero();
  Matrix5d hessian = Matrix5d::Zero();
};

inline LocalModel local_model(const ProblemData& data, const EssentialElement& p, const detail::TangentFrame& frame) {
  LocalModel m;
  m.cost = cost(data, p.matrix());
  m.gradient = frame.coordinates(riemannian_gradient(data, p));
  const Eigen::Matrix3d g = detail::euclidean_gradient(data, p.matrix());
  Matrix9x5d d;
  std::array<TangentVector, 5> basis;
  for (int k = 0; k < 5; ++k) {
    basis[k] = frame.vector(Vector5d::Unit(k));
    d.col(k) = vec(differential(p, basis[k]));
  }
  const Matrix9x5d rd = data.c_sqrt * d;
  m.hessian = 2.0 * rd.transpose() * rd;
  for (int k = 0; k < 5; ++k) {
    for (int l = k; l < 5; ++l) {
      const double s = detail::curvature_term(g, p, basis[k], basis[l]);
      m.hessian(k, l) += s;
      if (l != k) m.hessian(l, k) += s;
    }
  }
  return m;
}

/// Hessian of the pullback cost applied to xi.
inline TangentVector riemannian_hessian_vec(const ProblemData& data, const EssentialElement& p,
                                            const TangentVector& xi) {
  const detail::TangentFrame frame(p.translation().vector());
  const LocalModel m = local_model(data, p, frame);
  return frame.vector(m.hessian * frame.coordinates(xi));
}

namespace detail {

struct TcgResult {
  Vector5d step = Vector5d::Zero();
  int iterations = 0;
  bool hit_boundary = false;
};

// Steihaug-Toint truncated CG for min g.s + s.H.s/2 subject to |s| <= radius.
inline TcgResult truncated_cg(const Matrix5d& h, const Vector5d& g, double radius, const RtrConfig& cfg) {
  TcgResult out;
  Vector5d eta = Vector5d::Zero();
  Vector5d r = g;
  Vector5d delta = -r;
  const double r0 = r.norm();
  double rr = r.squaredNorm();
  const double stop = r0 * std::min(std::pow(r0, cfg.tcg_theta), cfg.tcg_kappa);

  for (int j = 0; j < cfg.max_inner_iterations; ++j) {
    ++out.iterations;
    const Vector5d h_delta = h * delta;
    const double curvature = delta.dot(h_delta);
    const double alpha = rr / curvature;
    const Vector5d trial = eta + alpha * delta;
    if (curvature <= 0.0 || trial.squaredNorm() >= radius * radius) {
      // Step to the boundary along delta.
      const double dd = delta.squaredNorm();
      const double ed = eta.dot(delta);
      const double ee = eta.squaredNorm();
      const double tau = (-ed + std::sqrt(ed * ed + dd * (radius * radius - ee))) / dd;
      eta += tau * delta;
      out.hit_boundary = true;
      break;
    }
    eta = trial;
    r += alpha * h_delta;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= stop) break;
    delta = -r + (rr_new / rr) * delta;
    rr = rr_new;
  }
  out.step = eta;
  return out;
}

}  // namespace detail

/// Riemannian trust-region with truncated-CG inner solves. Throws NonFiniteCost
/// if the cost or gradient stops being finite.
inline SolveReport solve_rtr(const ProblemData& data, const EssentialElement& init, const RtrConfig& cfg = {}) {
  cfg.validate();
  SolveReport report;
  EssentialElement x = init;
  detail::TangentFrame frame(x.translation().vector());
  LocalModel model = local_model(data, x, frame);
  if (!std::isfinite(model.cost) || !model.gradient.allFinite()) {
    throw NonFiniteCost("solve_rtr: non-finite cost or gradient at the initial point");
  }
  report.cost_trace.push_back(model.cost);
  double radius = cfg.initial_trust_radius;

  for (int k = 0; k < cfg.max_outer_iterations; ++k) {
    if (model.gradient.norm() <= cfg.gradient_norm_tolerance) {
      report.converged = true;
      break;
    }
    ++report.outer_iterations;
    const detail::TcgResult tcg = detail::truncated_cg(model.hessian, model.gradient, radius, cfg);
    report.inner_iterations += tcg.iterations;

    const EssentialElement candidate = retract(x, frame.vector(tcg.step));
    const double new_cost = cost(data, candidate.matrix());
    if (!std::isfinite(new_cost)) throw NonFiniteCost("solve_rtr: non-finite cost");

    const double predicted = -(model.gradient.dot(tcg.step) + 0.5 * tcg.step.dot(model.hessian * tcg.step));
    // Regularized ratio; keeps rho meaningful when both decreases reach round-off.
    const double reg = std::abs(model.cost) * std::numeric_limits<double>::epsilon() * 1e3;
    if (!tcg.hit_boundary && predicted <= reg) {
      report.converged = true;
      break;
    }
    const double rho = (model.cost - new_cost + reg) / (predicted + reg);

    if (rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75 && tcg.hit_boundary) {
      radius = std::min(2.0 * radius, cfg.max_trust_radius);
    }

    if (rho > cfg.acceptance_ratio && predicted >= 0.0 && new_cost <= model.cost) {
      x = candidate;
      frame = detail::TangentFrame(x.translation().vector());
      model = local_model(data, x, frame);
      if (!model.gradient.allFinite()) throw NonFiniteCost("solve_rtr: non-finite gradient");
      report.cost_trace.push_back(model.cost);
    }
  }
  if (!report.converged && model.gradient.norm() <= cfg.gradient_norm_tolerance) report.converged = true;

  // Clean accumulated round-off off the rotation before handing it out.
  report.solution = EssentialElement(Rotation3::nearest(x.rotation().matrix()), x.translation());
  report.final_cost = cost(data, report.solution.matrix());
  report.gradient_norm = riemannian_gradient(data, report.solution).norm();
  return report;
}

}  // namespace certpose
