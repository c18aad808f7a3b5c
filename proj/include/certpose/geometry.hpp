#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Dense>

#include "certpose/errors.hpp"

namespace certpose {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector7d = Eigen::Matrix<double, 7, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Vector12d = Eigen::Matrix<double, 12, 1>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;

/// Cross-product matrix: skew(t) * w == t.cross(w).
inline Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
  Eigen::Matrix3d s;
  s << 0.0, -t.z(), t.y(),  //
      t.z(), 0.0, -t.x(),   //
      -t.y(), t.x(), 0.0;
  return s;
}

/// Column-major vectorization. With E's entries labelled row-wise e1..e9 the
/// result is (e1, e4, e7, e2, e5, e8, e3, e6, e9).
inline Vector9d vec(const Eigen::Matrix3d& m) {
  return Eigen::Map<const Vector9d>(m.data());
}

inline Eigen::Matrix3d unvec(const Vector9d& v) {
  return Eigen::Map<const Eigen::Matrix3d>(v.data());
}

/// A direction on the unit sphere.
class UnitVector3 {
 public:
  static constexpr double kTolerance = 1e-12;

  UnitVector3() : v_(Eigen::Vector3d::UnitZ()) {}

  /// Throws InvalidArgument unless |v| = 1 within kTolerance.
  explicit UnitVector3(const Eigen::Vector3d& v) : v_(v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > kTolerance) {
      throw InvalidArgument("UnitVector3: vector is not unit norm");
    }
  }

  /// Rescales v onto the sphere; throws DegenerateInput for a (near) zero v.
  static UnitVector3 normalized(const Eigen::Vector3d& v) {
    const double n = v.norm();
    if (!(n > 1e-300) || !std::isfinite(n)) {
      throw DegenerateInput("UnitVector3: cannot normalize a zero vector");
    }
    UnitVector3 u;
    u.v_ = v / n;
    return u;
  }

  const Eigen::Vector3d& vector() const { return v_; }
  double operator[](int i) const { return v_[i]; }

 private:
  Eigen::Vector3d v_;
};

/// An element of SO(3).
class Rotation3 {
 public:
  static constexpr double kTolerance = 1e-10;

  Rotation3() : m_(Eigen::Matrix3d::Identity()) {}

  /// Throws InvalidArgument unless m is orthogonal with det +1.
  explicit Rotation3(const Eigen::Matrix3d& m) : m_(m) {
    if (!m.allFinite() ||
        (m.transpose() * m - Eigen::Matrix3d::Identity()).norm() > kTolerance ||
        std::abs(m.determinant() - 1.0) > kTolerance) {
      throw InvalidArgument("Rotation3: matrix is not in SO(3)");
    }
  }

  /// Rotation by |w| radians about w / |w|.
  static Rotation3 exp(const Eigen::Vector3d& w) {
    const double angle = w.norm();
    Rotation3 r;
    if (angle > 0.0) {
      r.m_ = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
    }
    return r;
  }

  /// Closest rotation in Frobenius norm.
  static Rotation3 nearest(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    Rotation3 r;
    r.m_ = svd.matrixU() * d * svd.matrixV().transpose();
    return r;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  Rotation3 operator*(const Rotation3& other) const {
    Rotation3 r;
    r.m_ = m_ * other.m_;
    return r;
  }

  Rotation3 inverse() const {
    Rotation3 r;
    r.m_ = m_.transpose();
    return r;
  }

 private:
  Eigen::Matrix3d m_;
};

/// One correspondence: f observed in camera 1, f_prime in camera 2, such that
/// f^T E f_prime = 0 for noiseless data.
struct BearingPair {
  UnitVector3 f;
  UnitVector3 f_prime;
};

/// Normalized essential matrix E = skew(t) R together with its factorization.
///
/// The pose convention is X1 = R * X2 + t: R and t map points from the second
/// camera frame into the first. E and -E describe the same epipolar geometry;
/// the sign is resolved only by recover_pose.
class EssentialElement {
 public:
  EssentialElement() : EssentialElement(Rotation3{}, UnitVector3{}) {}

  EssentialElement(const Rotation3& r, const UnitVector3& t)
      : e_(skew(t.vector()) * r.matrix()), r_(r), t_(t) {}

  const Eigen::Matrix3d& matrix() const { return e_; }
  const Rotation3& rotation() const { return r_; }
  const UnitVector3& translation() const { return t_; }

 private:
  Eigen::Matrix3d e_;
  Rotation3 r_;
  UnitVector3 t_;
};

inline EssentialElement essential_from_pose(const Rotation3& r, const UnitVector3& t) {
  return EssentialElement(r, t);
}

/// The 12-vector x = [vec(E); t].
class PrimalPoint {
 public:
  explicit PrimalPoint(const EssentialElement& p) {
    x_.head<9>() = vec(p.matrix());
    x_.tail<3>() = p.translation().vector();
  }

  /// Wraps an arbitrary vector whose translation block is unit norm. The E
  /// block is not checked; certification decides what to do with it.
  static PrimalPoint from_vector(const Vector12d& x) {
    if (!x.allFinite() || std::abs(x.tail<3>().norm() - 1.0) > UnitVector3::kTolerance) {
      throw InvalidArgument("PrimalPoint: translation block is not unit norm");
    }
    return PrimalPoint(x);
  }

  const Vector12d& vector() const { return x_; }
  Eigen::Matrix3d essential() const { return unvec(x_.head<9>()); }
  Eigen::Vector3d translation() const { return x_.tail<3>(); }

 private:
  explicit PrimalPoint(const Vector12d& x) : x_(x) {}
  Vector12d x_;
};

namespace detail {

// Rotation by +90 degrees about z.
inline Eigen::Matrix3d w_matrix() {
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  return w;
}

// SVD of an (approximately) essential matrix with det(U) = det(V) = +1. The
// third singular vectors may be flipped freely because sigma_3 is discarded.
struct ProperSvd {
  Eigen::Matrix3d u;
  Eigen::Matrix3d v;
  Eigen::Vector3d sigma;
};

inline ProperSvd proper_svd(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProperSvd out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.u.determinant() < 0.0) out.u.col(2) *= -1.0;
  if (out.v.determinant() < 0.0) out.v.col(2) *= -1.0;
  return out;
}

}  // namespace detail

/// Nearest matrix with singular values (1, 1, 0), returned with a valid
/// (R, t) factorization. Throws DegenerateInput when rank(m) < 2.
inline EssentialElement project_to_essential(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw DegenerateInput("project_to_essential: non-finite input");
  const detail::ProperSvd svd = detail::proper_svd(m);
  if (!(svd.sigma[0] > 0.0) || svd.sigma[1] <= 1e-12 * svd.sigma[0]) {
    throw DegenerateInput("project_to_essential: matrix has rank < 2");
  }
  // skew(U e3) U W^T V^T = U W diag(1,1,0) W^T V^T = U diag(1,1,0) V^T.
  const Rotation3 r = Rotation3::nearest(svd.u * detail::w_matrix().transpose() * svd.v.transpose());
  const UnitVector3 t = UnitVector3::normalized(svd.u.col(2));
  return EssentialElement(r, t);
}

/// Geodesic angle between two rotations, in degrees, within [0, 180].
inline double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  // atan2 of the sine and cosine parts stays accurate near 0 and 180 degrees.
  const Eigen::Matrix3d r = a.transpose() * b;
  const double s = 0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

/// Depths (d1, d2) with d1 f = d2 R f' + t, solved in the least-squares sense.
/// Returns false for (near) parallel rays.
inline bool triangulate_depths(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                               const Eigen::Vector3d& f, const Eigen::Vector3d& f_prime,
                               double& d1, double& d2) {
  const Eigen::Vector3d g = r * f_prime;
  const double c = f.dot(g);
  const double det = 1.0 - c * c;
  if (det < 1e-12) return false;
  const double ft = f.dot(t);
  const double gt = g.dot(t);
  // Normal equations of [f, -g] [d1; d2] = t.
  d1 = (ft - c * gt) / det;
  d2 = (c * ft - gt) / det;
  return true;
}

/// Recovers (R, t) from an essential matrix by cheirality voting over the four
/// SVD candidates. Throws DegenerateInput if no candidate puts any point in
/// front of both cameras.
inline EssentialElement recover_pose(const Eigen::Matrix3d& e, std::span<const BearingPair> pairs) {
  if (pairs.empty()) throw EmptyInput("recover_pose: no correspondences");
  const detail::ProperSvd svd = detail::proper_svd(e);
  if (!(svd.sigma[0] > 0.0) || svd.sigma[1] <= 1e-12 * svd.sigma[0]) {
    throw DegenerateInput("recover_pose: matrix has rank < 2");
  }
  const Eigen::Matrix3d w = detail::w_matrix();
  const std::array<Eigen::Matrix3d, 2> rotations = {
      svd.u * w * svd.v.transpose(), svd.u * w.transpose() * svd.v.transpose()};
  const Eigen::Vector3d t0 = svd.u.col(2);

  constexpr double kMinDepth = 1e-9;
  int best_count = 0;
  Eigen::Matrix3d best_r = rotations[0];
  Eigen::Vector3d best_t = t0;
  for (const auto& r : rotations) {
    for (const double sign : {1.0, -1.0}) {
      const Eigen::Vector3d t = sign * t0;
      int count = 0;
      for (const auto& p : pairs) {
        double d1 = 0.0;
        double d2 = 0.0;
        if (triangulate_depths(r, t, p.f.vector(), p.f_prime.vector(), d1, d2) &&
            d1 > kMinDepth && d2 > kMinDepth) {
          ++count;
        }
      }
      if (count > best_count) {
        best_count = count;
        best_r = r;
        best_t = t;
      }
    }
  }
  if (best_count == 0) {
    throw DegenerateInput("recover_pose: no candidate pose has points in front of both cameras");
  }
  return EssentialElement(Rotation3::nearest(best_r), UnitVector3::normalized(best_t));
}

}  // namespace certpose
