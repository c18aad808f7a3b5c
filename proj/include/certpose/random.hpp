#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

#include "certpose/geometry.hpp"

namespace certpose {

using Rng = std::mt19937_64;

/// Seeds a generator from a list of integers (master seed, cell, trial, ...).
/// The mapping is fixed so runs are reproducible across processes.
inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::seed_seq seq(keys.begin(), keys.end());
  return Rng(seq);
}

inline Eigen::Vector3d random_gaussian3(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return {x, y, z};
}

/// Uniform on the sphere.
inline UnitVector3 random_unit_vector(Rng& rng) {
  for (;;) {
    const Eigen::Vector3d g = random_gaussian3(rng);
    if (g.norm() > 1e-8) return UnitVector3::normalized(g);
  }
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
inline Rotation3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const double w = n(rng);
    const double x = n(rng);
    const double y = n(rng);
    const double z = n(rng);
    Eigen::Quaterniond q(w, x, y, z);
    if (q.norm() > 1e-8) {
      q.normalize();
      return Rotation3::nearest(q.toRotationMatrix());
    }
  }
}

/// Any orthonormal pair spanning the plane orthogonal to the unit vector u.
inline void tangent_basis(const Eigen::Vector3d& u, Eigen::Vector3d& b1, Eigen::Vector3d& b2) {
  const Eigen::Vector3d helper =
      std::abs(u.x()) < 0.6 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  b1 = u.cross(helper).normalized();
  b2 = u.cross(b1);
}

}  // namespace certpose
