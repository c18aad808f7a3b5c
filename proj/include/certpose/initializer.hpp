#pragma once

#include <algorithm>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/problem.hpp"
#include "certpose/random.hpp"

namespace certpose {

enum class InitMethod { kEightPoint, kIdentity, kRandom };

/// Linear 8-point estimate on bearing vectors followed by projection onto the
/// essential set. No Hartley normalization: unit bearings are already well
/// conditioned.
inline EssentialElement eight_point(std::span<const BearingPair> pairs) {
  if (pairs.size() < 8) throw InsufficientData("eight_point: need at least 8 correspondences");
  // Pad to at least 9 rows so the full 9x9 right singular basis and all nine
  // singular values are available when N == 8.
  const Eigen::Index rows = std::max<Eigen::Index>(9, static_cast<Eigen::Index>(pairs.size()));
  Eigen::Matrix<double, Eigen::Dynamic, 9> a = Eigen::Matrix<double, Eigen::Dynamic, 9>::Zero(rows, 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    a.row(static_cast<Eigen::Index>(i)) = kron(pairs[i].f_prime.vector(), pairs[i].f.vector()).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s[7] - s[8] <= 1e-12 * s[0]) {
    throw DegenerateConfiguration("eight_point: null space of the design matrix is not one-dimensional");
  }
  const Vector9d e = svd.matrixV().col(8);
  try {
    return project_to_essential(unvec(e));
  } catch (const DegenerateInput&) {
    throw DegenerateConfiguration("eight_point: linear solution has rank < 2");
  }
}

/// Uniform random rotation and translation direction, deterministic per seed.
inline EssentialElement random_essential(std::uint64_t seed) {
  Rng rng = make_rng({seed, 0xE55E17ull});
  const Rotation3 r = random_rotation(rng);
  const UnitVector3 t = random_unit_vector(rng);
  return essential_from_pose(r, t);
}

/// The canonical element R = I, t = e3, i.e. E = skew(e3).
inline EssentialElement identity_init() {
  return essential_from_pose(Rotation3{}, UnitVector3(Eigen::Vector3d::UnitZ()));
}

inline EssentialElement initialize(InitMethod method, std::span<const BearingPair> pairs, std::uint64_t seed) {
  switch (method) {
    case InitMethod::kEightPoint:
      return eight_point(pairs);
    case InitMethod::kIdentity:
      return identity_init();
    case InitMethod::kRandom:
      return random_essential(seed);
  }
  return identity_init();
}

}  // namespace certpose
