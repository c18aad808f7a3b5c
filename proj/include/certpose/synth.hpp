#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/random.hpp"

namespace certpose {

enum class NoiseModel {
  /// Uniform direction in the tangent plane, magnitude uniform in [0, noise_px].
  kUniform,
  /// Isotropic Gaussian in the tangent plane, standard deviation noise_px.
  kGaussian,
};

struct SceneConfig {
  int n_points = 20;
  double noise_px = 0.0;
  double focal_px = 800.0;
  double fov_deg = 100.0;
  double parallax_min = 0.5;
  double parallax_max = 2.0;
  double depth_min = 1.0;
  double depth_max = 8.0;
  std::uint64_t seed = 0;
  NoiseModel noise_model = NoiseModel::kUniform;
  /// Cap on rejected samples (poses and points) per problem.
  int max_attempts = 10000;

  void validate() const {
    if (n_points < 5) throw InvalidArgument("SceneConfig: n_points must be >= 5");
    if (!(noise_px >= 0.0)) throw InvalidArgument("SceneConfig: noise_px must be >= 0");
    if (!(focal_px > 0.0)) throw InvalidArgument("SceneConfig: focal_px must be > 0");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw InvalidArgument("SceneConfig: fov_deg must be in (0, 180)");
    if (!(parallax_min > 0.0 && parallax_min <= parallax_max)) {
      throw InvalidArgument("SceneConfig: need 0 < parallax_min <= parallax_max");
    }
    if (!(depth_min > 0.0 && depth_min <= depth_max)) {
      throw InvalidArgument("SceneConfig: need 0 < depth_min <= depth_max");
    }
    if (max_attempts < 1) throw InvalidArgument("SceneConfig: max_attempts must be >= 1");
  }
};

struct SyntheticProblem {
  std::vector<BearingPair> pairs;
  /// Ground-truth points in the first camera frame.
  std::vector<Eigen::Vector3d> points;
  Rotation3 gt_rotation;
  /// Direction of the metric translation.
  UnitVector3 gt_translation;
  double baseline = 1.0;
  EssentialElement gt_essential;
  SceneConfig config;
};

namespace detail {

inline bool inside_cone(const Eigen::Vector3d& p, double cos_half_fov) {
  const double n = p.norm();
  return p.z() > 0.0 && n > 0.0 && p.z() >= cos_half_fov * n;
}

// Perturbs a bearing vector inside its tangent plane and renormalizes.
inline Eigen::Vector3d add_tangent_noise(const Eigen::Vector3d& f, const SceneConfig& cfg, Rng& rng) {
  if (cfg.noise_px == 0.0) return f;
  Eigen::Vector3d b1;
  Eigen::Vector3d b2;
  tangent_basis(f, b1, b2);
  Eigen::Vector3d offset;
  if (cfg.noise_model == NoiseModel::kUniform) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> magnitude(0.0, cfg.noise_px / cfg.focal_px);
    const double a = angle(rng);
    const double m = magnitude(rng);
    offset = m * (std::cos(a) * b1 + std::sin(a) * b2);
  } else {
    std::normal_distribution<double> n(0.0, cfg.noise_px / cfg.focal_px);
    const double u = n(rng);
    const double v = n(rng);
    offset = u * b1 + v * b2;
  }
  return (f + offset).normalized();
}

// Orientation (camera-to-world) of a camera at `center` looking at `target`
// with the given roll about its optical axis.
inline Eigen::Matrix3d look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target, double roll) {
  const Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d x;
  Eigen::Vector3d y;
  tangent_basis(z, x, y);
  const Eigen::Vector3d xr = std::cos(roll) * x + std::sin(roll) * y;
  Eigen::Matrix3d r;
  r.col(0) = xr;
  r.col(1) = z.cross(xr);
  r.col(2) = z;
  return r;
}

}  // namespace detail

/// Random two-view problem. The first camera sits at the origin with identity
/// orientation; points are drawn from its viewing frustum, the second camera
/// center from a spherical shell of radii [parallax_min, parallax_max], and
/// every point is kept only if both cameras see it. Deterministic per seed.
inline SyntheticProblem generate(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng({cfg.seed, 0x5EED5EEDull});
  const double half_fov = cfg.fov_deg * std::numbers::pi / 360.0;
  const double cos_half = std::cos(half_fov);
  const double tan_half = std::tan(half_fov);
  const double mid_depth = 0.5 * (cfg.depth_min + cfg.depth_max);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> depth(cfg.depth_min, cfg.depth_max);
  std::uniform_real_distribution<double> radius(cfg.parallax_min, cfg.parallax_max);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  constexpr int kRejectionsPerPoint = 200;
  int rejected = 0;
  for (;;) {
    const Eigen::Vector3d center = radius(rng) * random_unit_vector(rng).vector();
    const Eigen::Matrix3d r2 = detail::look_at(center, Eigen::Vector3d(0.0, 0.0, mid_depth), angle(rng));

    std::vector<Eigen::Vector3d> points;
    points.reserve(cfg.n_points);
    bool pose_ok = true;
    while (static_cast<int>(points.size()) < cfg.n_points && pose_ok) {
      int local = 0;
      for (;;) {
        const double z = depth(rng);
        const double x = (2.0 * unit(rng) - 1.0) * z * tan_half;
        const double y = (2.0 * unit(rng) - 1.0) * z * tan_half;
        const Eigen::Vector3d p(x, y, z);
        if (detail::inside_cone(p, cos_half) &&
            detail::inside_cone(r2.transpose() * (p - center), cos_half)) {
          points.push_back(p);
          break;
        }
        if (++rejected > cfg.max_attempts) {
          throw GenerationTimeout("generate: rejection sampling exceeded the attempt budget");
        }
        if (++local > kRejectionsPerPoint) {
          pose_ok = false;
          break;
        }
      }
    }
    if (!pose_ok) continue;

    SyntheticProblem problem;
    problem.config = cfg;
    problem.points = std::move(points);
    problem.gt_rotation = Rotation3::nearest(r2);
    problem.gt_translation = UnitVector3::normalized(center);
    problem.baseline = center.norm();
    problem.gt_essential = essential_from_pose(problem.gt_rotation, problem.gt_translation);
    problem.pairs.reserve(cfg.n_points);
    for (const auto& p : problem.points) {
      const Eigen::Vector3d f = detail::add_tangent_noise(p.normalized(), cfg, rng);
      const Eigen::Vector3d fp =
          detail::add_tangent_noise((problem.gt_rotation.matrix().transpose() * (p - center)).normalized(), cfg, rng);
      problem.pairs.push_back({UnitVector3::normalized(f), UnitVector3::normalized(fp)});
    }
    return problem;
  }
}

struct ContaminatedProblem {
  std::vector<BearingPair> pairs;
  /// true where the pair is an uncorrupted correspondence.
  std::vector<bool> inlier_mask;
};

/// Replaces round(ratio * N) randomly chosen pairs by independent uniformly
/// random unit-vector pairs.
inline ContaminatedProblem contaminate(const std::vector<BearingPair>& pairs, double outlier_ratio,
                                       std::uint64_t seed) {
  if (!(outlier_ratio >= 0.0 && outlier_ratio <= 1.0)) {
    throw InvalidArgument("contaminate: outlier_ratio must be in [0, 1]");
  }
  Rng rng = make_rng({seed, 0x0D71E5ull});
  ContaminatedProblem out{pairs, std::vector<bool>(pairs.size(), true)};
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_out = static_cast<std::size_t>(std::llround(outlier_ratio * static_cast<double>(pairs.size())));
  for (std::size_t k = 0; k < n_out; ++k) {
    const std::size_t i = order[k];
    out.pairs[i] = {random_unit_vector(rng), random_unit_vector(rng)};
    out.inlier_mask[i] = false;
  }
  return out;
}

}  // namespace certpose
