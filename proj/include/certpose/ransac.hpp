#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"
#include "certpose/initializer.hpp"
#include "certpose/random.hpp"

namespace certpose {

struct RansacConfig {
  int max_iterations = 1000;
  /// Squared algebraic error (f^T E f')^2 below which a pair is an inlier.
  double inlier_threshold = 1e-6;
  int sample_size = 8;
  double confidence = 0.99;
  std::uint64_t seed = 0;
  /// Least-squares refits applied to each new best consensus set (0 disables).
  int refit_rounds = 3;

  void validate() const {
    if (refit_rounds < 0) throw InvalidArgument("RansacConfig: refit_rounds must be >= 0");
    if (max_iterations < 1) throw InvalidArgument("RansacConfig: max_iterations must be >= 1");
    if (sample_size < 8) throw InvalidArgument("RansacConfig: sample_size must be >= 8");
    if (!(inlier_threshold > 0.0)) throw InvalidArgument("RansacConfig: inlier_threshold must be > 0");
    if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("RansacConfig: confidence must be in (0, 1)");
  }
};

struct RansacReport {
  EssentialElement best_model;
  std::vector<bool> inlier_mask;
  int iterations_used = 0;
  int inlier_count = 0;
};

inline double squared_algebraic_error(const Eigen::Matrix3d& e, const BearingPair& p) {
  const double r = p.f.vector().dot(e * p.f_prime.vector());
  return r * r;
}

/// Hypotheses required to draw one all-inlier sample with the given confidence.
inline int ransac_iteration_bound(double inlier_ratio, int sample_size, double confidence, int cap) {
  if (inlier_ratio >= 1.0) return 1;
  if (inlier_ratio <= 0.0) return cap;
  const double p_good = std::pow(inlier_ratio, sample_size);
  if (p_good <= std::numeric_limits<double>::min()) return cap;
  const double n = std::log(1.0 - confidence) / std::log1p(-p_good);
  if (!std::isfinite(n) || n >= static_cast<double>(cap)) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

/// Hypothesize-and-verify around the 8-point solver. Ties keep the earliest
/// hypothesis. Throws InsufficientData for fewer than sample_size pairs and
/// NoModelFound if every sample was degenerate.
inline RansacReport ransac_essential(std::span<const BearingPair> pairs, const RansacConfig& cfg = {}) {
  cfg.validate();
  const auto n = static_cast<int>(pairs.size());
  if (n < cfg.sample_size) throw InsufficientData("ransac_essential: fewer pairs than the sample size");

  Rng rng = make_rng({cfg.seed, 0x2A45ACull});
  std::vector<int> index(static_cast<std::size_t>(n));
  std::iota(index.begin(), index.end(), 0);
  std::vector<BearingPair> sample(static_cast<std::size_t>(cfg.sample_size));

  auto consensus = [&](const EssentialElement& model, std::vector<bool>* mask) {
    if (mask) mask->assign(pairs.size(), false);
    int count = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const bool in = squared_algebraic_error(model.matrix(), pairs[i]) < cfg.inlier_threshold;
      if (mask) (*mask)[i] = in;
      count += in;
    }
    return count;
  };

  RansacReport report;
  int best_count = -1;
  int required = cfg.max_iterations;
  int it = 0;
  for (; it < std::min(required, cfg.max_iterations); ++it) {
    // Partial Fisher-Yates: the first sample_size entries become the sample.
    for (int k = 0; k < cfg.sample_size; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(index[static_cast<std::size_t>(k)], index[static_cast<std::size_t>(pick(rng))]);
      sample[static_cast<std::size_t>(k)] = pairs[static_cast<std::size_t>(index[static_cast<std::size_t>(k)])];
    }
    EssentialElement model;
    try {
      model = eight_point(sample);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    int count = consensus(model, nullptr);
    if (count <= best_count) continue;

    // Least-squares refit of a new best consensus set, kept while it grows.
    std::vector<bool> mask;
    consensus(model, &mask);
    for (int round = 0; round < cfg.refit_rounds; ++round) {
      std::vector<BearingPair> inliers;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (mask[i]) inliers.push_back(pairs[i]);
      }
      EssentialElement refit;
      try {
        refit = eight_point(inliers);
      } catch (const Error&) {
        break;
      }
      std::vector<bool> refit_mask;
      const int refit_count = consensus(refit, &refit_mask);
      if (refit_count <= count) break;
      model = refit;
      mask = std::move(refit_mask);
      count = refit_count;
    }
    best_count = count;
    report.best_model = model;
    report.inlier_mask = std::move(mask);
    required = ransac_iteration_bound(static_cast<double>(count) / n, cfg.sample_size, cfg.confidence,
                                      cfg.max_iterations);
  }
  report.iterations_used = it;
  if (best_count < 0) throw NoModelFound("ransac_essential: every sampled hypothesis was degenerate");
  report.inlier_count = best_count;
  return report;
}

}  // namespace certpose
