#include <gtest/gtest.h>

#include "test_util.hpp"

namespace certpose {
namespace {

SyntheticProblem scene_100(double noise, std::uint64_t seed) { return testing::scene(100, noise, seed); }

TEST(Ransac, CleanDataKeepsEveryPair) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticProblem s = scene_100(0.0, seed);
    RansacConfig cfg;
    cfg.seed = seed;
    const RansacReport r = ransac_essential(s.pairs, cfg);
    EXPECT_EQ(r.inlier_count, 100);
    EXPECT_LE(testing::sign_free_distance(r.best_model.matrix(), s.gt_essential.matrix()), 1e-6);
    EXPECT_EQ(r.iterations_used, 1);
  }
}

TEST(Ransac, SeparatesOutliersAtThirtyPercent) {
  int missed = 0;
  int admitted = 0;
  int inliers = 0;
  int outliers = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SyntheticProblem s = scene_100(0.5, seed);
    const ContaminatedProblem c = contaminate(s.pairs, 0.3, seed);
    RansacConfig cfg;
    cfg.seed = seed;
    const RansacReport r = ransac_essential(c.pairs, cfg);
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      if (c.inlier_mask[i]) {
        ++inliers;
        missed += !r.inlier_mask[i];
      } else {
        ++outliers;
        admitted += r.inlier_mask[i];
      }
    }
  }
  EXPECT_LE(static_cast<double>(missed) / inliers, 0.05);
  EXPECT_LE(static_cast<double>(admitted) / outliers, 0.05);
}

TEST(Ransac, MaskAgreesWithCountAndThreshold) {
  const SyntheticProblem s = scene_100(1.0, 3);
  const ContaminatedProblem c = contaminate(s.pairs, 0.4, 3);
  RansacConfig cfg;
  cfg.seed = 3;
  const RansacReport r = ransac_essential(c.pairs, cfg);
  ASSERT_EQ(r.inlier_mask.size(), c.pairs.size());
  EXPECT_EQ(std::count(r.inlier_mask.begin(), r.inlier_mask.end(), true), r.inlier_count);
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    EXPECT_EQ(r.inlier_mask[i], squared_algebraic_error(r.best_model.matrix(), c.pairs[i]) < cfg.inlier_threshold);
  }
  EXPECT_LE(r.iterations_used, cfg.max_iterations);
}

TEST(Ransac, ConsensusNeverShrinksWithMoreIterations) {
  const SyntheticProblem s = scene_100(0.5, 4);
  const ContaminatedProblem c = contaminate(s.pairs, 0.5, 4);
  int previous = -1;
  for (const int cap : {1, 2, 5, 10, 50, 200}) {
    RansacConfig cfg;
    cfg.seed = 4;
    cfg.max_iterations = cap;
    const RansacReport r = ransac_essential(c.pairs, cfg);
    EXPECT_GE(r.inlier_count, previous) << cap;
    previous = r.inlier_count;
  }
}

TEST(Ransac, DeterministicPerSeed) {
  const SyntheticProblem s = scene_100(0.5, 5);
  const ContaminatedProblem c = contaminate(s.pairs, 0.3, 5);
  RansacConfig cfg;
  cfg.seed = 11;
  const RansacReport a = ransac_essential(c.pairs, cfg);
  const RansacReport b = ransac_essential(c.pairs, cfg);
  EXPECT_EQ(a.best_model.matrix(), b.best_model.matrix());
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
  EXPECT_EQ(a.iterations_used, b.iterations_used);
}

TEST(Ransac, TooFewPairsThrows) {
  const SyntheticProblem s = testing::scene(20, 0.0, 6);
  const std::vector<BearingPair> seven(s.pairs.begin(), s.pairs.begin() + 7);
  EXPECT_THROW(ransac_essential(seven), InsufficientData);
}

TEST(Ransac, IdenticalPairsGiveNoModel) {
  const SyntheticProblem s = testing::scene(20, 0.0, 7);
  const std::vector<BearingPair> same(20, s.pairs.front());
  EXPECT_THROW(ransac_essential(same), NoModelFound);
}

TEST(Ransac, IterationBound) {
  EXPECT_EQ(ransac_iteration_bound(1.0, 8, 0.99, 1000), 1);
  EXPECT_EQ(ransac_iteration_bound(0.0, 8, 0.99, 1000), 1000);
  // log(0.01) / log(1 - 0.5^8) = 1176.6, capped.
  EXPECT_EQ(ransac_iteration_bound(0.5, 8, 0.99, 1000), 1000);
  EXPECT_EQ(ransac_iteration_bound(0.5, 8, 0.99, 5000), 1177);
  EXPECT_EQ(ransac_iteration_bound(0.7, 8, 0.99, 5000), 78);
}

TEST(RansacConfig, Validation) {
  RansacConfig cfg;
  cfg.confidence = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.sample_size = 7;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.inlier_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

}  // namespace
}  // namespace certpose
