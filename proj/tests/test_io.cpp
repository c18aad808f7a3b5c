#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_util.hpp"

namespace certpose {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("certpose_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

  fs::path dir_;
};

TEST_F(IoTest, CorrespondenceCsvRoundTripIsExact) {
  const SyntheticProblem s = testing::scene(25, 1.0, 1);
  write_correspondences_csv(dir_ / "c.csv", s.pairs);
  const auto back = read_correspondences_csv(dir_ / "c.csv");
  ASSERT_EQ(back.size(), s.pairs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].f.vector(), s.pairs[i].f.vector());
    EXPECT_EQ(back[i].f_prime.vector(), s.pairs[i].f_prime.vector());
  }
}

TEST_F(IoTest, CorrespondenceCsvRejectsBadInput) {
  write_text(dir_ / "norm.csv", "fx,fy,fz,fpx,fpy,fpz\n1,0,0,0,0,2\n");
  EXPECT_THROW(read_correspondences_csv(dir_ / "norm.csv"), IoError);
  write_text(dir_ / "header.csv", "a,b,c\n1,0,0,0,0,1\n");
  EXPECT_THROW(read_correspondences_csv(dir_ / "header.csv"), IoError);
  write_text(dir_ / "cols.csv", "fx,fy,fz,fpx,fpy,fpz\n1,0,0,0,0\n");
  EXPECT_THROW(read_correspondences_csv(dir_ / "cols.csv"), IoError);
  EXPECT_THROW(read_correspondences_csv(dir_ / "missing.csv"), IoError);
}

TEST_F(IoTest, CorrespondenceCsvRenormalizesSmallDrift) {
  write_text(dir_ / "drift.csv", "fx,fy,fz,fpx,fpy,fpz\n0,0,1.0000001,0.6,0,0.8\n");
  const auto pairs = read_correspondences_csv(dir_ / "drift.csv");
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_NEAR(pairs[0].f.vector().norm(), 1.0, 1e-15);
}

TEST_F(IoTest, ProblemJsonRoundTrip) {
  const SyntheticProblem s = testing::scene(20, 0.5, 2);
  ProblemFile f = problem_file(s);
  f.inlier_mask = std::vector<bool>(20, true);
  (*f.inlier_mask)[3] = false;
  write_problem_json(dir_ / "p.json", f);
  const ProblemFile back = read_problem(dir_ / "p.json");
  ASSERT_EQ(back.pairs.size(), 20u);
  EXPECT_EQ(back.pairs[7].f.vector(), s.pairs[7].f.vector());
  ASSERT_TRUE(back.gt_rotation && back.gt_translation && back.inlier_mask);
  EXPECT_LE((back.gt_rotation->matrix() - s.gt_rotation.matrix()).norm(), 1e-15);
  EXPECT_EQ(*back.inlier_mask, *f.inlier_mask);
  EXPECT_EQ(back.config.at("n_points"), 20);
}

TEST_F(IoTest, ResultJsonCarriesCertificateFields) {
  const SyntheticProblem s = testing::scene(20, 0.5, 3);
  const PipelineResult r = run_pipeline(s.pairs);
  const Json j = result_to_json(r, 3, Json::object());
  for (const char* key : {"essential", "rotation", "translation", "lambda_hat", "dual_value", "gap",
                          "min_eigenvalue", "verdict", "iterations", "seed", "config"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j.at("lambda_hat").size(), 6u);
  EXPECT_EQ(j.at("verdict"), to_string(r.certificate.verdict));
  EXPECT_EQ(j.at("seed"), 3);
}

TEST_F(IoTest, TrialsCsvRoundTrip) {
  ExperimentGrid g;
  g.noise_levels = {0.5};
  g.point_counts = {10};
  g.trials = 4;
  g.oracle.restarts = 2;
  g.certify_initial = true;
  const GridResult r = run_grid(g);
  write_trials_csv(dir_ / "t.csv", r.records);
  const auto back = read_trials_csv(dir_ / "t.csv");
  ASSERT_EQ(back.size(), r.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].kind, r.records[i].kind);
    EXPECT_EQ(back[i].cost, r.records[i].cost);
    EXPECT_EQ(back[i].cost_trace, r.records[i].cost_trace);
    EXPECT_EQ(back[i].label, r.records[i].label);
    EXPECT_EQ(back[i].scene_seed, r.records[i].scene_seed);
  }
  EXPECT_EQ(summarize(back).front().trials, r.summaries.front().trials);
}

TEST(FormatDouble, RoundTripsAndSpecialValues) {
  for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02e23}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_TRUE(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
  EXPECT_EQ(parse_double(format_double(std::numeric_limits<double>::infinity())),
            std::numeric_limits<double>::infinity());
}

}  // namespace
}  // namespace certpose
