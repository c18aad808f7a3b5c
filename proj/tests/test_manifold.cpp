#include <gtest/gtest.h>

#include "test_util.hpp"

namespace certpose {
namespace {

using testing::random_element;
using testing::random_tangent;

// f(retract(p, frame(c))) as a function of the 5 frame coordinates.
double pullback(const ProblemData& d, const EssentialElement& p, const detail::TangentFrame& frame, const Vector5d& c) {
  return cost(d, retract(p, frame.vector(c)).matrix());
}

TEST(RiemannianGradient, VanishesAtNoiselessGroundTruth) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticProblem p = testing::scene(20, 0.0, seed);
    EXPECT_LE(riemannian_gradient(build_data_matrix(p.pairs), p.gt_essential).norm(), 1e-10);
  }
}

TEST(RiemannianGradient, MatchesFiniteDifferences) {
  const SyntheticProblem s = testing::scene(30, 1.0, 4);
  const ProblemData d = build_data_matrix(s.pairs);
  Rng rng = make_rng({31});
  for (int i = 0; i < 100; ++i) {
    const EssentialElement p = random_element(rng);
    const TangentVector xi = random_tangent(p, rng);
    const double h = 1e-6;
    const double fd = (cost(d, retract(p, h * xi).matrix()) - cost(d, retract(p, -h * xi).matrix())) / (2 * h);
    const double exact = riemannian_gradient(d, p).dot(xi);
    EXPECT_NEAR(fd, exact, 1e-5 * std::max(1.0, std::abs(exact)));
  }
}

TEST(RiemannianGradient, IsTangent) {
  const SyntheticProblem s = testing::scene(30, 1.0, 5);
  const ProblemData d = build_data_matrix(s.pairs);
  Rng rng = make_rng({32});
  for (int i = 0; i < 100; ++i) {
    const EssentialElement p = random_element(rng);
    EXPECT_LE(std::abs(riemannian_gradient(d, p).dt.dot(p.translation().vector())), 1e-14);
  }
}

TEST(RiemannianGradient, ZeroDataGivesZeroGradient) {
  Rng rng = make_rng({33});
  const ProblemData d{};
  EXPECT_EQ(riemannian_gradient(d, random_element(rng)).norm(), 0.0);
}

TEST(LocalModel, HessianMatchesSecondDifferencesOfThePullback) {
  const SyntheticProblem s = testing::scene(30, 1.0, 6);
  const ProblemData d = build_data_matrix(s.pairs);
  Rng rng = make_rng({34});
  for (int trial = 0; trial < 20; ++trial) {
    const EssentialElement p = random_element(rng);
    const detail::TangentFrame frame(p.translation().vector());
    const LocalModel m = local_model(d, p, frame);
    const double h = 1e-4;
    const double f0 = pullback(d, p, frame, Vector5d::Zero());
    Matrix5d fd;
    for (int k = 0; k < 5; ++k) {
      for (int l = 0; l < 5; ++l) {
        const Vector5d ek = h * Vector5d::Unit(k);
        const Vector5d el = h * Vector5d::Unit(l);
        if (k == l) {
          fd(k, l) = (pullback(d, p, frame, ek) - 2 * f0 + pullback(d, p, frame, -ek)) / (h * h);
        } else {
          fd(k, l) = (pullback(d, p, frame, ek + el) - pullback(d, p, frame, ek - el) -
                      pullback(d, p, frame, el - ek) + pullback(d, p, frame, -ek - el)) /
                     (4 * h * h);
        }
      }
    }
    EXPECT_LE((fd - m.hessian).norm(), 1e-4 * std::max(1.0, m.hessian.norm())) << trial;
    EXPECT_EQ(m.hessian, m.hessian.transpose());
  }
}

TEST(RiemannianHessian, SymmetricAsABilinearForm) {
  const SyntheticProblem s = testing::scene(25, 0.5, 7);
  const ProblemData d = build_data_matrix(s.pairs);
  Rng rng = make_rng({35});
  for (int i = 0; i < 100; ++i) {
    const EssentialElement p = random_element(rng);
    const TangentVector a = random_tangent(p, rng);
    const TangentVector b = random_tangent(p, rng);
    const double ab = riemannian_hessian_vec(d, p, a).dot(b);
    const double ba = riemannian_hessian_vec(d, p, b).dot(a);
    EXPECT_NEAR(ab, ba, 1e-10 * std::max(1.0, std::abs(ab)));
  }
}

TEST(RiemannianHessian, PositiveSemidefiniteAtTheOptimum) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SyntheticProblem s = testing::scene(30, 0.5, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const SolveReport r = solve_rtr(d, eight_point(s.pairs));
    const detail::TangentFrame frame(r.solution.translation().vector());
    const Matrix5d h = local_model(d, r.solution, frame).hessian;
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix5d>(h).eigenvalues()[0], -1e-10) << seed;
  }
}

TEST(Retract, ZeroStepAndUnitTranslation) {
  Rng rng = make_rng({36});
  for (int i = 0; i < 100; ++i) {
    const EssentialElement p = random_element(rng);
    EXPECT_LE((retract(p, {}).matrix() - p.matrix()).norm(), 1e-15);
    const EssentialElement q = retract(p, random_tangent(p, rng));
    EXPECT_NEAR(q.translation().vector().norm(), 1.0, 1e-14);
    const Eigen::Matrix3d r = q.rotation().matrix();
    EXPECT_LE((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}

TEST(Retract, FirstOrderAgreementWithTheDifferential) {
  Rng rng = make_rng({37});
  for (int i = 0; i < 50; ++i) {
    const EssentialElement p = random_element(rng);
    const TangentVector xi = random_tangent(p, rng);
    const Eigen::Matrix3d de = differential(p, xi);
    auto err = [&](double s) { return (retract(p, s * xi).matrix() - p.matrix() - s * de).norm(); };
    // Second-order remainder: halving s cuts the error by about four.
    const double ratio = err(1e-3) / err(5e-4);
    EXPECT_NEAR(ratio, 4.0, 0.1);
  }
}

TEST(SolveRtr, NoiselessConvergesToGroundTruth) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticProblem s = testing::scene(20, 0.0, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const SolveReport r = solve_rtr(d, eight_point(s.pairs));
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.final_cost, 1e-20);
    EXPECT_LE(testing::sign_free_distance(r.solution.matrix(), s.gt_essential.matrix()), 1e-6);
  }
}

TEST(SolveRtr, CostTraceIsMonotoneAndSolutionFeasible) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticProblem s = testing::scene(20, 1.0, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const SolveReport r = solve_rtr(d, random_essential(seed));
    ASSERT_FALSE(r.cost_trace.empty());
    for (std::size_t k = 1; k < r.cost_trace.size(); ++k) EXPECT_LE(r.cost_trace[k], r.cost_trace[k - 1]);
    EXPECT_LE(max_constraint_violation(PrimalPoint(r.solution).vector()), 1e-10);
    EXPECT_LE(r.final_cost, r.cost_trace.front());
  }
}

TEST(SolveRtr, FromEightPointNeedsFewIterations) {
  std::vector<double> iterations;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SyntheticProblem s = testing::scene(100, 0.5, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    iterations.push_back(solve_rtr(d, eight_point(s.pairs)).outer_iterations);
  }
  EXPECT_LE(median(iterations), 5.0);
}

TEST(SolveRtr, NonFiniteDataThrows) {
  const SyntheticProblem s = testing::scene(20, 0.5, 1);
  ProblemData d = build_data_matrix(s.pairs);
  d.c_sqrt(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_rtr(d, identity_init()), NonFiniteCost);
}

TEST(SolveRtr, InvalidConfigThrows) {
  const SyntheticProblem s = testing::scene(20, 0.5, 1);
  RtrConfig cfg;
  cfg.acceptance_ratio = 0.5;
  EXPECT_THROW(solve_rtr(build_data_matrix(s.pairs), identity_init(), cfg), InvalidArgument);
}

}  // namespace
}  // namespace certpose
