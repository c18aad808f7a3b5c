#include <gtest/gtest.h>

#include "test_util.hpp"

namespace certpose {
namespace {

using testing::random_element;

// Number of eigenvalues of m below s, by Sylvester's law of inertia.
int count_below(const Matrix12d& m, double s) {
  const Eigen::LDLT<Matrix12d> ldlt(m - s * Matrix12d::Identity());
  return static_cast<int>((ldlt.vectorD().array() < 0.0).count());
}

// Smallest eigenvalue by bisection on the inertia count.
double bisect_min_eigenvalue(const Matrix12d& m) {
  double radius = 0.0;
  for (int i = 0; i < 12; ++i) radius = std::max(radius, m.row(i).cwiseAbs().sum());
  double lo = -radius - 1.0;
  double hi = radius + 1.0;
  for (int k = 0; k < 200 && hi - lo > 1e-13 * std::max(1.0, radius); ++k) {
    const double mid = 0.5 * (lo + hi);
    (count_below(m, mid) >= 1 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

EssentialElement converged_solution(const SyntheticProblem& s, const ProblemData& d) {
  return solve_rtr(d, eight_point(s.pairs)).solution;
}

TEST(DualCandidate, ZeroMultipliersAtNoiselessGroundTruth) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticProblem s = testing::scene(20, 0.0, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const DualCandidate dual = dual_candidate(d, PrimalPoint(s.gt_essential));
    EXPECT_LE(dual.lambda.norm(), 1e-8);
    EXPECT_LE(dual.residual, 1e-9);
    const CertificateReport c = certify(d, s.gt_essential);
    EXPECT_EQ(c.verdict, Verdict::kOptimal);
    EXPECT_LE(c.gap, 1e-14);
  }
}

TEST(DualCandidate, ResidualIsOrthogonalToMultiplierAndTangentDirections) {
  // The relaxed constraints leave a 6-dimensional set while the essential
  // manifold has dimension 5, so J lambda = Q x is not solvable exactly at a
  // noisy optimum. The least-squares residual must still be orthogonal to
  // range(J) and to x, and to the tangent space up to the stationarity error.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SyntheticProblem s = testing::scene(30, 1.0, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const SolveReport solve = solve_rtr(d, eight_point(s.pairs));
    const EssentialElement& p = solve.solution;
    const Vector12d x = PrimalPoint(p).vector();
    const DualCandidate dual = dual_candidate(d, PrimalPoint(p));
    const Matrix12x6d j = constraint_jacobian(x);
    Vector12d qx = d.q * x;
    const Vector12d r = j * dual.lambda - qx;
    const double scale = qx.norm();
    EXPECT_NEAR(r.norm(), dual.residual, 1e-12 * std::max(1.0, scale));
    EXPECT_LE((j.transpose() * r).norm(), 1e-10 * scale);
    EXPECT_LE(std::abs(x.dot(r)), 1e-10 * scale);
    const detail::TangentFrame frame(p.translation().vector());
    for (int k = 0; k < 5; ++k) {
      const TangentVector xi = frame.vector(Vector5d::Unit(k));
      Vector12d v;
      v << vec(differential(p, xi)), xi.dt;
      // v . Q x is half the directional derivative of the cost along a unit
      // tangent direction, and v . J lambda vanishes, so the gradient norm
      // bounds this product.
      EXPECT_LE(std::abs(v.dot(r)), 0.5 * solve.gradient_norm + 1e-12 * scale) << seed << " " << k;
    }
  }
}

TEST(DualCandidate, TranslationAlongFirstAxisIsRankDeficient) {
  // t = e1 makes the first row of E vanish; A_2 x, A_5 x and the row-pair
  // columns lose rank.
  Rng rng = make_rng({41});
  const EssentialElement e = essential_from_pose(random_rotation(rng), UnitVector3(Eigen::Vector3d::UnitX()));
  const SyntheticProblem s = testing::scene(20, 0.5, 1);
  const ProblemData d = build_data_matrix(s.pairs);
  EXPECT_THROW(dual_candidate(d, PrimalPoint(e)), RankDeficientJacobian);
  const CertificateReport c = certify(d, e);
  EXPECT_TRUE(c.rank_deficient);
  EXPECT_EQ(c.verdict, Verdict::kUnknown);
}

TEST(DualCandidate, InfeasiblePointThrows) {
  const SyntheticProblem s = testing::scene(20, 0.5, 2);
  const ProblemData d = build_data_matrix(s.pairs);
  Vector12d x = Vector12d::Zero();
  x.head<9>().setConstant(0.4);
  x[9] = 1.0;
  EXPECT_THROW(dual_candidate(d, PrimalPoint::from_vector(x)), InfeasiblePoint);
  EXPECT_THROW(certify(d, PrimalPoint::from_vector(x)), InfeasiblePoint);
}

TEST(HessianOfLagrangian, KnownMultipliers) {
  const SyntheticProblem s = testing::scene(20, 0.5, 3);
  const ProblemData d = build_data_matrix(s.pairs);
  EXPECT_EQ(hessian_of_lagrangian(d, Vector6d::Zero()), d.q);
  EXPECT_EQ(hessian_of_lagrangian(d, Vector6d::Unit(0)), d.q - constraint_matrices()[0]);
}

TEST(HessianOfLagrangian, LagrangianIdentityAndDualBound) {
  // On the feasible set x^T M(lambda) x = f(x) - lambda_1 and |x|^2 = 3, so
  // f(x) >= lambda_1 + 3 min(mu, 0) for every feasible x.
  const SyntheticProblem s = testing::scene(30, 1.0, 4);
  const ProblemData d = build_data_matrix(s.pairs);
  const CertificateReport c = certify(d, converged_solution(s, d));
  const Matrix12d m = hessian_of_lagrangian(d, c.lambda_hat);
  Rng rng = make_rng({42});
  for (int i = 0; i < 1000; ++i) {
    const Vector12d x = PrimalPoint(random_element(rng)).vector();
    const double f = cost(d, x);
    EXPECT_NEAR(x.dot(m * x), f - c.lambda_hat[0], 1e-12 * std::max(1.0, f));
    EXPECT_GE(f, c.lambda_hat[0] + 3.0 * std::min(c.min_eigenvalue, 0.0) - 1e-12);
  }
}

TEST(MinEigenvalue, DiagonalAndPsd) {
  Vector12d diag;
  diag << 5, 4, 3, 2, 1, 0, -1, 7, 8, 9, 10, 11;
  EXPECT_EQ(min_eigenvalue(diag.asDiagonal().toDenseMatrix()), -1.0);
  const Matrix12d b = Matrix12d::Random();
  EXPECT_GE(min_eigenvalue(b.transpose() * b), -1e-12);
}

TEST(MinEigenvalue, AgreesWithInertiaBisection) {
  Rng rng = make_rng({43});
  std::normal_distribution<double> n01;
  for (int i = 0; i < 200; ++i) {
    Matrix12d b;
    for (int k = 0; k < 144; ++k) b(k) = n01(rng);
    const Matrix12d m = 0.5 * (b + b.transpose());
    EXPECT_NEAR(min_eigenvalue(m), bisect_min_eigenvalue(m), 1e-10);
  }
}

TEST(MinEigenvalue, RejectsNonSymmetric) {
  Matrix12d m = Matrix12d::Identity();
  m(0, 1) = 1.0;
  EXPECT_THROW(min_eigenvalue(m), InvalidArgument);
}

TEST(Certify, PerturbedGroundTruthIsNotCertifiedExactly) {
  // With an exact eigenvalue threshold a 5 degree rotation error is never
  // certified on noiseless data.
  CertifierConfig cfg;
  cfg.tau_mu = -1e-9;
  int unknown = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SyntheticProblem s = testing::scene(20, 0.0, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    Rng rng = make_rng({seed, 44});
    const Eigen::Vector3d axis = random_unit_vector(rng).vector();
    const Rotation3 r = s.gt_rotation * Rotation3::exp(5.0 * std::numbers::pi / 180.0 * axis);
    unknown += certify(d, essential_from_pose(r, s.gt_translation), cfg).verdict == Verdict::kUnknown;
  }
  EXPECT_EQ(unknown, 200);
}

TEST(Certify, LowNoiseOptimaAreCertified) {
  int optimal = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SyntheticProblem s = testing::scene(100, 0.1, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    optimal += certify(d, converged_solution(s, d), CertifierConfig::relative()).verdict == Verdict::kOptimal;
  }
  EXPECT_GE(optimal, 196);
}

TEST(Certify, CertifiedPointsBeatRandomFeasiblePoints) {
  Rng rng = make_rng({45});
  int certified = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SyntheticProblem s = testing::scene(20, 0.5, seed);
    const ProblemData d = build_data_matrix(s.pairs);
    const EssentialElement p = converged_solution(s, d);
    const CertificateReport c = certify(d, p, CertifierConfig::relative());
    if (c.verdict != Verdict::kOptimal) continue;
    ++certified;
    for (int k = 0; k < 1000; ++k) {
      EXPECT_GE(cost(d, random_element(rng).matrix()), c.primal_cost * (1.0 - 1e-9));
    }
  }
  EXPECT_GT(certified, 50);
}

TEST(Certify, VerdictRespectsThresholds) {
  Rng rng = make_rng({46});
  const SyntheticProblem s = testing::scene(20, 1.0, 5);
  const ProblemData d = build_data_matrix(s.pairs);
  const CertifierConfig cfg = CertifierConfig::relative();
  for (int i = 0; i < 500; ++i) {
    const CertificateReport c = certify(d, random_element(rng), cfg);
    if (c.rank_deficient) {
      EXPECT_EQ(c.verdict, Verdict::kUnknown);
      continue;
    }
    if (c.min_eigenvalue < cfg.tau_mu) EXPECT_EQ(c.verdict, Verdict::kUnknown);
    if (c.gap_measure > cfg.tau_gap) EXPECT_EQ(c.verdict, Verdict::kUnknown);
    if (c.verdict == Verdict::kOptimal) {
      EXPECT_GE(c.min_eigenvalue, cfg.tau_mu);
      EXPECT_LE(c.gap_measure, cfg.tau_gap);
    }
  }
}

TEST(Certify, ScalingTheDataScalesMultipliersAndEigenvalue) {
  const SyntheticProblem s = testing::scene(30, 1.0, 6);
  const ProblemData d = build_data_matrix(s.pairs);
  ProblemData scaled = d;
  constexpr double kScale = 8.0;
  scaled.c *= kScale;
  scaled.c_sqrt *= std::sqrt(kScale);
  scaled.q *= kScale;
  const EssentialElement p = converged_solution(s, d);
  const CertificateReport a = certify(d, p);
  const CertificateReport b = certify(scaled, p);
  EXPECT_LE((b.lambda_hat - kScale * a.lambda_hat).norm(), 1e-9 * std::max(1.0, b.lambda_hat.norm()));
  EXPECT_NEAR(b.min_eigenvalue, kScale * a.min_eigenvalue, 1e-9 * std::max(1.0, std::abs(b.min_eigenvalue)));
}

TEST(CertifierConfig, Validation) {
  CertifierConfig c;
  c.tau_mu = 0.1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.tau_gap = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.feasibility_tolerance = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_STREQ(to_string(Verdict::kOptimal), "optimal");
  EXPECT_STREQ(to_string(Verdict::kUnknown), "unknown");
}

}  // namespace
}  // namespace certpose
