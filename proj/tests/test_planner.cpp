#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace icl_sfm;
using icl_sfm::testing::random_spd;
using icl_sfm::testing::random_unit;

namespace {

// Stabilizing solution of  -S Rb^-1 S + Q = 0  from the stable invariant
// subspace of the Hamiltonian [[0, -Rb^-1], [-Q, 0]] (A = 0, B = I).
Mat3 care_hamiltonian(const Mat3& q, const Mat3& r_bar) {
  Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
  h.topRightCorner<3, 3>() = -r_bar.inverse();
  h.bottomLeftCorner<3, 3>() = -q;
  const Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(h);
  Eigen::Matrix<std::complex<double>, 6, 3> stable;
  int col = 0;
  for (int i = 0; i < 6; ++i) {
    if (es.eigenvalues()(i).real() < 0.0) stable.col(col++) = es.eigenvectors().col(i);
  }
  EXPECT_EQ(col, 3);
  const Eigen::Matrix3cd x1 = stable.topRows<3>();
  const Eigen::Matrix3cd x2 = stable.bottomRows<3>();
  return (x2 * x1.inverse()).real();
}

PlannerGains gains(const Mat3& q, const Mat3& r, double gamma, const Vec3& n) {
  return build_gains(SymPosDef(q), SymPosDef(r), gamma, n);
}

}  // namespace

TEST(BuildGains, IdentityWeights) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 0.0, Vec3::UnitZ());
  EXPECT_LT((g.s_c.matrix() - Mat3::Identity()).norm(), 1e-14);
  EXPECT_LT((g.k_s - Mat3::Identity()).norm(), 1e-14);
}

TEST(BuildGains, ScaledStateWeight) {
  const PlannerGains g = gains(4.0 * Mat3::Identity(), Mat3::Identity(), 0.0, Vec3::UnitZ());
  EXPECT_LT((g.s_c.matrix() - 2.0 * Mat3::Identity()).norm(), 1e-14);
  EXPECT_LT((g.k_s - 2.0 * Mat3::Identity()).norm(), 1e-14);
}

TEST(BuildGains, DiagonalPenaltyCase) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 1.0, Vec3::UnitZ());
  EXPECT_LT((g.r_bar.matrix() - Mat3(Vec3(1, 1, 2).asDiagonal())).norm(), 1e-15);
  EXPECT_LT((g.s_c.matrix() - Mat3(Vec3(1, 1, std::sqrt(2.0)).asDiagonal())).norm(), 1e-12);
  EXPECT_LT((g.k_s - Mat3(Vec3(1, 1, 1 / std::sqrt(2.0)).asDiagonal())).norm(), 1e-12);
  EXPECT_LE(riccati_residual(g), 1e-12);
}

TEST(BuildGains, RejectsInvalidArguments) {
  EXPECT_THROW((void)gains(Mat3::Identity(), Mat3::Identity(), -1.0, Vec3::UnitZ()), std::invalid_argument);
  EXPECT_THROW((void)gains(Mat3::Identity(), Mat3::Identity(), 1.0, Vec3(0, 0, 2)), std::invalid_argument);
  EXPECT_THROW((void)SymPosDef(Mat3(Vec3(1, 1, -1).asDiagonal())), NotSPD);
}

TEST(BuildGains, RandomInstancesSatisfyRiccatiAndInvariants) {
  std::mt19937_64 rng(2024);
  for (double gamma : {0.0, 5.0, 50.0}) {
    for (int k = 0; k < 100; ++k) {
      const Mat3 q = random_spd(rng, 100.0), r = random_spd(rng, 100.0);
      const Vec3 n = random_unit(rng);
      const PlannerGains g = gains(q, r, gamma, n);
      EXPECT_LE(riccati_residual(g), 1e-10 * std::max(1.0, q.norm()));
      EXPECT_LT((g.r_bar.matrix() - (r + gamma * n * n.transpose())).norm(), 1e-12 * std::max(1.0, g.r_bar.matrix().norm()));
      EXPECT_LT((g.r_bar.matrix() * g.k_s - g.s_c.matrix()).norm(), 1e-12 * std::max(1.0, g.s_c.matrix().norm()));
    }
  }
}

TEST(BuildGains, AgreesWithHamiltonianSolution) {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 50; ++k) {
    const Mat3 q = random_spd(rng, 50.0), r = random_spd(rng, 50.0);
    const double gamma = std::uniform_real_distribution<double>(0.0, 50.0)(rng);
    const Vec3 n = random_unit(rng);
    const PlannerGains g = gains(q, r, gamma, n);
    const Mat3 oracle = care_hamiltonian(q, g.r_bar.matrix());
    EXPECT_LT((g.s_c.matrix() - oracle).norm(), 1e-8 * oracle.norm());
  }
}

TEST(BuildGains, OptimalInputMinimisesHamiltonian) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat3 q = random_spd(rng, 10.0), r = random_spd(rng, 10.0);
    const Vec3 n = random_unit(rng);
    const PlannerGains g = gains(q, r, 5.0, n);
    const Vec3 p(nd(rng), nd(rng), nd(rng));
    // p_dot = u; integrand r(p, u) + dJ/dp . u with J = p^T S p.
    const auto integrand = [&](const Vec3& u) { return running_cost(g, p, u) + 2.0 * p.dot(g.s_c.matrix() * u); };
    const Vec3 u_star = -g.k_s * p;
    const double best = integrand(u_star);
    EXPECT_NEAR(best, 0.0, 1e-10 * (1.0 + p.squaredNorm() * q.norm()));
    for (int k = 0; k < 1000; ++k) {
      const Vec3 delta = 0.1 * Vec3(nd(rng), nd(rng), nd(rng));
      EXPECT_GT(integrand(u_star + delta), best);
    }
  }
}

TEST(BuildGains, NormalComponentShrinksWithPenalty) {
  const Vec3 n = Vec3(1, 2, 2).normalized();
  const Vec3 p(0.3, -1.2, 2.0);
  double prev = INFINITY;
  for (double gamma : {0.0, 5.0, 10.0, 15.0, 25.0, 50.0}) {
    const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), gamma, n);
    const double along = std::abs(control_velocity(g, p).dot(n));
    EXPECT_LE(along, prev);
    prev = along;
  }
}

TEST(ControlVelocity, Cases) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 0.0, Vec3::UnitZ());
  EXPECT_EQ(control_velocity(g, Vec3::Zero()), Vec3::Zero());
  EXPECT_LT((control_velocity(g, Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm(), 1e-14);
}

TEST(ControlVelocity, ClosedLoopDecaysAtUnitRate) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 0.0, Vec3::UnitZ());
  Vec3 p(2.0, -1.0, 3.0);
  const double p0 = p.norm();
  const double dt = 1e-3;
  for (int k = 1; k <= 3000; ++k) {
    // RK4 on p_dot = -K p.
    const auto f = [&](const Vec3& x) -> Vec3 { return -control_velocity(g, x); };
    const Vec3 k1 = f(p), k2 = f(p + 0.5 * dt * k1), k3 = f(p + 0.5 * dt * k2), k4 = f(p + dt * k3);
    p += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double expected = p0 * std::exp(-k * dt);
    EXPECT_NEAR(p.norm(), expected, 0.01 * expected);
  }
}

TEST(ControlVelocity, LyapunovStrictlyDecreasesUnderTrueState) {
  std::mt19937_64 rng(8);
  const PlannerGains g = gains(random_spd(rng, 10.0), random_spd(rng, 10.0), 15.0, random_unit(rng));
  Vec3 p(1.0, -2.0, 0.5);
  double prev = diagnostics(g, p).j_star;
  for (int k = 0; k < 100000 && p.norm() > 1e-9; ++k) {
    p -= 1e-3 * control_velocity(g, p);
    const double j = diagnostics(g, p).j_star;
    ASSERT_LT(j, prev);
    prev = j;
  }
}

TEST(WorldVelocity, Cases) {
  const Vec3 v(0.3, -0.4, 1.2);
  EXPECT_EQ(world_velocity(v, RotationMatrix::identity()), v);
  const RotationMatrix rz = rotation_from_quaternion(UnitQuaternion(0, 0, 0, 1));
  EXPECT_LT((world_velocity(Vec3(1, 0, 0), rz) - Vec3(-1, 0, 0)).norm(), 1e-15);
  std::mt19937_64 rng(4);
  const RotationMatrix r = rotation_from_quaternion(icl_sfm::testing::random_quaternion(rng));
  EXPECT_NEAR(world_velocity(v, r).norm(), v.norm(), 1e-12);
}

TEST(GoalEstimate, ExactEstimatesRecoverGoal) {
  const std::vector<Vec3> world{Vec3(0.5, 0.5, 0), Vec3(-0.5, 0.5, 0), Vec3(-0.5, -0.5, 0), Vec3(0.5, -0.5, 0)};
  const FeatureSet fs = make_feature_set(world, Vec3(0, 0, 2), UnitQuaternion(0, 1, 0, 0));
  const CameraState s = CameraState::from_world(Vec3(1.0, 0.3, 5.0), UnitQuaternion::from_axis_angle(Vec3(3.0, 0.1, 0)),
                                                Vec3(0, 0, 2), UnitQuaternion(0, 1, 0, 0));
  const Measurement m = synthesize_measurement(s, fs, CameraIntrinsics::pinhole(800, 800, 320, 240), NoiseModel{});
  const TrueDistances d = true_distances(s, fs);
  ObserverState obs = observer_init(ObserverConfig{}, m, {d.d_c_s, d.d_c_g, d.d_g_s});
  EXPECT_LT((goal_estimate(obs, m, fs) - s.p_c_g).norm(), 1e-9);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const Vec3 single = goal_estimate(obs, m, fs, GoalEstimateMode::Anchor, i);
    EXPECT_EQ(single, d.d_c_s[i] * m.u_c_s[i] - m.r_c_g * fs.features_goal[i]);
  }

  obs = observer_init(ObserverConfig{}, m, InitialEstimates::zeros(4));
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : fs.features_goal) mean += p / 4.0;
  EXPECT_LT((goal_estimate(obs, m, fs) + m.r_c_g * mean).norm(), 1e-15);
}

TEST(RunningCost, Cases) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 5.0, Vec3::UnitZ());
  EXPECT_EQ(running_cost(g, Vec3::Zero(), Vec3::Zero()), 0.0);
  EXPECT_NEAR(running_cost(g, Vec3::Zero(), Vec3(1, 2, 0)), 5.0, 1e-15);
  EXPECT_NEAR(running_cost(g, Vec3::Zero(), Vec3::UnitZ()), 6.0, 1e-15);
}

TEST(Diagnostics, Cases) {
  const PlannerGains g = gains(Mat3::Identity(), Mat3::Identity(), 0.0, Vec3::UnitZ());
  EXPECT_EQ(diagnostics(g, Vec3::Zero()).j_star, 0.0);
  EXPECT_NEAR(diagnostics(g, Vec3(1, 1, 1)).j_star, 3.0, 1e-14);
}

TEST(Diagnostics, RayleighBounds) {
  std::mt19937_64 rng(12);
  const PlannerGains g = gains(random_spd(rng, 20.0), random_spd(rng, 20.0), 10.0, random_unit(rng));
  const Mat3 gamma_s = g.s_c.matrix() * g.r_c.matrix().inverse() * g.s_c.matrix();
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const Vec3 p(nd(rng), nd(rng), nd(rng));
    const PlannerDiagnostics d = diagnostics(g, p);
    const double rq = p.dot(gamma_s * p) / p.squaredNorm();
    EXPECT_GT(d.gamma_s_min, 0.0);
    EXPECT_LE(d.gamma_s_min, rq * (1 + 1e-12));
    EXPECT_GE(d.gamma_s_max, rq * (1 - 1e-12));
  }
}

TEST(IssThreshold, ScalesWithObserverError) {
  PlannerDiagnostics d;
  d.gamma_s_min = 1.0;
  d.gamma_s_max = 8.0;
  EXPECT_NEAR(iss_threshold(d, 0.5), 2.0, 1e-15);
  EXPECT_EQ(iss_threshold(d, 0.0), 0.0);
}

TEST(OrientationFeedback, DrivesTowardIdentity) {
  UnitQuaternion q = UnitQuaternion::from_axis_angle(Vec3(0.4, -0.8, 0.3));
  for (int k = 0; k < 10000; ++k) q = integrate_quaternion(q, orientation_feedback(q, 4.0), 1e-3);
  EXPECT_LT(q.vec().norm(), 1e-6);
}
