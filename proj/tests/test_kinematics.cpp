#include <chrono>

#include <gtest/gtest.h>

#include "prsafe/kinematics.hpp"
#include "support.hpp"

using namespace prsafe;
using prsafe::testing::explicit_geometry;

namespace {

// Reference values from an independent NumPy implementation.
struct IkCase {
  Pose pose;
  Vec4 q;
  Vec3 sockets;
};

const IkCase kIkCases[] = {
    {{0.0, 0.75, 0.0, 0.0},
     {0.80111535286194346, 0.79529868602934339, 0.79529868602934339, 0.75},
     {20.577967171880388, 19.431152118906869, 19.431152118906869}},
    {{-0.2, 0.75, 0.0, -0.64},
     {0.82436371588738122, 0.81668720049606225, 0.7685238299392575, 0.77620873481300123},
     {24.52329530538395, 23.31478860181554, 12.605223648164609}},
    {{0.05, 0.8, 0.1, 0.2},
     {0.84428498913718641, 0.82705599407057584, 0.8502475935619539, 0.80156097709406993},
     {24.022309436473559, 14.42157482158072, 19.597404235585763}},
};

}  // namespace

TEST(Geometry, GeneratorReproducesExplicitAnchors) {
  const RobotGeometry a = RobotGeometry::defaults();
  const RobotGeometry b = explicit_geometry();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_LT((a.fixed_anchors[i] - b.fixed_anchors[i]).norm(), 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT((a.mobile_anchors[i] - b.mobile_anchors[i]).norm(), 1e-15);
}

TEST(Geometry, RejectsInvertedJointBox) {
  RobotGeometry g = explicit_geometry();
  g.joint_min[2] = g.joint_max[2];
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Geometry, RejectsNonPositiveRadius) {
  GeneratorParams p;
  p.rm2 = 0.0;
  EXPECT_THROW(generate_anchors(p), ConfigError);
}

TEST(InverseKinematics, MatchesReferenceLengths) {
  const RobotGeometry g = explicit_geometry();
  for (const auto& c : kIkCases) {
    const JointVector q = actuator_lengths(c.pose, g);
    EXPECT_LT((q.q - c.q).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((socket_angles(c.pose, g) - c.sockets).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(InverseKinematics, CentralLimbIsDistanceToItsBaseJoint) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_poses(g, 50, 3)) {
    EXPECT_NEAR(actuator_lengths(p, g)[3], (p.position() - g.fixed_anchors[3]).norm(), 1e-15);
  }
}

TEST(InverseKinematics, PassiveJointsRebuildLimbDirections) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_poses(g, 50, 4)) {
    const InverseKinematics ik = inverse_kinematics(p, g);
    for (std::size_t l = 0; l < 3; ++l) {
      ASSERT_FALSE(ik.passive.indeterminate[l]);
      const Vec3 u = universal_direction(ik.passive.first[l], ik.passive.second[l]);
      EXPECT_LT((u - ik.limbs[l].direction).norm(), 1e-12);
    }
    EXPECT_LT((revolute_direction(ik.passive.central) - ik.limbs[3].direction).norm(), 1e-12);
  }
}

TEST(InverseKinematics, ZeroLengthLimbIsDegenerate) {
  const RobotGeometry g = explicit_geometry();
  EXPECT_THROW(actuator_lengths(Pose{0.0, 0.0, 0.0, 0.0}, g), DegeneratePoseError);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const RobotGeometry g = explicit_geometry();
  const double h = 1e-6;
  for (const Pose& p : prsafe::testing::random_poses(g, 100, 5)) {
    const Mat4 jd = jacobians(p, g).forward;
    Mat4 fd;
    for (Eigen::Index k = 0; k < 4; ++k) {
      Vec4 a = p.vector(), b = p.vector();
      a[k] += h;
      b[k] -= h;
      fd.col(k) = (actuator_lengths(Pose::from_vector(a), g).q - actuator_lengths(Pose::from_vector(b), g).q) / (2 * h);
    }
    EXPECT_LT((jd - fd).norm() / jd.norm(), 1e-8);
  }
}

TEST(Jacobian, InverseJacobianIsMinusIdentity) {
  const RobotGeometry g = explicit_geometry();
  EXPECT_EQ(jacobians(g.home, g).inverse, -Mat4::Identity());
}

TEST(Jacobian, HomeDeterminantMatchesReference) {
  const RobotGeometry g = explicit_geometry();
  EXPECT_NEAR(jacobians(g.home, g).forward.determinant(), 0.0079623940144949341, 1e-15);
}

TEST(ForwardKinematics, RoundTripsInverseKinematics) {
  const RobotGeometry g = explicit_geometry();
  const auto poses = prsafe::testing::random_poses(g, 1000, 6);
  const auto t0 = std::chrono::steady_clock::now();
  for (const Pose& p : poses) {
    const auto sol = solve_forward_kinematics(actuator_lengths(p, g), g, g.home);
    ASSERT_TRUE(sol.has_value());
    EXPECT_LT((sol->pose.vector() - p.vector()).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 5.0);
}

TEST(ForwardKinematics, ExactGuessConvergesImmediately) {
  const RobotGeometry g = explicit_geometry();
  const Pose p = kIkCases[2].pose;
  const auto sol = solve_forward_kinematics(actuator_lengths(p, g), g, p);
  ASSERT_TRUE(sol.has_value());
  EXPECT_EQ(sol->iterations, 1);
}

TEST(ForwardKinematics, UnreachableLengthsFail) {
  const RobotGeometry g = explicit_geometry();
  const JointVector q(0.05, 0.05, 0.05, 0.75);
  EXPECT_FALSE(solve_forward_kinematics(q, g, g.home).has_value());
  EXPECT_THROW(forward_kinematics(q, g, g.home), ForwardKinematicsError);
  EXPECT_FALSE(solve_forward_kinematics(JointVector(Vec4::Constant(std::nan(""))), g, g.home).has_value());
}

TEST(JointLimits, BoundsAreExclusive) {
  const RobotGeometry g = explicit_geometry();
  EXPECT_TRUE(within_joint_limits(JointVector(0.8, 0.8, 0.8, 0.75), g));
  EXPECT_FALSE(within_joint_limits(JointVector(g.joint_max[0], 0.8, 0.8, 0.75), g));
  EXPECT_FALSE(within_joint_limits(JointVector(0.8, 0.8, 0.8, g.joint_min[3]), g));
}

TEST(Orientation, AngularVelocityMatchesRotationDerivative) {
  const Pose p{0.0, 0.75, 0.3, -0.4};
  const double td = 0.7, pd = -1.1, h = 1e-6;
  const Mat3 rdot = (orientation(Pose{0, 0.75, p.theta + h * td, p.psi + h * pd}) -
                     orientation(Pose{0, 0.75, p.theta - h * td, p.psi - h * pd})) / (2 * h);
  const Mat3 skew = rdot * orientation(p).transpose();
  const Vec3 w(skew(2, 1), skew(0, 2), skew(1, 0));
  EXPECT_LT((w - angular_velocity(p, td, pd)).norm(), 1e-8);
}

TEST(ForwardKinematics, ClosureResidualsVanish) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_poses(g, 100, 8)) {
    const JointVector q = actuator_lengths(p, g);
    const Pose back = forward_kinematics(q, g, g.home);
    EXPECT_LT(closure_residuals(back, q, g).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(InverseKinematics, MirroredLimbsMatchAtZeroPsi) {
  const RobotGeometry g = explicit_geometry();
  const InverseKinematics ik = inverse_kinematics(Pose{0.04, 0.78, 0.15, 0.0}, g);
  EXPECT_NEAR(ik.joints[1], ik.joints[2], 1e-15);
  const Vec3 d2 = ik.limbs[1].direction, d3 = ik.limbs[2].direction;
  EXPECT_LT((d2 - Vec3(d3.x(), -d3.y(), d3.z())).norm(), 1e-15);
}
