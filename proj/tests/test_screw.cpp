#include <gtest/gtest.h>

#include "prsafe/screw.hpp"
#include "support.hpp"

using namespace prsafe;
using prsafe::testing::explicit_geometry;

namespace {

// Omega angles (deg) at the scenario start pose, from an independent NumPy
// implementation. Pair order (1,2) (1,3) (1,4) (2,3) (2,4) (3,4).
const std::array<double, 6> kScenarioOmega{82.657475714734503, 92.004383648452759, 96.904458396331151,
                                           174.66185936318735, 14.246982681596659, 171.09115795521609};

// Angular-velocity direction produced by moving actuator i alone, estimated
// by differencing forward kinematics.
Vec3 fk_axis(const Pose& p, const RobotGeometry& g, std::size_t i) {
  const double h = 1e-7;
  JointVector a = actuator_lengths(p, g), b = a;
  a[i] += h;
  b[i] -= h;
  const Pose pa = forward_kinematics(a, g, p), pb = forward_kinematics(b, g, p);
  const Vec4 rate = (pa.vector() - pb.vector()) / (2 * h);
  return angular_velocity(p, rate[2], rate[3]).normalized();
}

double singular_psi(const RobotGeometry& g, double lo, double hi) {
  const auto det = [&](double psi) { return jacobians(Pose{-0.2, 0.75, 0.0, psi}, g).forward.determinant(); };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (det(mid) > 0) == (det(lo) > 0) ? lo = mid : hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Screw, ReciprocalProductPairsAngularWithMoment) {
  const Screw t = Screw::twist(Vec3(1, 2, 3), Vec3(4, 5, 6));
  const Screw w = Screw::wrench(Vec3(-1, 0, 2), Vec3(3, -2, 1));
  EXPECT_DOUBLE_EQ(reciprocal_product(t, w), (1 * 3 + 2 * -2 + 3 * 1) + (4 * -1 + 5 * 0 + 6 * 2));
}

TEST(Screw, OutputTwistsAreReciprocalToOtherLimbs) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_regular_poses(g, 100, 11, 1.0)) {
    const OutputTwists ots = output_twists(p, g);
    const auto wr = transmission_wrenches(p, g);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double v = reciprocal_product(ots.twists[i], wr[j]);
        if (i == j) {
          EXPECT_GT(std::abs(v), 1e-6);
        } else {
          EXPECT_LT(std::abs(v), 1e-8);
        }
      }
    }
  }
}

TEST(Screw, OutputTwistAxesMatchForwardKinematicsDifferencing) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_regular_poses(g, 50, 12, 5.0)) {
    const OutputTwists ots = output_twists(p, g);
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_TRUE(ots.defined[i]);
      EXPECT_LT(axis_angle_deg(ots.twists[i].angular, fk_axis(p, g, i)), 0.01);
    }
  }
}

TEST(Omega, MatchesReferenceAtScenarioPose) {
  const RobotGeometry g = explicit_geometry();
  const OmegaVector om = omega_indices(Pose{-0.2, 0.75, 0.0, -0.64}, g);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(om[k], kScenarioOmega[k], 1e-9);
  EXPECT_NEAR(om.min, kScenarioOmega[4], 1e-9);
  EXPECT_EQ(om.pair, (ActuatorPair{1, 3}));
  EXPECT_EQ(om.pair.label(), "2,4");
  EXPECT_FALSE(om.near_singular);
}

TEST(Omega, PairOrderIsFixed) {
  const char* labels[] = {"1,2", "1,3", "1,4", "2,3", "2,4", "3,4"};
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(kActuatorPairs[k].label(), labels[k]);
}

TEST(Omega, AnglesStayInRangeAndMinimumIsConsistent) {
  const RobotGeometry g = explicit_geometry();
  for (const Pose& p : prsafe::testing::random_poses(g, 200, 13)) {
    const OmegaVector om = omega_indices(p, g);
    for (double a : om.angles) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 180.0);
    }
    EXPECT_EQ(om.min, *std::min_element(om.angles.begin(), om.angles.end()));
    EXPECT_EQ(om.pair, kActuatorPairs[om.min_index]);
  }
}

TEST(Omega, UndefinedTwistGivesStraightAngle) {
  OutputTwists ots;
  for (std::size_t i = 0; i < 4; ++i) ots.twists[i] = Screw::twist(Vec3::UnitY(), Vec3::Zero());
  ots.twists[0].angular = Vec3(std::sin(0.1), std::cos(0.1), 0.0);
  ots.defined = {true, true, true, false};
  ots.det = 1.0;
  const OmegaVector om = omega_indices(ots, 1.0);
  EXPECT_EQ(om[2], kUndefinedPairAngle);
  EXPECT_EQ(om[4], kUndefinedPairAngle);
  EXPECT_EQ(om[5], kUndefinedPairAngle);
  EXPECT_NEAR(om[0], rad2deg(0.1), 1e-12);
  EXPECT_EQ(om.min, 0.0);  // (2,3) parallel
}

TEST(Omega, RoundingNeverProducesNaN) {
  const Vec3 a = Vec3(1, 1e-17, 0).normalized();
  EXPECT_EQ(axis_angle_deg(a, a * (1 + 1e-16)), 0.0);
  EXPECT_EQ(axis_angle_deg(a, -a * (1 + 1e-16)), 180.0);
}

TEST(Omega, DetectsSingularityBeforeDeterminantVanishes) {
  const RobotGeometry g = explicit_geometry();
  const double ref = reference_det(g);
  const double psi_star = singular_psi(g, -0.64, -0.76);
  std::optional<double> first_small_omega, first_tiny_det;
  for (int k = 0; k <= 80; ++k) {
    const double psi = psi_star + 0.1 * std::pow(10.0, -k / 8.0);
    const OutputTwists ots = output_twists(Pose{-0.2, 0.75, 0.0, psi}, g);
    if (!first_small_omega && omega_indices(ots, ref).min < 0.5) first_small_omega = k;
    if (!first_tiny_det && std::abs(ots.det) < 1e-9 * std::abs(ref)) first_tiny_det = k;
  }
  ASSERT_TRUE(first_small_omega && first_tiny_det);
  EXPECT_LT(*first_small_omega, *first_tiny_det);
}

TEST(Omega, ExactSingularityIsFlagged) {
  const RobotGeometry g = explicit_geometry();
  const double psi_star = singular_psi(g, -0.64, -0.76);
  const OutputTwists ots = output_twists(Pose{-0.2, 0.75, 0.0, psi_star}, g);
  EXPECT_TRUE(ots.near_singular);
  const OmegaVector om = omega_indices(ots, reference_det(g));
  EXPECT_EQ(om.min, 0.0);
  EXPECT_EQ(om.pair.label(), "2,4");
}

TEST(Omega, PairedLinearPartsAlignNearSingularity) {
  const RobotGeometry g = explicit_geometry();
  const double psi_star = singular_psi(g, -0.64, -0.76);
  const double ref = reference_det(g);
  int checked = 0;
  for (int k = 16; k <= 64; ++k) {
    const Pose p{-0.2, 0.75, 0.0, psi_star + 0.1 * std::pow(10.0, -k / 8.0)};
    const OutputTwists ots = output_twists(p, g);
    const OmegaVector om = omega_indices(ots, ref);
    if (om.min >= 0.1 || ots.near_singular) continue;
    const Vec3 a = ots.twists[om.pair.first].linear.normalized();
    const Vec3 b = ots.twists[om.pair.second].linear.normalized();
    EXPECT_LT(a.cross(b).norm(), 1e-2) << "k=" << k;
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Screw, MirroredLimbsHaveMirroredAxes) {
  // Put limb 1 on the mirror plane so the whole mechanism is symmetric.
  RobotGeometry g = explicit_geometry();
  g.fixed_anchors[0] = Vec3(0.3, 0.0, 0.0);
  g.mobile_anchors[0] = Vec3(0.2, 0.0, 0.0);
  const OutputTwists ots = output_twists(Pose{0.04, 0.78, 0.15, 0.0}, g);
  // Angular velocity is axial: a y-reflection maps (wx, wy, wz) to (-wx, wy, -wz).
  const Vec3 w3 = ots.twists[2].angular;
  EXPECT_LT((ots.twists[1].angular - Vec3(-w3.x(), w3.y(), -w3.z())).norm(), 1e-12);
}
