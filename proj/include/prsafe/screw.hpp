#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <string>

#include "prsafe/kinematics.hpp"

namespace prsafe {

enum class ScrewKind { twist, wrench };

/// Six-component screw. Twists store (omega; velocity of O_m); wrenches store
/// (force; moment about O_m).
struct Screw {
  Vec3 angular = Vec3::Zero();
  Vec3 linear = Vec3::Zero();
  ScrewKind kind = ScrewKind::twist;

  static Screw twist(const Vec3& w, const Vec3& v) { return {w, v, ScrewKind::twist}; }
  static Screw wrench(const Vec3& f, const Vec3& m) { return {f, m, ScrewKind::wrench}; }
};

/// omega . m + v . f; zero when the wrench does no work on the twist.
inline double reciprocal_product(const Screw& twist, const Screw& wrench) {
  return twist.angular.dot(wrench.linear) + twist.linear.dot(wrench.angular);
}

inline std::array<Screw, 4> transmission_wrenches(const std::array<LimbFrame, 4>& limbs) {
  std::array<Screw, 4> w;
  for (std::size_t l = 0; l < 3; ++l) {
    const Vec3& z = limbs[l].direction;
    w[l] = Screw::wrench(z, limbs[l].moment_arm.cross(z));
  }
  w[3] = Screw::wrench(limbs[3].direction, Vec3::Zero());
  return w;
}

inline std::array<Screw, 4> transmission_wrenches(const Pose& pose, const RobotGeometry& g) {
  return transmission_wrenches(limb_frames(pose, g));
}

/// Actuator pair (zero-based indices). Rows of the pair table, in the order
/// the six proximity indices are stored.
struct ActuatorPair {
  std::size_t first = 0;
  std::size_t second = 1;

  std::string label() const { return std::to_string(first + 1) + "," + std::to_string(second + 1); }
  friend bool operator==(const ActuatorPair&, const ActuatorPair&) = default;
};

inline constexpr std::array<ActuatorPair, 6> kActuatorPairs{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct OutputTwists {
  std::array<Screw, 4> twists;       // normalised to |omega| = 1 where defined
  std::array<bool, 4> defined{};     // false for pure translations
  bool near_singular = false;
  double det = 0.0;                  // det J_D
  double condition = 0.0;            // sigma_max / sigma_min of J_D
};

inline constexpr double kNearSingularCondition = 1e10;
inline constexpr double kUndefinedOmegaNorm = 1e-9;

/// Maps a task-space rate (xdot, zdot, thetadot, psidot) to the spatial twist
/// of the platform at O_m.
inline Screw task_rate_to_twist(const Pose& pose, const Vec4& rate) {
  return Screw::twist(angular_velocity(pose, rate[2], rate[3]), Vec3(rate[0], 0.0, rate[1]));
}

/// Output twist of each actuator: the platform motion produced when that
/// actuator moves at unit speed with the other three locked.
inline OutputTwists output_twists(const Pose& pose, const RobotGeometry& g) {
  const Jacobians jac = jacobians(pose, g);
  OutputTwists out;
  out.det = jac.forward.determinant();
  const Eigen::JacobiSVD<Mat4> svd(jac.forward, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec4 sv = svd.singularValues();
  out.condition = sv[3] > 0.0 ? sv[0] / sv[3] : std::numeric_limits<double>::infinity();
  Mat4 rates;
  if (out.condition > kNearSingularCondition) {
    out.near_singular = true;
    const double floor = sv[0] * 1e-16;
    const Vec4 inv = sv.unaryExpr([floor](double s) { return 1.0 / std::max(s, floor); });
    rates = -(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose()) * jac.inverse;
  } else {
    rates = -jac.forward.partialPivLu().solve(jac.inverse);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    Screw t = task_rate_to_twist(pose, rates.col(static_cast<Eigen::Index>(i)));
    const double n = t.angular.norm();
    out.defined[i] = n >= kUndefinedOmegaNorm;
    if (out.defined[i]) {
      t.angular /= n;
      t.linear /= n;
    }
    out.twists[i] = t;
  }
  return out;
}

/// Six pairwise angles (deg) between output-twist axes, ordered as
/// kActuatorPairs, with the minimum and the pair responsible for it.
struct OmegaVector {
  std::array<double, 6> angles{};
  double min = 0.0;
  std::size_t min_index = 0;
  ActuatorPair pair;
  bool near_singular = false;

  double operator[](std::size_t i) const { return angles[i]; }
  double at(const ActuatorPair& p) const {
    for (std::size_t k = 0; k < kActuatorPairs.size(); ++k) {
      if (kActuatorPairs[k] == p) return angles[k];
    }
    throw Error("unknown actuator pair");
  }
};

inline constexpr double kUndefinedPairAngle = 180.0;
inline constexpr double kSingularDetRatio = 1e-12;

inline double axis_angle_deg(const Vec3& a, const Vec3& b) {
  return rad2deg(std::acos(std::clamp(a.dot(b), -1.0, 1.0)));
}

inline OmegaVector omega_indices(const OutputTwists& ots, double reference_det) {
  OmegaVector out;
  out.near_singular = ots.near_singular;
  for (std::size_t k = 0; k < kActuatorPairs.size(); ++k) {
    const auto [i, j] = kActuatorPairs[k];
    out.angles[k] = (ots.defined[i] && ots.defined[j])
                        ? axis_angle_deg(ots.twists[i].angular, ots.twists[j].angular)
                        : kUndefinedPairAngle;
  }
  const auto it = std::min_element(out.angles.begin(), out.angles.end());
  out.min_index = static_cast<std::size_t>(it - out.angles.begin());
  out.min = *it;
  out.pair = kActuatorPairs[out.min_index];
  if (std::abs(ots.det) < kSingularDetRatio * std::abs(reference_det)) out.min = 0.0;
  return out;
}

inline double reference_det(const RobotGeometry& g) { return jacobians(g.home, g).forward.determinant(); }

inline OmegaVector omega_indices(const Pose& pose, const RobotGeometry& g) {
  return omega_indices(output_twists(pose, g), reference_det(g));
}

}  // namespace prsafe
