#pragma once

#include <algorithm>
#include <array>
#include <optional>

#include "prsafe/geometry.hpp"
#include "prsafe/types.hpp"

namespace prsafe {

/// Universal-joint angles of the external limbs and the central revolute angle.
struct PassiveJoints {
  std::array<double, 3> first{};   // q11, q21, q31
  std::array<double, 3> second{};  // q12, q22, q32
  double central = 0.0;            // q41
  // True where sin(q_l2) vanishes and the first angle cannot be recovered.
  std::array<bool, 3> indeterminate{};
};

struct LimbFrame {
  Vec3 attachment = Vec3::Zero();  // world position of the mobile-side joint
  Vec3 direction = Vec3::UnitZ();  // unit vector from fixed anchor to attachment
  double length = 0.0;
  Vec3 moment_arm = Vec3::Zero();  // O_m -> attachment, fixed-frame coordinates
};

struct InverseKinematics {
  JointVector joints;
  PassiveJoints passive;
  std::array<LimbFrame, 4> limbs;
};

/// Limb direction parameterised by the two universal-joint angles.
inline Vec3 universal_direction(double q1, double q2) {
  return {std::cos(q1) * std::sin(q2), -std::cos(q2), std::sin(q1) * std::sin(q2)};
}

/// Central limb direction parameterised by its revolute angle.
inline Vec3 revolute_direction(double q41) { return {-std::sin(q41), 0.0, std::cos(q41)}; }

namespace detail {

inline constexpr double kUniversalSingularTol = 1e-9;

inline LimbFrame make_limb(const Vec3& fixed, const Vec3& attachment, const Vec3& moment_arm) {
  LimbFrame limb;
  limb.attachment = attachment;
  const Vec3 s = attachment - fixed;
  limb.length = s.norm();
  if (!(limb.length > 1e-12)) throw DegeneratePoseError("zero-length limb");
  limb.direction = s / limb.length;
  limb.moment_arm = moment_arm;
  return limb;
}

}  // namespace detail

inline std::array<LimbFrame, 4> limb_frames(const Pose& pose, const RobotGeometry& g) {
  if (!pose.vector().allFinite()) throw DegeneratePoseError("non-finite pose");
  const Mat3 r = orientation(pose);
  const Vec3 p = pose.position();
  std::array<LimbFrame, 4> limbs;
  for (std::size_t l = 0; l < 3; ++l) {
    const Vec3 arm = r * g.mobile_anchors[l];
    limbs[l] = detail::make_limb(g.fixed_anchors[l], p + arm, arm);
  }
  limbs[3] = detail::make_limb(g.fixed_anchors[3], p, Vec3::Zero());
  return limbs;
}

inline PassiveJoints passive_joints(const std::array<LimbFrame, 4>& limbs) {
  PassiveJoints pj;
  for (std::size_t l = 0; l < 3; ++l) {
    const Vec3& u = limbs[l].direction;
    pj.second[l] = std::acos(std::clamp(-u.y(), -1.0, 1.0));
    if (std::sin(pj.second[l]) < detail::kUniversalSingularTol) {
      pj.indeterminate[l] = true;
      pj.first[l] = 0.0;
    } else {
      pj.first[l] = std::atan2(u.z(), u.x());
    }
  }
  const Vec3& u4 = limbs[3].direction;
  pj.central = std::atan2(-u4.x(), u4.z());
  return pj;
}

inline InverseKinematics inverse_kinematics(const Pose& pose, const RobotGeometry& g) {
  InverseKinematics ik;
  ik.limbs = limb_frames(pose, g);
  for (std::size_t l = 0; l < 4; ++l) ik.joints[l] = ik.limbs[l].length;
  ik.passive = passive_joints(ik.limbs);
  return ik;
}

inline JointVector actuator_lengths(const Pose& pose, const RobotGeometry& g) {
  return inverse_kinematics(pose, g).joints;
}

/// Squared-length loop-closure residuals, m^2.
inline Vec4 closure_residuals(const Pose& pose, const JointVector& q, const RobotGeometry& g) {
  const Mat3 r = orientation(pose);
  const Vec3 p = pose.position();
  Vec4 res;
  for (std::size_t l = 0; l < 3; ++l) {
    const Vec3 s = p + r * g.mobile_anchors[l] - g.fixed_anchors[l];
    res[static_cast<Eigen::Index>(l)] = s.squaredNorm() - q[l] * q[l];
  }
  res[3] = (p - g.fixed_anchors[3]).squaredNorm() - q[3] * q[3];
  return res;
}

/// Velocity relation J_D * Xdot + J_I * qdot = 0 with J_I = -I: each row of
/// J_D projects the attachment-point velocity onto the unit limb direction.
struct Jacobians {
  Mat4 forward = Mat4::Zero();
  Mat4 inverse = -Mat4::Identity();
};

inline Mat4 forward_jacobian(const Pose& pose, const RobotGeometry& g,
                             const std::array<LimbFrame, 4>& limbs) {
  const Mat3 ry = rot_y(pose.theta), rz = rot_z(pose.psi);
  const Mat3 d_theta = rot_y_derivative(pose.theta) * rz;
  const Mat3 d_psi = ry * rot_z_derivative(pose.psi);
  Mat4 jd;
  for (std::size_t l = 0; l < 3; ++l) {
    const Vec3& u = limbs[l].direction;
    const Vec3& m = g.mobile_anchors[l];
    const auto row = static_cast<Eigen::Index>(l);
    jd(row, 0) = u.x();
    jd(row, 1) = u.z();
    jd(row, 2) = u.dot(d_theta * m);
    jd(row, 3) = u.dot(d_psi * m);
  }
  const Vec3& u4 = limbs[3].direction;
  jd.row(3) << u4.x(), u4.z(), 0.0, 0.0;
  return jd;
}

inline Jacobians jacobians(const Pose& pose, const RobotGeometry& g) {
  Jacobians j;
  j.forward = forward_jacobian(pose, g, limb_frames(pose, g));
  return j;
}

struct ForwardKinematicsOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;  // m^2, on max |closure residual|
  int max_halvings = 30;
};

struct ForwardKinematicsSolution {
  Pose pose;
  int iterations = 0;  // Newton passes, counting the one that detected convergence
  double residual = 0.0;
};

/// Damped Newton-Raphson on the four closure residuals, warm-started from
/// `initial`. Returns nullopt on non-convergence or a singular Newton matrix.
inline std::optional<ForwardKinematicsSolution> solve_forward_kinematics(
    const JointVector& q, const RobotGeometry& g, const Pose& initial,
    const ForwardKinematicsOptions& opt = {}) {
  if (!q.q.allFinite() || !initial.vector().allFinite()) return std::nullopt;
  Vec4 x = initial.vector();
  Vec4 res = closure_residuals(initial, q, g);
  double norm = res.cwiseAbs().maxCoeff();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    if (norm < opt.tolerance) return ForwardKinematicsSolution{Pose::from_vector(x), it, norm};
    const Pose pose = Pose::from_vector(x);
    Mat4 jac;
    try {
      const auto limbs = limb_frames(pose, g);
      jac = forward_jacobian(pose, g, limbs);
      for (std::size_t l = 0; l < 4; ++l) jac.row(static_cast<Eigen::Index>(l)) *= 2.0 * limbs[l].length;
    } catch (const KinematicsError&) {
      return std::nullopt;
    }
    const Eigen::PartialPivLU<Mat4> lu(jac);
    if (!(lu.rcond() > 1e-15)) return std::nullopt;
    const Vec4 step = lu.solve(-res);
    double alpha = 1.0;
    Vec4 trial = x + step;
    Vec4 trial_res = closure_residuals(Pose::from_vector(trial), q, g);
    double trial_norm = trial_res.cwiseAbs().maxCoeff();
    for (int h = 0; h < opt.max_halvings && !(trial_norm <= norm); ++h) {
      alpha *= 0.5;
      trial = x + alpha * step;
      trial_res = closure_residuals(Pose::from_vector(trial), q, g);
      trial_norm = trial_res.cwiseAbs().maxCoeff();
    }
    if (!(trial_norm <= norm) && !(trial_norm < opt.tolerance)) return std::nullopt;
    x = trial;
    res = trial_res;
    norm = trial_norm;
  }
  if (norm < opt.tolerance) return ForwardKinematicsSolution{Pose::from_vector(x), opt.max_iterations, norm};
  return std::nullopt;
}

inline Pose forward_kinematics(const JointVector& q, const RobotGeometry& g, const Pose& initial,
                               const ForwardKinematicsOptions& opt = {}) {
  auto sol = solve_forward_kinematics(q, g, initial, opt);
  if (!sol) throw ForwardKinematicsError("forward kinematics did not converge");
  return sol->pose;
}

/// Angle (deg) between each external limb and the platform normal Z_m.
inline Vec3 socket_angles(const Pose& pose, const RobotGeometry& g) {
  const auto limbs = limb_frames(pose, g);
  const Vec3 zm = orientation(pose).col(2);
  Vec3 a;
  for (std::size_t l = 0; l < 3; ++l) {
    a[static_cast<Eigen::Index>(l)] = rad2deg(std::acos(std::clamp(limbs[l].direction.dot(zm), -1.0, 1.0)));
  }
  return a;
}

inline bool within_joint_limits(const JointVector& q, const RobotGeometry& g) {
  return (q.q.array() > g.joint_min.array()).all() && (q.q.array() < g.joint_max.array()).all();
}

}  // namespace prsafe
