#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace prsafe {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr std::size_t kActuators = 4;
inline constexpr std::size_t kExternalLimbs = 3;
inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Base for every recoverable error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class KinematicsError : public Error {
 public:
  using Error::Error;
};

class DegeneratePoseError : public KinematicsError {
 public:
  using KinematicsError::KinematicsError;
};

class ForwardKinematicsError : public KinematicsError {
 public:
  using KinematicsError::KinematicsError;
};

class SimulationFault : public Error {
 public:
  using Error::Error;
};

/// Task-space location of the mobile platform: two translations in the
/// X_f-Z_f plane plus rotations about Y (theta) and Z (psi).
struct Pose {
  double x = 0.0;      // m
  double z = 0.0;      // m
  double theta = 0.0;  // rad
  double psi = 0.0;    // rad

  static Pose from_vector(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
  Vec4 vector() const { return {x, z, theta, psi}; }
  Vec3 position() const { return {x, 0.0, z}; }

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Actuator lengths of limbs 1-4 (q13, q23, q33, q42), metres.
struct JointVector {
  Vec4 q = Vec4::Zero();

  JointVector() = default;
  explicit JointVector(const Vec4& v) : q(v) {}
  JointVector(double q13, double q23, double q33, double q42) : q(q13, q23, q33, q42) {}

  double& operator[](std::size_t i) { return q[static_cast<Eigen::Index>(i)]; }
  double operator[](std::size_t i) const { return q[static_cast<Eigen::Index>(i)]; }

  bool valid() const { return q.allFinite() && (q.array() >= 0.0).all(); }
};

/// Force/moment components acting in the robot's four degrees of freedom.
struct ForceVector {
  double fx = 0.0;  // N
  double fz = 0.0;  // N
  double my = 0.0;  // N*m
  double mz = 0.0;  // N*m

  static ForceVector from_vector(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
  Vec4 vector() const { return {fx, fz, my, mz}; }

  friend bool operator==(const ForceVector&, const ForceVector&) = default;
};

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

inline Mat3 rot_y_derivative(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}

inline Mat3 rot_z_derivative(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}

/// Platform orientation, R = Rot_y(theta) * Rot_z(psi).
inline Mat3 orientation(const Pose& pose) { return rot_y(pose.theta) * rot_z(pose.psi); }

/// Spatial angular velocity produced by pose rates (theta_dot, psi_dot).
inline Vec3 angular_velocity(const Pose& pose, double theta_dot, double psi_dot) {
  return theta_dot * Vec3::UnitY() + psi_dot * (rot_y(pose.theta) * Vec3::UnitZ());
}

}  // namespace prsafe
