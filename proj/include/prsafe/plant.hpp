#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "prsafe/kinematics.hpp"
#include "prsafe/screw.hpp"

namespace prsafe {

/// First-order, velocity-limited actuator servo standing in for the
/// hardware inner loop. Control actions follow a PD law on the command.
struct ServoParams {
  Vec4 kp = Vec4::Constant(4000.0);  // N/m
  Vec4 kd = Vec4::Constant(200.0);   // N*s/m
  Vec4 time_constant = Vec4::Constant(0.02);  // s
  Vec4 velocity_limit = Vec4::Constant(0.05);  // m/s
  Vec4 saturation = Vec4::Constant(500.0);     // |u| bound

  void validate() const {
    if (!((kp.array() > 0).all() && (kd.array() >= 0).all() && (time_constant.array() > 0).all() &&
          (velocity_limit.array() > 0).all() && (saturation.array() > 0).all())) {
      throw ConfigError("servo: gains, time constants and limits must be positive");
    }
  }
};

struct PlantParams {
  double substep = 0.001;          // s
  double breach_threshold = 0.5;   // deg, on min Omega of the true pose
  double drift_speed = 0.05;       // task-space units per second after a breach

  void validate() const {
    if (!(substep > 0.0)) throw ConfigError("plant: substep must be positive");
    if (!(breach_threshold >= 0.0)) throw ConfigError("plant: breach threshold must be non-negative");
    if (!(drift_speed >= 0.0)) throw ConfigError("plant: drift speed must be non-negative");
  }
};

struct PlantState {
  double time = 0.0;
  Vec4 joints = Vec4::Zero();
  Vec4 joint_rates = Vec4::Zero();
  Pose pose;
  bool breached = false;
  Vec4 drift_direction = Vec4::Zero();
  double min_omega = 180.0;  // deg, true pose
  Vec4 last_command = Vec4::Zero();
};

struct PlantStepResult {
  Vec4 control = Vec4::Zero();  // u at the tick boundary
  bool breach = false;          // breach latched during this step
};

/// Unit task-space direction spanning the (near) null space of J_D,
/// oriented so the platform height does not increase.
inline Vec4 falling_direction(const Pose& pose, const RobotGeometry& g) {
  const Mat4 jd = jacobians(pose, g).forward;
  const Eigen::JacobiSVD<Mat4> svd(jd, Eigen::ComputeFullV);
  Vec4 d = svd.matrixV().col(3);
  if (d[1] > 0.0) d = -d;
  return d;
}

/// Simulated robot: servo-tracked actuators, pose from forward kinematics of
/// the true joint lengths, latched loss of control near Type II singularity.
class Plant {
 public:
  Plant(const RobotGeometry& g, const ServoParams& servo, const PlantParams& params, const Pose& initial)
      : g_(g), servo_(servo), params_(params) {
    servo_.validate();
    params_.validate();
    reset(initial);
  }

  void reset(const Pose& initial) {
    state_ = PlantState{};
    state_.pose = initial;
    state_.joints = actuator_lengths(initial, g_).q;
    state_.last_command = state_.joints;
    state_.min_omega = omega_indices(initial, g_).min;
    history_.clear();
    history_.push_back({0.0, initial});
  }

  const PlantState& state() const { return state_; }
  const RobotGeometry& geometry() const { return g_; }

  /// Advances by `dt` holding `command`. Throws SimulationFault when the true
  /// configuration has no forward-kinematics solution.
  PlantStepResult step(const JointVector& command, double dt) {
    if (!(dt > 0.0)) throw Error("plant: step must be positive");
    PlantStepResult out;
    const Vec4 cmd = command.q;
    const Vec4 cmd_rate = (cmd - state_.last_command) / dt;
    out.control = control_action(cmd, cmd_rate);
    state_.last_command = cmd;

    const int n = std::max(1, static_cast<int>(std::lround(dt / params_.substep)));
    const double h = dt / n;
    for (int i = 0; i < n; ++i) {
      advance_servo(cmd, h);
      state_.time += h;
      if (state_.breached) {
        drift(h);
      } else {
        track_pose();
        if (state_.min_omega < params_.breach_threshold) {
          state_.breached = true;
          out.breach = true;
          state_.drift_direction = falling_direction(state_.pose, g_);
        }
      }
      record();
    }
    return out;
  }

  /// True pose at time `t` (linear interpolation of the substep history).
  Pose pose_at(double t) const {
    if (t <= history_.front().time) return history_.front().pose;
    for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
      if (it->time <= t) {
        const auto next = it.base();
        if (next == history_.end()) return it->pose;
        const double w = (t - it->time) / (next->time - it->time);
        return Pose::from_vector((1.0 - w) * it->pose.vector() + w * next->pose.vector());
      }
    }
    return history_.front().pose;
  }

 private:
  struct Sample {
    double time;
    Pose pose;
  };

  Vec4 control_action(const Vec4& cmd, const Vec4& cmd_rate) const {
    const Vec4 u = servo_.kp.cwiseProduct(cmd - state_.joints) + servo_.kd.cwiseProduct(cmd_rate - state_.joint_rates);
    return u.cwiseMax(-servo_.saturation).cwiseMin(servo_.saturation);
  }

  void advance_servo(const Vec4& cmd, double h) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double q = state_.joints[i];
      const double lagged = cmd[i] + (q - cmd[i]) * std::exp(-h / servo_.time_constant[i]);
      const double vmax = servo_.velocity_limit[i];
      double next = lagged;
      if (std::abs(lagged - q) > vmax * h) next = q + std::copysign(vmax * h, lagged - q);
      state_.joints[i] = next;
      state_.joint_rates[i] =
          std::clamp((cmd[i] - next) / servo_.time_constant[i], -vmax, vmax);
    }
  }

  void track_pose() {
    const auto fk = solve_forward_kinematics(JointVector(state_.joints), g_, state_.pose);
    if (!fk) {
      throw SimulationFault("plant: forward kinematics failed at t=" + std::to_string(state_.time));
    }
    state_.pose = fk->pose;
    state_.min_omega = omega_indices(state_.pose, g_).min;
  }

  void drift(double h) {
    state_.drift_direction = falling_direction(state_.pose, g_);
    state_.pose = Pose::from_vector(state_.pose.vector() + params_.drift_speed * h * state_.drift_direction);
    try {
      state_.min_omega = omega_indices(state_.pose, g_).min;
    } catch (const KinematicsError&) {
      state_.min_omega = 0.0;
    }
  }

  void record() {
    history_.push_back({state_.time, state_.pose});
    while (history_.size() > kHistory) history_.pop_front();
  }

  static constexpr std::size_t kHistory = 4096;

  RobotGeometry g_;
  ServoParams servo_;
  PlantParams params_;
  PlantState state_;
  std::deque<Sample> history_;
};

namespace detail {

// Independent, reproducible stream per (seed, channel, sample index).
inline std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t channel, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Camera-tracker surrogate: periodic captures delivered after a fixed latency.
struct PoseSensorParams {
  bool noise_enabled = true;
  Vec4 noise_sigma = Vec4::Constant(1e-4);  // m, m, rad, rad
  double rate = 120.0;                      // Hz; <= 0 samples continuously
  double latency = 0.0083;                  // s

  void validate() const {
    if (!((noise_sigma.array() >= 0).all() && latency >= 0.0)) {
      throw ConfigError("pose sensor: noise and latency must be non-negative");
    }
  }
};

class PoseSensor {
 public:
  PoseSensor(const PoseSensorParams& p, std::uint64_t seed) : p_(p), seed_(seed) { p_.validate(); }

  /// Capture instant whose data is the newest available at time `t`.
  double capture_time(double t) const {
    const double avail = std::max(0.0, t - p_.latency);
    if (p_.rate <= 0.0) return avail;
    return std::floor(avail * p_.rate + 1e-9) / p_.rate;
  }

  template <typename PoseSource>
  Pose sense(const PoseSource& truth_at, double t) const {
    const double tc = capture_time(t);
    Pose pose = truth_at(tc);
    if (p_.noise_enabled && (p_.noise_sigma.array() > 0).any()) {
      const auto index = static_cast<std::uint64_t>(std::llround(p_.rate > 0.0 ? tc * p_.rate : tc * 1e6));
      auto rng = detail::keyed_rng(seed_, 1, index);
      std::normal_distribution<double> n01(0.0, 1.0);
      Vec4 v = pose.vector();
      for (Eigen::Index i = 0; i < 4; ++i) v[i] += p_.noise_sigma[i] * n01(rng);
      pose = Pose::from_vector(v);
    }
    return pose;
  }

  const PoseSensorParams& params() const { return p_; }

 private:
  PoseSensorParams p_;
  std::uint64_t seed_;
};

/// Force/torque sensor: quantisation, additive noise, range clamp and a dead
/// zone of three unloaded standard deviations.
struct ForceSensorParams {
  Vec4 resolution{0.065, 0.125, 0.004, 0.004};
  Vec4 noise_sigma{0.065, 0.125, 0.004, 0.004};
  bool noise_enabled = true;
  Vec4 range{330.0, 990.0, 30.0, 30.0};

  Vec4 dead_zone() const { return 3.0 * noise_sigma; }

  void validate() const {
    if (!((resolution.array() >= 0).all() && (noise_sigma.array() >= 0).all() && (range.array() > 0).all())) {
      throw ConfigError("force sensor: resolution and noise must be non-negative, range positive");
    }
  }
};

class ForceSensor {
 public:
  ForceSensor(const ForceSensorParams& p, std::uint64_t seed) : p_(p), seed_(seed) { p_.validate(); }

  ForceVector sense(const ForceVector& source, std::uint64_t tick) const {
    Vec4 v = source.vector().cwiseMax(-p_.range).cwiseMin(p_.range);
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (p_.resolution[i] > 0.0) v[i] = std::round(v[i] / p_.resolution[i]) * p_.resolution[i];
    }
    if (p_.noise_enabled && (p_.noise_sigma.array() > 0).any()) {
      auto rng = detail::keyed_rng(seed_, 2, tick);
      std::normal_distribution<double> n01(0.0, 1.0);
      for (Eigen::Index i = 0; i < 4; ++i) v[i] += p_.noise_sigma[i] * n01(rng);
    }
    const Vec4 dz = p_.dead_zone();
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (std::abs(v[i]) < dz[i]) v[i] = 0.0;
    }
    return ForceVector::from_vector(v);
  }

  const ForceSensorParams& params() const { return p_; }

 private:
  ForceSensorParams p_;
  std::uint64_t seed_;
};

enum class RampShape { step, linear };

struct ForceSegment {
  double start = 0.0;
  double duration = 0.0;
  ForceVector target;
  RampShape ramp = RampShape::linear;
};

/// Scripted patient effort. Each segment moves from the value held at its
/// start to `target` (instantly or linearly over `duration`) and the target
/// is held until the next segment.
class ForceScript {
 public:
  ForceScript() = default;
  explicit ForceScript(std::vector<ForceSegment> segments) : segments_(std::move(segments)) { validate(); }

  void validate() const {
    double end = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      if (!(s.duration >= 0.0) || !std::isfinite(s.start)) {
        throw ConfigError("force script: segment " + std::to_string(i) + " has an invalid time span");
      }
      if (s.start < end) throw ConfigError("force script: segment " + std::to_string(i) + " overlaps its predecessor");
      end = s.start + s.duration;
    }
  }

  ForceVector value_at(double t) const {
    Vec4 held = Vec4::Zero();
    for (const auto& s : segments_) {
      if (t < s.start) break;
      const Vec4 target = s.target.vector();
      if (s.ramp == RampShape::step || s.duration == 0.0 || t >= s.start + s.duration) {
        held = target;
      } else {
        const double w = (t - s.start) / s.duration;
        return ForceVector::from_vector(held + w * (target - held));
      }
    }
    return ForceVector::from_vector(held);
  }

  const std::vector<ForceSegment>& segments() const { return segments_; }

 private:
  std::vector<ForceSegment> segments_;
};

}  // namespace prsafe
