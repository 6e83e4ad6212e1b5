#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "prsafe/kinematics.hpp"
#include "prsafe/screw.hpp"

namespace prsafe {

using ModificationMatrix = Eigen::Matrix<int, 2, Eigen::Dynamic>;

/// The eight unit modifications of an actuator pair: both forward, both
/// backward, opposite directions, or only one actuator moving.
inline ModificationMatrix pair_modifications() {
  ModificationMatrix m(2, 8);
  m << 1, -1, 1, -1, 1, -1, 0, 0,
       1, -1, -1, 1, 0, 0, 1, -1;
  return m;
}

struct AvoidanceParams {
  double avoidance_speed = 0.01;  // v_d, m/s
  double sample_time = 0.01;      // t_s, s
  double omega_limit = 2.0;       // deg
  // An episode ends once the layer has been quiet (gate open, no deviation)
  // this long. The gate itself is not delayed.
  double release_time = 1.0;  // s

  /// Per-tick actuator displacement of one deviation step.
  double step_length() const { return avoidance_speed * sample_time; }

  int release_ticks() const { return static_cast<int>(std::lround(release_time / sample_time)); }

  void validate() const {
    if (!(avoidance_speed > 0.0)) throw ConfigError("avoidance: v_d must be positive");
    if (!(sample_time > 0.0)) throw ConfigError("avoidance: t_s must be positive");
    if (!(omega_limit > 0.0)) throw ConfigError("avoidance: omega limit must be positive");
    if (!(release_time >= 0.0)) throw ConfigError("avoidance: release time must be non-negative");
  }
};

enum class AvoidancePhase { idle, avoiding, returning };

inline const char* to_string(AvoidancePhase p) {
  switch (p) {
    case AvoidancePhase::idle: return "idle";
    case AvoidancePhase::avoiding: return "avoiding";
    case AvoidancePhase::returning: return "returning";
  }
  return "?";
}

struct AvoidanceState {
  Eigen::Vector4i deviation = Eigen::Vector4i::Zero();  // Delta t, integer steps
  int ext_pin = 1;
  std::optional<ActuatorPair> last_pair;
  AvoidancePhase phase = AvoidancePhase::idle;
  int quiet_ticks = 0;
};

enum class AvoidanceBranch { none, avoid, ret };

struct AvoidanceStep {
  JointVector command;        // q_ind_d
  JointVector ik_reference;   // q_ind_a = IK(X_a)
  int ext_pin = 1;
  OmegaVector omega_reference;  // from X_a
  OmegaVector omega_measured;   // from X_c
  AvoidanceBranch branch = AvoidanceBranch::none;
  std::optional<ActuatorPair> pair;
  std::optional<Eigen::Vector2i> applied;  // column added to the pair rows
  std::vector<double> scores;
  bool entered = false;          // idle -> active this tick
  bool exited = false;           // active -> idle this tick
  bool return_complete = false;  // a return step brought Delta t to zero
};

/// Scores each candidate column of `mods` applied to the rows `pair` of
/// `base`: the resulting configuration's Omega for that pair, or 0 when the
/// candidate leaves the joint box, fails forward kinematics from `measured`,
/// or exceeds the spherical-joint limits.
inline std::vector<double> feasibility(const Pose& measured, const JointVector& base,
                                       const ModificationMatrix& mods, const ActuatorPair& pair,
                                       const AvoidanceParams& params, const RobotGeometry& g) {
  std::vector<double> scores(static_cast<std::size_t>(mods.cols()), 0.0);
  const double ref_det = reference_det(g);
  for (Eigen::Index k = 0; k < mods.cols(); ++k) {
    JointVector candidate = base;
    candidate[pair.first] += params.step_length() * mods(0, k);
    candidate[pair.second] += params.step_length() * mods(1, k);
    if (!within_joint_limits(candidate, g)) continue;
    const auto fk = solve_forward_kinematics(candidate, g, measured);
    if (!fk) continue;
    try {
      if (!(socket_angles(fk->pose, g).array() < g.socket_limit.array()).all()) continue;
      scores[static_cast<std::size_t>(k)] = omega_indices(output_twists(fk->pose, g), ref_det).at(pair);
    } catch (const KinematicsError&) {
      scores[static_cast<std::size_t>(k)] = 0.0;
    }
  }
  return scores;
}

namespace detail {

// Lowest index wins ties; nullopt when every score is zero.
inline std::optional<std::size_t> best_candidate(const std::vector<double>& scores) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] > 0.0 && (!best || scores[k] > scores[*best])) best = k;
  }
  return best;
}

inline int pair_load(const Eigen::Vector4i& dev, const ActuatorPair& p) {
  return std::abs(dev[static_cast<Eigen::Index>(p.first)]) + std::abs(dev[static_cast<Eigen::Index>(p.second)]);
}

}  // namespace detail

/// One tick of the real-time Type II singularity avoidance. `reference` is
/// the admittance-layer pose X_a, `measured` the sensed pose X_c.
inline AvoidanceStep avoidance_step(const Pose& reference, const Pose& measured, AvoidanceState& state,
                                    const AvoidanceParams& params, const RobotGeometry& g) {
  AvoidanceStep out;
  out.ik_reference = actuator_lengths(reference, g);
  const double step = params.step_length();
  const JointVector base(out.ik_reference.q + step * state.deviation.cast<double>());

  const double ref_det = reference_det(g);
  out.omega_reference = omega_indices(output_twists(reference, g), ref_det);
  out.omega_measured = omega_indices(output_twists(measured, g), ref_det);

  auto apply = [&](const ActuatorPair& p, const Eigen::Vector2i& col) {
    state.deviation[static_cast<Eigen::Index>(p.first)] += col[0];
    state.deviation[static_cast<Eigen::Index>(p.second)] += col[1];
    out.applied = col;
  };

  if (out.omega_measured.min < params.omega_limit) {
    out.branch = AvoidanceBranch::avoid;
    const ActuatorPair p = out.omega_measured.pair;
    out.pair = p;
    const ModificationMatrix mods = pair_modifications();
    out.scores = feasibility(measured, base, mods, p, params, g);
    if (const auto k = detail::best_candidate(out.scores)) apply(p, mods.col(static_cast<Eigen::Index>(*k)));
  } else if (out.omega_reference.min > params.omega_limit && !state.deviation.isZero()) {
    out.branch = AvoidanceBranch::ret;
    ActuatorPair p = kActuatorPairs[0];
    int max_load = detail::pair_load(state.deviation, p);
    for (std::size_t k = 1; k < kActuatorPairs.size(); ++k) {
      const int load = detail::pair_load(state.deviation, kActuatorPairs[k]);
      if (load > max_load) {
        max_load = load;
        p = kActuatorPairs[k];
      }
    }
    out.pair = p;
    const ModificationMatrix all = pair_modifications();
    ModificationMatrix reducing(2, 0);
    const Eigen::Vector2i current(state.deviation[static_cast<Eigen::Index>(p.first)],
                                  state.deviation[static_cast<Eigen::Index>(p.second)]);
    for (Eigen::Index k = 0; k < all.cols(); ++k) {
      if ((current + all.col(k)).cwiseAbs().sum() < max_load) {
        reducing.conservativeResize(2, reducing.cols() + 1);
        reducing.col(reducing.cols() - 1) = all.col(k);
      }
    }
    out.scores = feasibility(measured, base, reducing, p, params, g);
    if (const auto k = detail::best_candidate(out.scores)) {
      apply(p, reducing.col(static_cast<Eigen::Index>(*k)));
      out.return_complete = state.deviation.isZero();
    }
  }

  out.command = JointVector(out.ik_reference.q + step * state.deviation.cast<double>());
  out.ext_pin = out.omega_reference.min > params.omega_limit ? 1 : 0;

  const AvoidancePhase previous = state.phase;
  if (out.branch == AvoidanceBranch::avoid || out.ext_pin == 0) {
    state.phase = AvoidancePhase::avoiding;
    state.quiet_ticks = 0;
  } else if (!state.deviation.isZero()) {
    state.phase = AvoidancePhase::returning;
    state.quiet_ticks = 0;
  } else if (state.phase != AvoidancePhase::idle && ++state.quiet_ticks >= params.release_ticks()) {
    state.phase = AvoidancePhase::idle;
    state.quiet_ticks = 0;
  }
  out.entered = previous == AvoidancePhase::idle && state.phase != AvoidancePhase::idle;
  out.exited = previous != AvoidancePhase::idle && state.phase == AvoidancePhase::idle;
  state.ext_pin = out.ext_pin;
  if (out.pair) state.last_pair = out.pair;
  return out;
}

}  // namespace prsafe
