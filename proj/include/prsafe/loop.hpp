#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prsafe/admittance.hpp"
#include "prsafe/avoidance.hpp"
#include "prsafe/plant.hpp"

namespace prsafe {

enum class ControllerMode { conventional, complemented };

inline const char* to_string(ControllerMode m) {
  return m == ControllerMode::conventional ? "conventional" : "complemented";
}

/// Which deviation the episode metrics measure.
enum class DeviationVariant {
  commanded,  // |q_ind_a - q_ind_d|: offset introduced by avoidance
  tracking,   // |q_ind_a - q_ind_c|: offset of the measured actuators
};

struct Waypoint {
  double time = 0.0;
  Pose pose;
};

/// Position reference X_r: constant, or piecewise linear through waypoints.
struct ReferenceTrajectory {
  std::vector<Waypoint> waypoints{{0.0, Pose{0.0, 0.75, 0.0, 0.0}}};

  static ReferenceTrajectory constant(const Pose& p) { return {{{0.0, p}}}; }

  Pose at(double t) const {
    if (waypoints.size() == 1 || t <= waypoints.front().time) return waypoints.front().pose;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      if (t <= waypoints[i].time) {
        const auto& a = waypoints[i - 1];
        const auto& b = waypoints[i];
        const double w = (t - a.time) / (b.time - a.time);
        return Pose::from_vector((1.0 - w) * a.pose.vector() + w * b.pose.vector());
      }
    }
    return waypoints.back().pose;
  }

  void validate() const {
    if (waypoints.empty()) throw ConfigError("reference: at least one waypoint is required");
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      if (!(waypoints[i].time > waypoints[i - 1].time)) {
        throw ConfigError("reference: waypoint times must increase strictly");
      }
    }
  }
};

struct ScenarioConfig {
  RobotGeometry geometry = RobotGeometry::defaults();
  AdmittanceParams admittance;
  AvoidanceParams avoidance;
  ServoParams servo;
  PlantParams plant;
  PoseSensorParams pose_sensor;
  ForceSensorParams force_sensor;
  ControllerMode mode = ControllerMode::complemented;
  ReferenceTrajectory reference;
  ForceVector force_reference;  // F_r
  bool interactive = false;     // force from live commands instead of the script
  ForceScript force_script;
  double duration = 10.0;
  double control_period = 0.01;  // t_s
  std::uint64_t seed = 1;
  DeviationVariant deviation = DeviationVariant::commanded;
  int telemetry_decimation = 2;

  void validate() const {
    if (!(control_period > 0.0)) throw ConfigError("control_period (t_s) must be positive");
    geometry.validate();
    admittance.validate();
    avoidance.validate();
    servo.validate();
    plant.validate();
    pose_sensor.validate();
    force_sensor.validate();
    reference.validate();
    force_script.validate();
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (std::abs(avoidance.sample_time - control_period) > 1e-12) {
      throw ConfigError("avoidance t_s must equal the control period");
    }
    if (telemetry_decimation < 1) throw ConfigError("telemetry decimation must be at least 1");
  }
};

namespace event {
inline constexpr unsigned avoidance_enter = 1u << 0;
inline constexpr unsigned avoidance_exit = 1u << 1;
inline constexpr unsigned return_complete = 1u << 2;
inline constexpr unsigned breach = 1u << 3;
inline constexpr unsigned fault = 1u << 4;

inline std::vector<std::string> names(unsigned mask) {
  std::vector<std::string> out;
  if (mask & avoidance_enter) out.emplace_back("avoidance-enter");
  if (mask & avoidance_exit) out.emplace_back("avoidance-exit");
  if (mask & return_complete) out.emplace_back("return-complete");
  if (mask & breach) out.emplace_back("breach");
  if (mask & fault) out.emplace_back("fault");
  return out;
}

inline unsigned from_name(const std::string& s) {
  if (s == "avoidance-enter") return avoidance_enter;
  if (s == "avoidance-exit") return avoidance_exit;
  if (s == "return-complete") return return_complete;
  if (s == "breach") return breach;
  if (s == "fault") return fault;
  throw Error("unknown event '" + s + "'");
}
}  // namespace event

/// Snapshot of one control tick.
struct LogRecord {
  std::uint64_t tick = 0;
  double time = 0.0;
  ForceVector measured_force;  // F_c
  ForceVector force_error;     // e_F (before gating)
  Vec4 offset = Vec4::Zero();  // Delta X
  Pose reference;              // X_r
  Pose adapted;                // X_a
  JointVector ik_reference;    // q_ind_a
  JointVector command;         // q_ind_d
  JointVector measured_joints; // q_ind_c
  Pose measured;               // X_c
  Pose truth;
  double omega_reference_min = 0.0;
  double omega_measured_min = 0.0;
  ActuatorPair omega_reference_pair;
  ActuatorPair omega_measured_pair;
  Eigen::Vector4i deviation = Eigen::Vector4i::Zero();
  int ext_pin = 1;
  Vec4 control = Vec4::Zero();  // u
  AvoidancePhase phase = AvoidancePhase::idle;
  unsigned events = 0;
};

/// Fixed-step executor of the cascade: force sensing, admittance layer,
/// avoidance layer (complemented mode), inner servo and plant.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg)
      : cfg_((cfg.validate(), std::move(cfg))),
        filter_(cfg_.admittance, cfg_.control_period),
        plant_(cfg_.geometry, cfg_.servo, cfg_.plant, cfg_.reference.at(0.0)),
        pose_sensor_(cfg_.pose_sensor, cfg_.seed),
        force_sensor_(cfg_.force_sensor, cfg_.seed) {}

  const ScenarioConfig& config() const { return cfg_; }
  std::uint64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * cfg_.control_period; }
  bool halted() const { return fault_.has_value(); }
  const std::optional<std::string>& fault() const { return fault_; }
  bool finished() const { return halted() || time() >= cfg_.duration - 1e-9; }
  const AvoidanceState& avoidance_state() const { return avoidance_; }
  const PlantState& plant_state() const { return plant_.state(); }

  /// Live patient effort, used when the scenario is interactive.
  void set_force(const ForceVector& f) { live_force_ = f; }
  const ForceVector& live_force() const { return live_force_; }

  void reset() {
    tick_ = 0;
    fault_.reset();
    admittance_.reset();
    avoidance_ = AvoidanceState{};
    live_force_ = ForceVector{};
    plant_.reset(cfg_.reference.at(0.0));
  }

  /// Runs one control period and returns its record. After a fault the
  /// record carries the fault event and the simulation is halted.
  LogRecord step() {
    LogRecord r;
    r.tick = tick_;
    r.time = time();
    const double t = r.time;
    const Vec4 ts_truth = plant_.state().pose.vector();
    r.truth = Pose::from_vector(ts_truth);
    r.measured_joints = JointVector(plant_.state().joints);
    r.measured = pose_sensor_.sense([this](double tc) { return plant_.pose_at(tc); }, t);

    const ForceVector source = cfg_.interactive ? live_force_ : cfg_.force_script.value_at(t);
    r.measured_force = force_sensor_.sense(source, tick_);
    r.force_error = ForceVector::from_vector(cfg_.force_reference.vector() - r.measured_force.vector());

    const bool complemented = cfg_.mode == ControllerMode::complemented;
    const int gate = complemented ? avoidance_.ext_pin : 1;
    filter_.step(admittance_, static_cast<double>(gate) * r.force_error.vector());
    r.offset = admittance_.offset;
    r.reference = cfg_.reference.at(t);
    r.adapted = compose_reference(r.reference, admittance_.offset);

    try {
      if (complemented) {
        const AvoidanceStep s = avoidance_step(r.adapted, r.measured, avoidance_, cfg_.avoidance, cfg_.geometry);
        r.ik_reference = s.ik_reference;
        r.command = s.command;
        r.ext_pin = s.ext_pin;
        fill_omega(r, s.omega_reference, s.omega_measured);
        if (s.entered) r.events |= event::avoidance_enter;
        if (s.exited) r.events |= event::avoidance_exit;
        if (s.return_complete) r.events |= event::return_complete;
      } else {
        r.ik_reference = actuator_lengths(r.adapted, cfg_.geometry);
        r.command = r.ik_reference;
        r.ext_pin = 1;
        const double ref_det = reference_det(cfg_.geometry);
        fill_omega(r, omega_indices(output_twists(r.adapted, cfg_.geometry), ref_det),
                   omega_indices(output_twists(r.measured, cfg_.geometry), ref_det));
      }
      r.deviation = avoidance_.deviation;
      r.phase = avoidance_.phase;
      const PlantStepResult ps = plant_.step(r.command, cfg_.control_period);
      r.control = ps.control;
      if (ps.breach) r.events |= event::breach;
    } catch (const Error& e) {
      fault_ = e.what();
      r.events |= event::fault;
    }
    ++tick_;
    return r;
  }

 private:
  static void fill_omega(LogRecord& r, const OmegaVector& a, const OmegaVector& c) {
    r.omega_reference_min = a.min;
    r.omega_reference_pair = a.pair;
    r.omega_measured_min = c.min;
    r.omega_measured_pair = c.pair;
  }

  ScenarioConfig cfg_;
  AdmittanceFilter filter_;
  Plant plant_;
  PoseSensor pose_sensor_;
  ForceSensor force_sensor_;
  AdmittanceState admittance_;
  AvoidanceState avoidance_;
  ForceVector live_force_;
  std::uint64_t tick_ = 0;
  std::optional<std::string> fault_;
};

struct ScenarioRun {
  std::vector<LogRecord> log;
  std::optional<std::string> fault;
};

inline ScenarioRun run_scenario(const ScenarioConfig& cfg) {
  Simulation sim(cfg);
  ScenarioRun run;
  run.log.reserve(static_cast<std::size_t>(cfg.duration / cfg.control_period) + 1);
  while (!sim.finished()) run.log.push_back(sim.step());
  run.fault = sim.fault();
  return run;
}

}  // namespace prsafe
