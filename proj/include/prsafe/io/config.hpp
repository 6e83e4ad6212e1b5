#pragma once

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "prsafe/loop.hpp"

namespace prsafe::io {

using nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;

namespace detail {

// Walks a JSON object while remembering the pointer path for diagnostics.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError((path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw ConfigError(path_ + "/" + k + ": unknown field");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string child_path(const char* key) const { return path_ + "/" + key; }
  Reader object(const char* key) const { return Reader(j_.at(key), child_path(key)); }
  const json& raw(const char* key) const { return j_.at(key); }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child_path(key) + ": expected a number");
    return v.get<double>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child_path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child_path(key) + ": expected a string");
    return v.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const char* key, const Eigen::Matrix<double, N, 1>& fallback) const {
    if (!has(key)) return fallback;
    return to_vec<N>(j_.at(key), child_path(key));
  }

  // Scalar applies to every component.
  Vec4 vec4_or_scalar(const char* key, const Vec4& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (v.is_number()) return Vec4::Constant(v.get<double>());
    return to_vec<4>(v, child_path(key));
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> to_vec(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      throw ConfigError(path + ": expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) {
        throw ConfigError(path + "/" + std::to_string(i) + ": expected a number");
      }
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

inline Pose to_pose(const json& v, const std::string& path) { return Pose::from_vector(Reader::to_vec<4>(v, path)); }

inline ForceVector to_force(const json& v, const std::string& path) {
  if (v.is_object()) {
    Reader r(v, path);
    r.allow({"fx", "fz", "my", "mz"});
    return {r.number("fx", 0), r.number("fz", 0), r.number("my", 0), r.number("mz", 0)};
  }
  return ForceVector::from_vector(Reader::to_vec<4>(v, path));
}

inline void read_geometry(const Reader& r, RobotGeometry& g) {
  r.allow({"generator", "fixed_anchors", "mobile_anchors", "joint_min", "joint_max", "socket_limit_deg",
           "home_pose"});
  if (r.has("generator")) {
    const Reader gen = r.object("generator");
    gen.allow({"r1", "r2", "r3", "beta_fd", "beta_fi", "ds", "rm1", "rm2", "rm3", "beta_md", "beta_mi"});
    GeneratorParams p;
    p.r1 = gen.number("r1", p.r1);
    p.r2 = gen.number("r2", p.r2);
    p.r3 = gen.number("r3", p.r3);
    p.beta_fd = gen.number("beta_fd", p.beta_fd);
    p.beta_fi = gen.number("beta_fi", p.beta_fi);
    p.ds = gen.number("ds", p.ds);
    p.rm1 = gen.number("rm1", p.rm1);
    p.rm2 = gen.number("rm2", p.rm2);
    p.rm3 = gen.number("rm3", p.rm3);
    p.beta_md = gen.number("beta_md", p.beta_md);
    p.beta_mi = gen.number("beta_mi", p.beta_mi);
    const RobotGeometry generated = RobotGeometry::from_generator(p);
    g.fixed_anchors = generated.fixed_anchors;
    g.mobile_anchors = generated.mobile_anchors;
    g.generator = p;
  }
  if (r.has("fixed_anchors")) {
    const json& a = r.raw("fixed_anchors");
    if (!a.is_array() || a.size() != 4) throw ConfigError(r.child_path("fixed_anchors") + ": expected 4 points");
    for (std::size_t i = 0; i < 4; ++i) {
      g.fixed_anchors[i] = Reader::to_vec<3>(a[i], r.child_path("fixed_anchors") + "/" + std::to_string(i));
    }
    g.generator.reset();
  }
  if (r.has("mobile_anchors")) {
    const json& a = r.raw("mobile_anchors");
    if (!a.is_array() || a.size() != 3) throw ConfigError(r.child_path("mobile_anchors") + ": expected 3 points");
    for (std::size_t i = 0; i < 3; ++i) {
      g.mobile_anchors[i] = Reader::to_vec<3>(a[i], r.child_path("mobile_anchors") + "/" + std::to_string(i));
    }
    g.generator.reset();
  }
  g.joint_min = r.vec<4>("joint_min", g.joint_min);
  g.joint_max = r.vec<4>("joint_max", g.joint_max);
  g.socket_limit = r.vec<3>("socket_limit_deg", g.socket_limit);
  if (r.has("home_pose")) g.home = to_pose(r.raw("home_pose"), r.child_path("home_pose"));
}

inline RampShape to_ramp(const std::string& s, const std::string& path) {
  if (s == "linear") return RampShape::linear;
  if (s == "step") return RampShape::step;
  throw ConfigError(path + ": ramp must be \"linear\" or \"step\"");
}

inline void read_force_source(const Reader& r, ScenarioConfig& c) {
  r.allow({"type", "segments"});
  const std::string type = r.string("type", "script");
  if (type == "interactive") {
    c.interactive = true;
    return;
  }
  if (type != "script") throw ConfigError(r.child_path("type") + ": must be \"script\" or \"interactive\"");
  c.interactive = false;
  std::vector<ForceSegment> segs;
  if (r.has("segments")) {
    const json& a = r.raw("segments");
    const std::string base = r.child_path("segments");
    if (!a.is_array()) throw ConfigError(base + ": expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = base + "/" + std::to_string(i);
      const Reader s(a[i], p);
      s.allow({"start", "duration", "target", "ramp"});
      if (!s.has("start") || !s.has("target")) throw ConfigError(p + ": start and target are required");
      ForceSegment seg;
      seg.start = s.number("start", 0.0);
      seg.duration = s.number("duration", 0.0);
      seg.target = to_force(s.raw("target"), s.child_path("target"));
      seg.ramp = to_ramp(s.string("ramp", "linear"), s.child_path("ramp"));
      segs.push_back(seg);
    }
  }
  c.force_script = ForceScript(std::move(segs));
}

inline void read_reference(const Reader& r, ScenarioConfig& c) {
  r.allow({"pose", "waypoints"});
  if (r.has("pose") && r.has("waypoints")) r.fail("give either pose or waypoints, not both");
  if (r.has("pose")) c.reference = ReferenceTrajectory::constant(to_pose(r.raw("pose"), r.child_path("pose")));
  if (r.has("waypoints")) {
    const json& a = r.raw("waypoints");
    const std::string base = r.child_path("waypoints");
    if (!a.is_array() || a.empty()) throw ConfigError(base + ": expected a non-empty array");
    ReferenceTrajectory t;
    t.waypoints.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = base + "/" + std::to_string(i);
      const Reader w(a[i], p);
      w.allow({"t", "pose"});
      if (!w.has("pose")) throw ConfigError(p + ": pose is required");
      t.waypoints.push_back({w.number("t", 0.0), to_pose(w.raw("pose"), w.child_path("pose"))});
    }
    c.reference = t;
  }
}

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Applies a scenario document on top of the shipped defaults.
inline ScenarioConfig scenario_from_json(const json& doc) {
  ScenarioConfig c;
  const detail::Reader r(doc, "");
  r.allow({"schema_version", "mode", "duration", "control_period", "seed", "geometry", "admittance", "avoidance",
           "servo", "plant", "pose_sensor", "force_sensor", "reference", "force_reference", "force_source",
           "metrics", "telemetry"});
  if (r.has("schema_version")) {
    const json& v = r.raw("schema_version");
    if (!v.is_number_integer() || v.get<int>() != kScenarioSchemaVersion) {
      throw ConfigError("/schema_version: unsupported version (expected " + std::to_string(kScenarioSchemaVersion) + ")");
    }
  }
  const std::string mode = r.string("mode", to_string(c.mode));
  if (mode == "conventional") {
    c.mode = ControllerMode::conventional;
  } else if (mode == "complemented") {
    c.mode = ControllerMode::complemented;
  } else {
    throw ConfigError("/mode: must be \"conventional\" or \"complemented\"");
  }
  c.duration = r.number("duration", c.duration);
  c.control_period = r.number("control_period", c.control_period);
  if (r.has("seed")) {
    const json& s = r.raw("seed");
    if (!s.is_number_unsigned()) throw ConfigError("/seed: expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (r.has("geometry")) detail::read_geometry(r.object("geometry"), c.geometry);
  if (r.has("admittance")) {
    const auto a = r.object("admittance");
    a.allow({"k", "c", "m"});
    c.admittance.k = a.vec<4>("k", c.admittance.k);
    c.admittance.c = a.vec<4>("c", c.admittance.c);
    c.admittance.m = a.vec<4>("m", c.admittance.m);
  }
  if (r.has("avoidance")) {
    const auto a = r.object("avoidance");
    a.allow({"v_d", "omega_limit_deg", "release_time"});
    c.avoidance.avoidance_speed = a.number("v_d", c.avoidance.avoidance_speed);
    c.avoidance.omega_limit = a.number("omega_limit_deg", c.avoidance.omega_limit);
    c.avoidance.release_time = a.number("release_time", c.avoidance.release_time);
  }
  c.avoidance.sample_time = c.control_period;
  if (r.has("servo")) {
    const auto s = r.object("servo");
    s.allow({"kp", "kd", "time_constant", "velocity_limit", "saturation"});
    c.servo.kp = s.vec4_or_scalar("kp", c.servo.kp);
    c.servo.kd = s.vec4_or_scalar("kd", c.servo.kd);
    c.servo.time_constant = s.vec4_or_scalar("time_constant", c.servo.time_constant);
    c.servo.velocity_limit = s.vec4_or_scalar("velocity_limit", c.servo.velocity_limit);
    c.servo.saturation = s.vec4_or_scalar("saturation", c.servo.saturation);
  }
  if (r.has("plant")) {
    const auto p = r.object("plant");
    p.allow({"substep", "breach_threshold_deg", "drift_speed"});
    c.plant.substep = p.number("substep", c.plant.substep);
    c.plant.breach_threshold = p.number("breach_threshold_deg", c.plant.breach_threshold);
    c.plant.drift_speed = p.number("drift_speed", c.plant.drift_speed);
  }
  if (r.has("pose_sensor")) {
    const auto p = r.object("pose_sensor");
    p.allow({"noise", "noise_sigma", "rate_hz", "latency"});
    c.pose_sensor.noise_enabled = p.boolean("noise", c.pose_sensor.noise_enabled);
    c.pose_sensor.noise_sigma = p.vec4_or_scalar("noise_sigma", c.pose_sensor.noise_sigma);
    c.pose_sensor.rate = p.number("rate_hz", c.pose_sensor.rate);
    c.pose_sensor.latency = p.number("latency", c.pose_sensor.latency);
  }
  if (r.has("force_sensor")) {
    const auto f = r.object("force_sensor");
    f.allow({"noise", "noise_sigma", "resolution", "range"});
    c.force_sensor.noise_enabled = f.boolean("noise", c.force_sensor.noise_enabled);
    c.force_sensor.noise_sigma = f.vec4_or_scalar("noise_sigma", c.force_sensor.noise_sigma);
    c.force_sensor.resolution = f.vec4_or_scalar("resolution", c.force_sensor.resolution);
    c.force_sensor.range = f.vec4_or_scalar("range", c.force_sensor.range);
  }
  if (r.has("reference")) detail::read_reference(r.object("reference"), c);
  if (r.has("force_reference")) c.force_reference = detail::to_force(r.raw("force_reference"), "/force_reference");
  if (r.has("force_source")) detail::read_force_source(r.object("force_source"), c);
  if (r.has("metrics")) {
    const auto m = r.object("metrics");
    m.allow({"deviation"});
    const std::string v = m.string("deviation", "commanded");
    if (v == "commanded") {
      c.deviation = DeviationVariant::commanded;
    } else if (v == "tracking") {
      c.deviation = DeviationVariant::tracking;
    } else {
      throw ConfigError("/metrics/deviation: must be \"commanded\" or \"tracking\"");
    }
  }
  if (r.has("telemetry")) {
    const auto t = r.object("telemetry");
    t.allow({"decimation"});
    const double d = t.number("decimation", c.telemetry_decimation);
    if (d != std::floor(d)) throw ConfigError("/telemetry/decimation: expected an integer");
    c.telemetry_decimation = static_cast<int>(d);
  }
  c.validate();
  return c;
}

inline ScenarioConfig parse_scenario_text(const std::string& text, const std::string& source = "<scenario>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": syntax error at " + detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  try {
    return scenario_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline ScenarioConfig parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

namespace detail {
template <typename V>
json to_array(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
}  // namespace detail

/// Full, resolved scenario document (every default spelled out).
inline json scenario_to_json(const ScenarioConfig& c) {
  json g;
  if (c.geometry.generator) {
    const auto& p = *c.geometry.generator;
    g["generator"] = {{"r1", p.r1},     {"r2", p.r2},      {"r3", p.r3},   {"beta_fd", p.beta_fd},
                      {"beta_fi", p.beta_fi}, {"ds", p.ds}, {"rm1", p.rm1}, {"rm2", p.rm2},
                      {"rm3", p.rm3},   {"beta_md", p.beta_md}, {"beta_mi", p.beta_mi}};
  } else {
    json fa = json::array(), ma = json::array();
    for (const auto& v : c.geometry.fixed_anchors) fa.push_back(detail::to_array(v));
    for (const auto& v : c.geometry.mobile_anchors) ma.push_back(detail::to_array(v));
    g["fixed_anchors"] = fa;
    g["mobile_anchors"] = ma;
  }
  g["joint_min"] = detail::to_array(c.geometry.joint_min);
  g["joint_max"] = detail::to_array(c.geometry.joint_max);
  g["socket_limit_deg"] = detail::to_array(c.geometry.socket_limit);
  g["home_pose"] = detail::to_array(c.geometry.home.vector());

  json ref;
  if (c.reference.waypoints.size() == 1) {
    ref["pose"] = detail::to_array(c.reference.waypoints.front().pose.vector());
  } else {
    ref["waypoints"] = json::array();
    for (const auto& w : c.reference.waypoints) {
      ref["waypoints"].push_back({{"t", w.time}, {"pose", detail::to_array(w.pose.vector())}});
    }
  }
  json src;
  if (c.interactive) {
    src["type"] = "interactive";
  } else {
    src["type"] = "script";
    src["segments"] = json::array();
    for (const auto& s : c.force_script.segments()) {
      src["segments"].push_back({{"start", s.start},
                                 {"duration", s.duration},
                                 {"target", detail::to_array(s.target.vector())},
                                 {"ramp", s.ramp == RampShape::linear ? "linear" : "step"}});
    }
  }
  return json{
      {"schema_version", kScenarioSchemaVersion},
      {"mode", to_string(c.mode)},
      {"duration", c.duration},
      {"control_period", c.control_period},
      {"seed", c.seed},
      {"geometry", g},
      {"admittance", {{"k", detail::to_array(c.admittance.k)}, {"c", detail::to_array(c.admittance.c)},
                      {"m", detail::to_array(c.admittance.m)}}},
      {"avoidance", {{"v_d", c.avoidance.avoidance_speed}, {"omega_limit_deg", c.avoidance.omega_limit},
                     {"release_time", c.avoidance.release_time}}},
      {"servo", {{"kp", detail::to_array(c.servo.kp)}, {"kd", detail::to_array(c.servo.kd)},
                 {"time_constant", detail::to_array(c.servo.time_constant)},
                 {"velocity_limit", detail::to_array(c.servo.velocity_limit)},
                 {"saturation", detail::to_array(c.servo.saturation)}}},
      {"plant", {{"substep", c.plant.substep}, {"breach_threshold_deg", c.plant.breach_threshold},
                 {"drift_speed", c.plant.drift_speed}}},
      {"pose_sensor", {{"noise", c.pose_sensor.noise_enabled}, {"noise_sigma", detail::to_array(c.pose_sensor.noise_sigma)},
                       {"rate_hz", c.pose_sensor.rate}, {"latency", c.pose_sensor.latency}}},
      {"force_sensor", {{"noise", c.force_sensor.noise_enabled}, {"noise_sigma", detail::to_array(c.force_sensor.noise_sigma)},
                        {"resolution", detail::to_array(c.force_sensor.resolution)},
                        {"range", detail::to_array(c.force_sensor.range)}}},
      {"reference", ref},
      {"force_reference", detail::to_array(c.force_reference.vector())},
      {"force_source", src},
      {"metrics", {{"deviation", c.deviation == DeviationVariant::commanded ? "commanded" : "tracking"}}},
      {"telemetry", {{"decimation", c.telemetry_decimation}}},
  };
}

}  // namespace prsafe::io
