#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prsafe/loop.hpp"
#include "prsafe/metrics.hpp"

namespace prsafe::io {

using nlohmann::json;

inline constexpr int kLogSchemaVersion = 1;

namespace detail {

template <typename V>
json array_of(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <typename Scalar, int N>
Eigen::Matrix<Scalar, N, 1> read_array(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != static_cast<std::size_t>(N)) {
    throw Error(std::string("log: field '") + key + "' has the wrong shape");
  }
  Eigen::Matrix<Scalar, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = a[static_cast<std::size_t>(i)].get<Scalar>();
  return out;
}

inline ActuatorPair parse_pair(const std::string& s) {
  if (s.size() != 3 || s[1] != ',') throw Error("log: bad actuator pair '" + s + "'");
  return {static_cast<std::size_t>(s[0] - '1'), static_cast<std::size_t>(s[2] - '1')};
}

inline AvoidancePhase parse_phase(const std::string& s) {
  if (s == "idle") return AvoidancePhase::idle;
  if (s == "avoiding") return AvoidancePhase::avoiding;
  if (s == "returning") return AvoidancePhase::returning;
  throw Error("log: unknown phase '" + s + "'");
}

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// One log record as a JSON object. Keys mirror the CSV columns.
inline json record_to_json(const LogRecord& r) {
  json events = json::array();
  for (const auto& n : event::names(r.events)) events.push_back(n);
  return json{
      {"tick", r.tick},
      {"t", r.time},
      {"F_c", detail::array_of(r.measured_force.vector())},
      {"e_F", detail::array_of(r.force_error.vector())},
      {"dX", detail::array_of(r.offset)},
      {"X_r", detail::array_of(r.reference.vector())},
      {"X_a", detail::array_of(r.adapted.vector())},
      {"q_a", detail::array_of(r.ik_reference.q)},
      {"q_d", detail::array_of(r.command.q)},
      {"q_c", detail::array_of(r.measured_joints.q)},
      {"X_c", detail::array_of(r.measured.vector())},
      {"X_true", detail::array_of(r.truth.vector())},
      {"min_omega_a", r.omega_reference_min},
      {"pair_a", r.omega_reference_pair.label()},
      {"min_omega_c", r.omega_measured_min},
      {"pair_c", r.omega_measured_pair.label()},
      {"dt", detail::array_of(r.deviation)},
      {"ext_pin", r.ext_pin},
      {"u", detail::array_of(r.control)},
      {"phase", to_string(r.phase)},
      {"events", events},
  };
}

inline LogRecord record_from_json(const json& j) {
  LogRecord r;
  r.tick = j.at("tick").get<std::uint64_t>();
  r.time = j.at("t").get<double>();
  r.measured_force = ForceVector::from_vector(detail::read_array<double, 4>(j, "F_c"));
  r.force_error = ForceVector::from_vector(detail::read_array<double, 4>(j, "e_F"));
  r.offset = detail::read_array<double, 4>(j, "dX");
  r.reference = Pose::from_vector(detail::read_array<double, 4>(j, "X_r"));
  r.adapted = Pose::from_vector(detail::read_array<double, 4>(j, "X_a"));
  r.ik_reference = JointVector(detail::read_array<double, 4>(j, "q_a"));
  r.command = JointVector(detail::read_array<double, 4>(j, "q_d"));
  r.measured_joints = JointVector(detail::read_array<double, 4>(j, "q_c"));
  r.measured = Pose::from_vector(detail::read_array<double, 4>(j, "X_c"));
  r.truth = Pose::from_vector(detail::read_array<double, 4>(j, "X_true"));
  r.omega_reference_min = j.at("min_omega_a").get<double>();
  r.omega_reference_pair = detail::parse_pair(j.at("pair_a").get<std::string>());
  r.omega_measured_min = j.at("min_omega_c").get<double>();
  r.omega_measured_pair = detail::parse_pair(j.at("pair_c").get<std::string>());
  r.deviation = detail::read_array<int, 4>(j, "dt");
  r.ext_pin = j.at("ext_pin").get<int>();
  r.control = detail::read_array<double, 4>(j, "u");
  r.phase = detail::parse_phase(j.at("phase").get<std::string>());
  for (const auto& e : j.at("events")) r.events |= event::from_name(e.get<std::string>());
  return r;
}

inline void write_jsonl(std::ostream& out, const std::vector<LogRecord>& log) {
  for (const auto& r : log) out << record_to_json(r).dump() << '\n';
}

inline std::vector<LogRecord> read_jsonl(std::istream& in) {
  std::vector<LogRecord> log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

inline std::vector<LogRecord> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  return read_jsonl(in);
}

/// CSV column order. Vector fields expand to name_0..name_3.
inline std::vector<std::string> csv_columns() {
  std::vector<std::string> cols{"tick", "t"};
  for (const char* v : {"F_c", "e_F", "dX", "X_r", "X_a", "q_a", "q_d", "q_c", "X_c", "X_true"}) {
    for (int i = 0; i < 4; ++i) cols.push_back(std::string(v) + "_" + std::to_string(i));
  }
  for (const char* s : {"min_omega_a", "pair_a", "min_omega_c", "pair_c"}) cols.emplace_back(s);
  for (int i = 0; i < 4; ++i) cols.push_back("dt_" + std::to_string(i));
  cols.emplace_back("ext_pin");
  for (int i = 0; i < 4; ++i) cols.push_back("u_" + std::to_string(i));
  cols.emplace_back("phase");
  cols.emplace_back("events");
  return cols;
}

inline void write_csv(std::ostream& out, const std::vector<LogRecord>& log) {
  const auto cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const auto vec = [&out](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << detail::format_double(static_cast<double>(v[i]));
  };
  for (const auto& r : log) {
    out << r.tick << ',' << detail::format_double(r.time);
    vec(r.measured_force.vector());
    vec(r.force_error.vector());
    vec(r.offset);
    vec(r.reference.vector());
    vec(r.adapted.vector());
    vec(r.ik_reference.q);
    vec(r.command.q);
    vec(r.measured_joints.q);
    vec(r.measured.vector());
    vec(r.truth.vector());
    out << ',' << detail::format_double(r.omega_reference_min) << ",\"" << r.omega_reference_pair.label() << "\","
        << detail::format_double(r.omega_measured_min) << ",\"" << r.omega_measured_pair.label() << '"';
    for (int i = 0; i < 4; ++i) out << ',' << r.deviation[i];
    out << ',' << r.ext_pin;
    vec(r.control);
    out << ',' << to_string(r.phase) << ',';
    const auto names = event::names(r.events);
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ";" : "") << names[i];
    out << '\n';
  }
}

inline json metrics_to_json(const MetricsReport& m) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"schema_version", kLogSchemaVersion},
      {"deviation", m.variant == DeviationVariant::commanded ? "commanded" : "tracking"},
      {"episodes", m.episodes},
      {"episode_samples", m.episode_samples},
      {"mae_mm", opt(m.mae_mm)},
      {"mape_percent", opt(m.mape_percent)},
      {"avr", opt(m.avr)},
      {"mape_skipped", m.mape_skipped},
      {"breaches", m.breaches},
      {"faulted", m.faulted},
  };
}

}  // namespace prsafe::io
