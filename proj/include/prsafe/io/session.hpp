#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "prsafe/io/config.hpp"
#include "prsafe/io/log_io.hpp"
#include "prsafe/loop.hpp"

namespace prsafe::io {

inline constexpr int kTelemetrySchemaVersion = 1;

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Telemetry view of one log record. Every field is copied from the record.
inline json telemetry_frame(const LogRecord& r) {
  json events = json::array();
  for (const auto& n : event::names(r.events)) events.push_back(n);
  return json{
      {"type", "frame"},
      {"schema", kTelemetrySchemaVersion},
      {"tick", r.tick},
      {"t", r.time},
      {"X_r", detail::array_of(r.reference.vector())},
      {"X_a", detail::array_of(r.adapted.vector())},
      {"X_c", detail::array_of(r.measured.vector())},
      {"X_true", detail::array_of(r.truth.vector())},
      {"q_a", detail::array_of(r.ik_reference.q)},
      {"q_d", detail::array_of(r.command.q)},
      {"q_c", detail::array_of(r.measured_joints.q)},
      {"min_omega_a", r.omega_reference_min},
      {"min_omega_c", r.omega_measured_min},
      {"pair_a", r.omega_reference_pair.label()},
      {"pair_c", r.omega_measured_pair.label()},
      {"dt", detail::array_of(r.deviation)},
      {"ext_pin", r.ext_pin},
      {"F_c", detail::array_of(r.measured_force.vector())},
      {"phase", to_string(r.phase)},
      {"events", events},
  };
}

inline json error_frame(const std::string& message) {
  return json{{"type", "error"}, {"schema", kTelemetrySchemaVersion}, {"message", message}};
}

enum class CommandType { force, reset, load_scenario, pause, resume };

inline const char* to_string(CommandType t) {
  switch (t) {
    case CommandType::force: return "force";
    case CommandType::reset: return "reset";
    case CommandType::load_scenario: return "load_scenario";
    case CommandType::pause: return "pause";
    case CommandType::resume: return "resume";
  }
  return "?";
}

struct CommandMessage {
  CommandType type = CommandType::force;
  ForceVector force;           // type == force, already clamped
  json scenario;               // type == load_scenario
  std::optional<double> client_time;
};

/// Parses one wire message. Force payloads are clamped to +-range.
inline CommandMessage parse_command(const std::string& text, const Vec4& range) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw ProtocolError("malformed JSON command");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ProtocolError("command must be an object with a string 'type'");
  }
  CommandMessage c;
  const std::string type = j["type"].get<std::string>();
  if (type == "force") {
    c.type = CommandType::force;
    if (!j.contains("payload")) throw ProtocolError("force command needs a payload");
    try {
      const Vec4 f = detail::to_force(j["payload"], "/payload").vector();
      c.force = ForceVector::from_vector(f.cwiseMax(-range).cwiseMin(range));
    } catch (const ConfigError& e) {
      throw ProtocolError(std::string("force payload: ") + e.what());
    }
  } else if (type == "reset") {
    c.type = CommandType::reset;
  } else if (type == "load_scenario") {
    c.type = CommandType::load_scenario;
    if (!j.contains("payload") || !j["payload"].is_object()) {
      throw ProtocolError("load_scenario needs a scenario object as payload");
    }
    c.scenario = j["payload"];
  } else if (type == "pause") {
    c.type = CommandType::pause;
  } else if (type == "resume") {
    c.type = CommandType::resume;
  } else {
    throw ProtocolError("unknown command type '" + type + "'");
  }
  if (j.contains("client_time")) {
    if (!j["client_time"].is_number()) throw ProtocolError("client_time must be a number");
    c.client_time = j["client_time"].get<double>();
  }
  return c;
}

/// Bounded outgoing queue. A full queue discards its oldest entry so a
/// slow reader never stalls the producer.
class FrameQueue {
 public:
  explicit FrameQueue(std::size_t capacity = 256) : capacity_(capacity) {}

  void push(std::string frame) {
    std::lock_guard lock(mu_);
    if (q_.size() >= capacity_) {
      q_.pop_front();
      ++dropped_;
    }
    q_.push_back(std::move(frame));
  }

  std::vector<std::string> drain() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out(std::make_move_iterator(q_.begin()), std::make_move_iterator(q_.end()));
    q_.clear();
    return out;
  }

  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<std::string> q_;
  std::size_t dropped_ = 0;
};

/// A command as it was applied: the tick boundary it took effect at.
struct JournalEntry {
  std::uint64_t tick = 0;
  CommandMessage command;
};

struct SessionOptions {
  std::size_t queue_capacity = 256;
  bool keep_log = true;
};

/// Interactive session: one control thread calls advance()/run(); any
/// number of network threads call connect/submit/drain. They share only
/// the command queue and the per-client frame queues.
class Session {
 public:
  using ClientId = std::uint64_t;

  explicit Session(ScenarioConfig cfg, SessionOptions opts = {}) : opts_(opts), sim_(std::move(cfg)) {}

  ClientId connect() {
    std::lock_guard lock(clients_mu_);
    const ClientId id = next_id_++;
    clients_.emplace(id, std::make_shared<FrameQueue>(opts_.queue_capacity));
    if (!authority_) authority_ = id;
    clients_.at(id)->push(status_frame(id).dump());
    return id;
  }

  void disconnect(ClientId id) {
    std::lock_guard lock(clients_mu_);
    clients_.erase(id);
    if (authority_ == id) authority_.reset();
  }

  std::optional<ClientId> authority() const {
    std::lock_guard lock(clients_mu_);
    return authority_;
  }

  /// Queues a command for the next tick boundary, or answers the sender
  /// with an error frame.
  void submit(ClientId id, const std::string& text) {
    std::shared_ptr<FrameQueue> q;
    {
      std::lock_guard lock(clients_mu_);
      const auto it = clients_.find(id);
      if (it == clients_.end()) return;
      q = it->second;
      if (!authority_) authority_ = id;
      if (authority_ != id) {
        q->push(error_frame("client has no command authority").dump());
        notify();
        return;
      }
    }
    try {
      CommandMessage c = parse_command(text, range_.load());
      std::lock_guard lock(commands_mu_);
      commands_.push_back({id, std::move(c)});
    } catch (const ProtocolError& e) {
      q->push(error_frame(e.what()).dump());
      notify();
    }
  }

  std::vector<std::string> drain(ClientId id) {
    std::shared_ptr<FrameQueue> q;
    {
      std::lock_guard lock(clients_mu_);
      const auto it = clients_.find(id);
      if (it == clients_.end()) return {};
      q = it->second;
    }
    return q->drain();
  }

  /// Called (from the control thread) whenever frames were queued.
  void set_notifier(std::function<void()> fn) { notifier_ = std::move(fn); }

  /// One tick boundary: apply queued commands, then step unless paused or
  /// finished. Returns true when a tick ran. Control thread only.
  bool advance() {
    apply_commands();
    if (paused_ || sim_.finished()) {
      if (sim_.finished() && !finish_announced_) {
        finish_announced_ = true;
        broadcast(status_json());
      }
      return false;
    }
    const LogRecord r = sim_.step();
    if (opts_.keep_log) log_.push_back(r);
    if (r.tick % static_cast<std::uint64_t>(sim_.config().telemetry_decimation) == 0 || r.events != 0) {
      broadcast(telemetry_frame(r));
    }
    return true;
  }

  /// Drives advance() until `stop` is set. With `realtime` each tick is
  /// paced to the control period on the wall clock.
  void run(const std::atomic<bool>& stop, bool realtime) {
    using clock = std::chrono::steady_clock;
    auto next = clock::now();
    while (!stop.load()) {
      const bool ticked = advance();
      const auto period = std::chrono::duration_cast<clock::duration>(
          std::chrono::duration<double>(sim_.config().control_period));
      if (realtime || !ticked) {
        next += period;
        const auto now = clock::now();
        if (next < now - 10 * period) next = now;
        std::this_thread::sleep_until(next);
      }
    }
  }

  // Control-thread views.
  const Simulation& simulation() const { return sim_; }
  const std::vector<LogRecord>& log() const { return log_; }
  const std::vector<JournalEntry>& journal() const { return journal_; }
  bool paused() const { return paused_; }

 private:
  struct Pending {
    ClientId client;
    CommandMessage command;
  };

  json status_json() const {
    return json{{"type", "status"},
                {"schema", kTelemetrySchemaVersion},
                {"tick", sim_.tick()},
                {"t", sim_.time()},
                {"paused", paused_},
                {"finished", sim_.finished()},
                {"mode", to_string(sim_.config().mode)},
                {"interactive", sim_.config().interactive}};
  }

  // Snapshot for a newly connected client; reads only atomics.
  json status_frame(ClientId id) const {
    return json{{"type", "hello"}, {"schema", kTelemetrySchemaVersion}, {"client", id},
                {"authority", authority_ == id}};
  }

  void notify() {
    if (notifier_) notifier_();
  }

  void broadcast(const json& frame) {
    const std::string text = frame.dump();
    {
      std::lock_guard lock(clients_mu_);
      for (auto& [id, q] : clients_) q->push(text);
    }
    notify();
  }

  void send_to(ClientId id, const json& frame) {
    {
      std::lock_guard lock(clients_mu_);
      const auto it = clients_.find(id);
      if (it == clients_.end()) return;
      it->second->push(frame.dump());
    }
    notify();
  }

  void apply_commands() {
    std::vector<Pending> batch;
    {
      std::lock_guard lock(commands_mu_);
      batch.assign(std::make_move_iterator(commands_.begin()), std::make_move_iterator(commands_.end()));
      commands_.clear();
    }
    for (auto& p : batch) {
      switch (p.command.type) {
        case CommandType::pause:
          paused_ = true;
          broadcast(status_json());
          break;
        case CommandType::resume:
          paused_ = false;
          for (auto& h : held_) apply_force(h);
          held_.clear();
          broadcast(status_json());
          break;
        case CommandType::force:
          if (paused_) {
            held_.push_back(std::move(p.command));
          } else {
            apply_force(p.command);
          }
          break;
        case CommandType::reset:
          journal_.push_back({sim_.tick(), p.command});
          sim_.reset();
          log_.clear();
          finish_announced_ = false;
          broadcast(status_json());
          break;
        case CommandType::load_scenario:
          try {
            ScenarioConfig cfg = scenario_from_json(p.command.scenario);
            range_.store(cfg.force_sensor.range);
            sim_ = Simulation(std::move(cfg));
            log_.clear();
            journal_.clear();
            held_.clear();
            finish_announced_ = false;
            broadcast(status_json());
          } catch (const Error& e) {
            send_to(p.client, error_frame(std::string("load_scenario: ") + e.what()));
          }
          break;
      }
    }
  }

  void apply_force(const CommandMessage& c) {
    sim_.set_force(c.force);
    journal_.push_back({sim_.tick(), c});
  }

  // Lock-free holder for the clamp range, read by network threads.
  class RangeCell {
   public:
    explicit RangeCell(const Vec4& v) { store(v); }
    void store(const Vec4& v) {
      std::lock_guard lock(mu_);
      v_ = v;
    }
    Vec4 load() const {
      std::lock_guard lock(mu_);
      return v_;
    }

   private:
    mutable std::mutex mu_;
    Vec4 v_;
  };

  SessionOptions opts_;
  Simulation sim_;
  RangeCell range_{sim_.config().force_sensor.range};
  std::vector<LogRecord> log_;
  std::vector<JournalEntry> journal_;
  std::vector<CommandMessage> held_;
  bool paused_ = false;
  bool finish_announced_ = false;

  mutable std::mutex clients_mu_;
  std::map<ClientId, std::shared_ptr<FrameQueue>> clients_;
  std::optional<ClientId> authority_;
  ClientId next_id_ = 1;

  std::mutex commands_mu_;
  std::deque<Pending> commands_;
  std::function<void()> notifier_;
};

/// Batch re-run of an interactive session from its command journal.
inline std::vector<LogRecord> replay(const ScenarioConfig& cfg, const std::vector<JournalEntry>& journal,
                                     std::uint64_t ticks) {
  Simulation sim(cfg);
  std::vector<LogRecord> log;
  std::size_t next = 0;
  // `ticks` counts from the last reset, so run until the journal is spent.
  while ((next < journal.size() || sim.tick() < ticks) && !sim.finished()) {
    while (next < journal.size() && journal[next].tick == sim.tick()) {
      const auto& c = journal[next++].command;
      if (c.type == CommandType::force) sim.set_force(c.force);
      if (c.type == CommandType::reset) {
        sim.reset();
        log.clear();
      }
    }
    log.push_back(sim.step());
  }
  return log;
}

}  // namespace prsafe::io
