// Command-line front end: batch runs, Omega sweeps, live sessions, metrics.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "prsafe/io/config.hpp"
#include "prsafe/io/log_io.hpp"
#include "prsafe/io/session.hpp"
#include "prsafe/io/ws_server.hpp"

namespace fs = std::filesystem;
using namespace prsafe;

namespace {

std::atomic<bool> g_stop{false};

struct Overrides {
  std::string mode;
  std::optional<std::uint64_t> seed;
};

ScenarioConfig load(const std::string& path, const Overrides& o) {
  ScenarioConfig c = path.empty() ? ScenarioConfig{} : io::parse_scenario(path);
  if (o.mode == "conventional") c.mode = ControllerMode::conventional;
  if (o.mode == "complemented") c.mode = ControllerMode::complemented;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(p.string() + ": cannot write");
  return out;
}

int cmd_run(const std::string& config, const Overrides& o, const std::string& out_dir) {
  const ScenarioConfig c = load(config, o);
  const ScenarioRun run = run_scenario(c);
  const MetricsReport m = compute_metrics(run.log, c.deviation);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto jl = open_out(fs::path(out_dir) / "log.jsonl");
    io::write_jsonl(jl, run.log);
    auto csv = open_out(fs::path(out_dir) / "log.csv");
    io::write_csv(csv, run.log);
    auto mj = open_out(fs::path(out_dir) / "metrics.json");
    mj << io::metrics_to_json(m).dump(2) << '\n';
  }
  std::cout << io::metrics_to_json(m).dump(2) << '\n';
  if (run.fault) {
    std::cerr << "fault: " << *run.fault << '\n';
    return 3;
  }
  return 0;
}

struct Axis {
  int index = 3;
  double lo = 0, hi = 0;
  int n = 1;
};

int axis_index(const std::string& name) {
  if (name == "x") return 0;
  if (name == "z") return 1;
  if (name == "theta") return 2;
  if (name == "psi") return 3;
  throw ConfigError("sweep axis must be x, z, theta or psi");
}

int cmd_sweep(const std::string& config, const Overrides& o, const std::string& out_dir, const std::string& a0,
              const std::string& a1, const std::vector<double>& r0, const std::vector<double>& r1) {
  const ScenarioConfig c = load(config, o);
  const Axis ax[2] = {{axis_index(a0), r0[0], r0[1], static_cast<int>(r0[2])},
                      {axis_index(a1), r1[0], r1[1], static_cast<int>(r1[2])}};
  if (ax[0].index == ax[1].index || ax[0].n < 1 || ax[1].n < 1) throw ConfigError("sweep: bad axes or counts");
  const double ref_det = reference_det(c.geometry);
  const Vec4 base = c.reference.at(0.0).vector();

  std::ofstream file;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    file = open_out(fs::path(out_dir) / "sweep.csv");
  }
  std::ostream& out = out_dir.empty() ? std::cout : file;
  out << a0 << ',' << a1 << ",min_omega_deg,pair,det_forward,within_limits\n";
  const auto at = [](const Axis& a, int i) { return a.n == 1 ? a.lo : a.lo + (a.hi - a.lo) * i / (a.n - 1); };
  for (int i = 0; i < ax[0].n; ++i) {
    for (int j = 0; j < ax[1].n; ++j) {
      Vec4 v = base;
      v[ax[0].index] = at(ax[0], i);
      v[ax[1].index] = at(ax[1], j);
      const Pose X = Pose::from_vector(v);
      out << io::detail::format_double(v[ax[0].index]) << ',' << io::detail::format_double(v[ax[1].index]) << ',';
      try {
        const OmegaVector om = omega_indices(output_twists(X, c.geometry), ref_det);
        const bool ok = within_joint_limits(actuator_lengths(X, c.geometry), c.geometry) &&
                        (socket_angles(X, c.geometry).array() < c.geometry.socket_limit.array()).all();
        out << io::detail::format_double(om.min) << ",\"" << om.pair.label() << "\","
            << io::detail::format_double(jacobians(X, c.geometry).forward.determinant()) << ',' << (ok ? 1 : 0)
            << '\n';
      } catch (const KinematicsError&) {
        out << ",,,0\n";
      }
    }
  }
  return 0;
}

int cmd_serve(const std::string& config, const Overrides& o, int port, bool realtime) {
  ScenarioConfig c = load(config, o);
  if (!c.interactive) {
    std::cerr << "note: scenario force source is scripted; force commands will be ignored\n";
  }
  io::Session session(std::move(c));
  io::TelemetryServer server(session, static_cast<unsigned short>(port));
  server.start();
  std::cerr << "serving on ws://127.0.0.1:" << server.port() << (realtime ? " (realtime)" : "") << '\n';
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  session.run(g_stop, realtime);
  server.stop();
  return 0;
}

int cmd_metrics(const std::string& log_path, const std::string& deviation, const std::string& out_dir) {
  const auto log = io::read_jsonl_file(log_path);
  const DeviationVariant v = deviation == "tracking" ? DeviationVariant::tracking : DeviationVariant::commanded;
  const MetricsReport m = compute_metrics(log, v);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto mj = open_out(fs::path(out_dir) / "metrics.json");
    mj << io::metrics_to_json(m).dump(2) << '\n';
  }
  std::cout << io::metrics_to_json(m).dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& config, const Overrides& o) {
  const ScenarioConfig c = load(config, o);
  std::cout << io::scenario_to_json(c).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3UPS+RPU admittance simulator with singularity avoidance"};
  app.require_subcommand(1);

  std::string config, out_dir, deviation = "commanded", log_path;
  Overrides o;
  std::uint64_t seed = 0;
  int port = 8765;
  bool realtime = false;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "scenario JSON");
    sub->add_option("--mode", o.mode, "override controller mode")
        ->check(CLI::IsMember({"conventional", "complemented"}));
    sub->add_option("--seed", seed, "override RNG seed");
  };

  auto* run = app.add_subcommand("run", "run a scenario, write log.jsonl, log.csv, metrics.json");
  common(run);
  run->add_option("--out", out_dir, "output directory");

  std::string a0 = "theta", a1 = "psi";
  std::vector<double> r0{-0.5, 0.5, 41}, r1{-1.0, 1.0, 81};
  auto* sweep = app.add_subcommand("sweep", "minimum Omega over a two-axis pose grid around the reference pose");
  common(sweep);
  sweep->add_option("--out", out_dir, "output directory (sweep.csv); stdout if omitted");
  sweep->add_option("--axis0", a0, "first axis: x, z, theta, psi");
  sweep->add_option("--axis1", a1, "second axis");
  sweep->add_option("--range0", r0, "lo hi count")->expected(3);
  sweep->add_option("--range1", r1, "lo hi count")->expected(3);

  auto* serve = app.add_subcommand("serve", "interactive session over WebSocket");
  common(serve);
  serve->add_option("--port", port, "listen port (0 picks one)");
  serve->add_flag("--realtime", realtime, "pace ticks to the wall clock");

  auto* metrics = app.add_subcommand("metrics", "recompute episode metrics from a JSONL log");
  metrics->add_option("--log", log_path, "JSONL log")->required();
  metrics->add_option("--deviation", deviation, "commanded or tracking")
      ->check(CLI::IsMember({"commanded", "tracking"}));
  metrics->add_option("--out", out_dir, "output directory");

  auto* validate = app.add_subcommand("validate", "check a scenario and print it with defaults resolved");
  common(validate);

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : {run, sweep, serve, validate}) {
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;
  }

  try {
    if (run->parsed()) return cmd_run(config, o, out_dir);
    if (sweep->parsed()) return cmd_sweep(config, o, out_dir, a0, a1, r0, r1);
    if (serve->parsed()) return cmd_serve(config, o, port, realtime);
    if (metrics->parsed()) return cmd_metrics(log_path, deviation, out_dir);
    if (validate->parsed()) return cmd_validate(config, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
