// Minimal library use: push the platform toward a Type II singularity with
// and without the avoidance layer and compare what happens.

#include <iostream>

#include "prsafe/loop.hpp"
#include "prsafe/metrics.hpp"

int main() {
  using namespace prsafe;
  ScenarioConfig cfg;
  cfg.reference = ReferenceTrajectory::constant(Pose{-0.2, 0.75, 0.0, -0.64});
  cfg.force_script = ForceScript({{0.5, 1.0, ForceVector{0, 0, 0, 10.0}, RampShape::linear}});
  cfg.duration = 8.0;

  for (ControllerMode mode : {ControllerMode::conventional, ControllerMode::complemented}) {
    cfg.mode = mode;
    const ScenarioRun run = run_scenario(cfg);
    double lowest = 180.0;
    for (const auto& r : run.log) lowest = std::min(lowest, r.omega_measured_min);
    const MetricsReport m = compute_metrics(run.log, cfg.deviation);
    std::cout << to_string(mode) << ": min Omega_c " << lowest << " deg, breaches " << m.breaches
              << ", episodes " << m.episodes << ", final z " << run.log.back().truth.z << " m\n";
  }
}
