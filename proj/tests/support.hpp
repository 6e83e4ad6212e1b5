#pragma once

#include <random>
#include <vector>

#include "prsafe/kinematics.hpp"
#include "prsafe/screw.hpp"

namespace prsafe::testing {

// Anchor coordinates used by the shipped scenarios, written out explicitly.
inline RobotGeometry explicit_geometry() {
  RobotGeometry g;
  g.fixed_anchors = {Vec3(0.29885840942752367, 0.02614672282429745, 0.0), Vec3(0.0, 0.3, 0.0),
                     Vec3(0.0, -0.3, 0.0), Vec3(0.0, 0.0, 0.0)};
  g.mobile_anchors = {Vec3(0.068404028665133773, 0.18793852415718168, 0.0),
                      Vec3(0.17320508075688776, 0.1, 0.0), Vec3(0.17320508075688776, -0.1, 0.0)};
  return g;
}

// Poses whose actuator lengths fall inside the joint box.
inline std::vector<Pose> random_poses(const RobotGeometry& g, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x(-0.15, 0.15), z(0.65, 0.85), th(-0.35, 0.35), ps(-0.5, 0.5);
  std::vector<Pose> out;
  while (out.size() < n) {
    const Pose p{x(rng), z(rng), th(rng), ps(rng)};
    if (within_joint_limits(actuator_lengths(p, g), g)) out.push_back(p);
  }
  return out;
}

inline std::vector<Pose> random_regular_poses(const RobotGeometry& g, std::size_t n, std::uint64_t seed,
                                              double min_omega) {
  std::vector<Pose> out;
  for (const Pose& p : random_poses(g, 4 * n, seed)) {
    if (out.size() == n) break;
    if (omega_indices(p, g).min > min_omega) out.push_back(p);
  }
  return out;
}

}  // namespace prsafe::testing
