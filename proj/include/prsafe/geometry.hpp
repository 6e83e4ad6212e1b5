#pragma once

#include <array>
#include <optional>
#include <string>

#include "prsafe/types.hpp"

namespace prsafe {

/// Radii (m) and angles (deg) describing anchor placement on both platforms.
struct GeneratorParams {
  double r1 = 0.3, r2 = 0.3, r3 = 0.3;
  double beta_fd = 5.0, beta_fi = 90.0;
  double ds = 0.0;
  double rm1 = 0.2, rm2 = 0.2, rm3 = 0.2;
  double beta_md = 70.0, beta_mi = 30.0;
};

struct AnchorSet {
  std::array<Vec3, 4> fixed;   // A0, B0, C0, D0 in the fixed frame
  std::array<Vec3, 3> mobile;  // A1, B1, C1 in the mobile frame
};

/// Point on a circle of radius `r` at polar angle `deg` measured from X toward
/// +Y. Placing the same angle on the opposite side is the same call with -deg.
inline Vec3 circle_point(double r, double deg) {
  const double a = deg2rad(deg);
  return {r * std::cos(a), r * std::sin(a), 0.0};
}

/// Anchor layout convention:
///   limb 1: fixed anchor at +beta_FD on R1, mobile anchor at +beta_MD on Rm1;
///   limb 2: +beta_FI on R2, +beta_MI on Rm2;
///   limb 3: mirror image of limb 2 across X-Z (-beta_FI on R3, -beta_MI on Rm3);
///   central limb: D0 = (0, d_s, 0), attached at the mobile origin.
inline AnchorSet generate_anchors(const GeneratorParams& p) {
  for (double r : {p.r1, p.r2, p.r3, p.rm1, p.rm2, p.rm3}) {
    if (!(r > 0.0)) throw ConfigError("anchor generator: radii must be positive");
  }
  AnchorSet a;
  a.fixed[0] = circle_point(p.r1, p.beta_fd);
  a.fixed[1] = circle_point(p.r2, p.beta_fi);
  a.fixed[2] = circle_point(p.r3, -p.beta_fi);
  a.fixed[3] = Vec3(0.0, p.ds, 0.0);
  a.mobile[0] = circle_point(p.rm1, p.beta_md);
  a.mobile[1] = circle_point(p.rm2, p.beta_mi);
  a.mobile[2] = circle_point(p.rm3, -p.beta_mi);
  return a;
}

struct RobotGeometry {
  std::array<Vec3, 4> fixed_anchors;
  std::array<Vec3, 3> mobile_anchors;
  std::optional<GeneratorParams> generator;
  Vec4 joint_max{0.93, 0.93, 0.93, 0.82};
  Vec4 joint_min{0.65, 0.64, 0.65, 0.65};
  Vec3 socket_limit{38.0, 38.0, 38.0};  // deg
  // Reference configuration for relative singularity thresholds.
  Pose home{0.0, 0.75, 0.0, 0.0};

  static RobotGeometry from_generator(const GeneratorParams& p) {
    RobotGeometry g;
    const AnchorSet a = generate_anchors(p);
    g.fixed_anchors = a.fixed;
    g.mobile_anchors = a.mobile;
    g.generator = p;
    return g;
  }

  static RobotGeometry defaults() { return from_generator(GeneratorParams{}); }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const {
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (!(joint_min[i] < joint_max[i])) {
        throw ConfigError("geometry: joint_min[" + std::to_string(i) + "] must be below joint_max");
      }
    }
    for (const auto& v : fixed_anchors) {
      if (!v.allFinite()) throw ConfigError("geometry: non-finite fixed anchor");
    }
    for (const auto& v : mobile_anchors) {
      if (!v.allFinite()) throw ConfigError("geometry: non-finite mobile anchor");
    }
    if (generator && generator->ds == 0.0 && fixed_anchors[3].y() != 0.0) {
      throw ConfigError("geometry: D0 must lie in the X-Z plane when d_s = 0");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        if ((fixed_anchors[i] - fixed_anchors[j]).norm() < 1e-9) {
          throw ConfigError("geometry: coincident fixed anchors");
        }
        if ((mobile_anchors[i] - mobile_anchors[j]).norm() < 1e-9) {
          throw ConfigError("geometry: coincident mobile anchors");
        }
      }
    }
    if (!(socket_limit.array() > 0.0).all()) throw ConfigError("geometry: socket limits must be positive");
  }
};

}  // namespace prsafe
