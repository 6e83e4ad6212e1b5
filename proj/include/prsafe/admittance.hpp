#pragma once

#include <array>

#include <unsupported/Eigen/MatrixFunctions>

#include "prsafe/types.hpp"

namespace prsafe {

/// Diagonal stiffness, damping and inertia of the per-axis filter
/// m * ddx + c * dx + k * x = e_F. Axes 1-2 in (N, m), axes 3-4 in (N*m, rad).
struct AdmittanceParams {
  Vec4 k{250.0, 500.0, 25.0, 25.0};
  Vec4 c{894.0, 894.0, 89.4, 89.4};
  Vec4 m{200.0, 200.0, 20.0, 20.0};

  void validate() const {
    if (!((k.array() > 0.0).all() && (c.array() > 0.0).all() && (m.array() > 0.0).all())) {
      throw ConfigError("admittance: k, c and m must be positive");
    }
  }
};

struct AdmittanceState {
  Vec4 offset = Vec4::Zero();  // Delta X
  Vec4 rate = Vec4::Zero();    // d(Delta X)/dt

  void reset() { *this = AdmittanceState{}; }
};

/// Exact zero-order-hold discretisation of the admittance filter for a fixed
/// sample period. The transition matrices are computed once per axis.
class AdmittanceFilter {
 public:
  AdmittanceFilter(const AdmittanceParams& params, double dt) : params_(params), dt_(dt) {
    if (!(dt > 0.0)) throw Error("admittance: sample period must be positive");
    params_.validate();
    for (Eigen::Index a = 0; a < 4; ++a) {
      Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
      aug(0, 1) = 1.0;
      aug(1, 0) = -params_.k[a] / params_.m[a];
      aug(1, 1) = -params_.c[a] / params_.m[a];
      aug(1, 2) = 1.0 / params_.m[a];
      const Eigen::Matrix3d e = (aug * dt).exp();
      auto& d = axes_[static_cast<std::size_t>(a)];
      d.phi = e.topLeftCorner<2, 2>();
      d.gamma = e.topRightCorner<2, 1>();
    }
  }

  double dt() const { return dt_; }
  const AdmittanceParams& params() const { return params_; }

  /// Advances the state by one period holding `gated_error` constant.
  void step(AdmittanceState& s, const Vec4& gated_error) const {
    for (Eigen::Index a = 0; a < 4; ++a) {
      const auto& d = axes_[static_cast<std::size_t>(a)];
      const Eigen::Vector2d x(s.offset[a], s.rate[a]);
      const Eigen::Vector2d next = d.phi * x + d.gamma * gated_error[a];
      s.offset[a] = next[0];
      s.rate[a] = next[1];
    }
  }

 private:
  struct Axis {
    Eigen::Matrix2d phi;
    Eigen::Vector2d gamma;
  };
  AdmittanceParams params_;
  double dt_;
  std::array<Axis, 4> axes_{};
};

inline AdmittanceState admittance_step(const AdmittanceParams& params, AdmittanceState state,
                                       const ForceVector& gated_error, double dt) {
  AdmittanceFilter(params, dt).step(state, gated_error.vector());
  return state;
}

/// X_a = X_r + Delta X, componentwise in configuration space.
inline Pose compose_reference(const Pose& reference, const Vec4& offset) {
  return Pose::from_vector(reference.vector() + offset);
}

}  // namespace prsafe
