#pragma once

#include "eot/matstat.hpp"

namespace eot {

/// Standard gravity, for accelerations quoted in g.
inline constexpr double kGravity = 9.80665;  // m/s^2

/// Kinematics are modeled per coordinate with state [position, velocity,
/// acceleration] and an exponentially correlated acceleration; the full
/// 3d-dimensional state stacks the blocks as [p_1..p_d, v_1..v_d, a_1..a_d].
/// All quantities are SI (meters, seconds).
struct MotionParams {
  double scan_time = 10.0;             // seconds between scans
  double maneuver_correlation = 40.0;  // acceleration correlation time
  double accel_rms = kGravity;         // steady-state acceleration RMS
  double extension_decay = 10.0;       // extension dof forgetting time
  double extension_dof = 50.0;         // extension transition dof (simulation only)
};

/// Shared model dimensions: d spatial coordinates and the scattering factor
/// s relating object extent to measurement spread (1/4 for a uniform
/// elliptic profile).
struct ModelConfig {
  int d = 2;
  double s = 0.25;
  MotionParams motion;
};

/// Per-coordinate transition [[1, dt, dt^2/2], [0, 1, dt], [0, 0, exp(-dt/theta)]].
[[nodiscard]] Eigen::Matrix3d build_F(const MotionParams& p);

/// Process noise accel_rms^2 * (1 - exp(-2 dt/theta)) * diag(0, 0, 1).
[[nodiscard]] Eigen::Matrix3d build_Q(const MotionParams& p);

/// The d x 3d position-picking matrix [1 0 0] (x) I_d.
[[nodiscard]] Matrix measurement_projection(int d);

/// (F (x) I_d) m without materializing the 3d x 3d operator.
[[nodiscard]] Vector kron_apply(const Eigen::Matrix3d& f, const Vector& m, int d);

/// (w (x) I_d) e for a 3-vector w and a d-vector e.
[[nodiscard]] Vector kron_lift(const Eigen::Vector3d& w, const Vector& e);

}  // namespace eot
