#include "eot/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace eot {

namespace {

void check_motion(const MotionParams& p, const char* who) {
  if (!(p.scan_time >= 0.0)) throw std::invalid_argument(std::string(who) + ": scan_time must be >= 0");
  if (!(p.maneuver_correlation > 0.0))
    throw std::invalid_argument(std::string(who) + ": maneuver_correlation must be > 0");
}

}  // namespace

Eigen::Matrix3d build_F(const MotionParams& p) {
  check_motion(p, "build_F");
  const double dt = p.scan_time;
  Eigen::Matrix3d f;
  f << 1.0, dt, 0.5 * dt * dt,
       0.0, 1.0, dt,
       0.0, 0.0, std::exp(-dt / p.maneuver_correlation);
  return f;
}

Eigen::Matrix3d build_Q(const MotionParams& p) {
  check_motion(p, "build_Q");
  if (!(p.accel_rms >= 0.0)) throw std::invalid_argument("build_Q: accel_rms must be >= 0");
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q(2, 2) = p.accel_rms * p.accel_rms *
            (1.0 - std::exp(-2.0 * p.scan_time / p.maneuver_correlation));
  return q;
}

Matrix measurement_projection(int d) {
  if (d < 1) throw std::invalid_argument("measurement_projection: d must be positive");
  Matrix h = Matrix::Zero(d, 3 * d);
  h.leftCols(d).setIdentity();
  return h;
}

Vector kron_apply(const Eigen::Matrix3d& f, const Vector& m, int d) {
  if (d < 1 || m.size() != 3 * d)
    throw std::invalid_argument("kron_apply: state length must be 3 d");
  Vector out = Vector::Zero(3 * d);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (f(i, j) != 0.0) out.segment(i * d, d) += f(i, j) * m.segment(j * d, d);
  return out;
}

Vector kron_lift(const Eigen::Vector3d& w, const Vector& e) {
  Vector out(3 * e.size());
  for (int i = 0; i < 3; ++i) out.segment(i * e.size(), e.size()) = w(i) * e;
  return out;
}

}  // namespace eot
