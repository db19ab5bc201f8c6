#include "eot/gwmetric.hpp"

#include <cmath>
#include <stdexcept>

namespace eot {

namespace {

void check_shape(const Matrix& s, const char* who) {
  if (s.rows() == 0 || s.rows() != s.cols())
    throw std::invalid_argument(std::string(who) + ": shape must be square and non-empty");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::domain_error(std::string(who) + ": shape must be symmetric");
}

}  // namespace

Matrix spd_sqrt(const Matrix& a) {
  check_shape(a, "spd_sqrt");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  if (es.info() != Eigen::Success) throw std::domain_error("spd_sqrt: eigendecomposition failed");
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-9 * scale)
    throw std::domain_error("spd_sqrt: matrix is not positive semidefinite");
  const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double gwd_squared(const EllipseEstimate& a, const EllipseEstimate& b) {
  if (a.center.size() != b.center.size())
    throw std::invalid_argument("gwd: center dimension mismatch");
  if (a.shape.rows() != a.center.size() || b.shape.rows() != b.center.size())
    throw std::invalid_argument("gwd: shape dimension mismatch");
  check_shape(a.shape, "gwd");
  check_shape(b.shape, "gwd");
  const Matrix root_a = spd_sqrt(a.shape);
  const Matrix cross = spd_sqrt(symmetrize(root_a * b.shape * root_a));
  double trace_term = (a.shape + b.shape).trace() - 2.0 * cross.trace();
  if (trace_term < 0.0) {
    const double slack = 1e-10 * std::max(1.0, (a.shape + b.shape).trace());
    if (trace_term < -slack) throw std::domain_error("gwd: negative trace term beyond tolerance");
    trace_term = 0.0;
  }
  return (a.center - b.center).squaredNorm() + trace_term;
}

double gwd(const EllipseEstimate& a, const EllipseEstimate& b) {
  return std::sqrt(gwd_squared(a, b));
}

double rgwe(std::span<const double> squared_distances) {
  if (squared_distances.empty()) throw std::invalid_argument("rgwe: empty input");
  double acc = 0.0;
  for (double v : squared_distances) {
    if (!(v >= 0.0)) throw std::invalid_argument("rgwe: squared distances must be >= 0");
    acc += v;
  }
  return std::sqrt(acc / static_cast<double>(squared_distances.size()));
}

}  // namespace eot
