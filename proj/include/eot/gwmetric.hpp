#pragma once

#include <span>

#include "eot/matstat.hpp"

namespace eot {

/// Gaussian summary of an elliptic estimate or ground truth: a center and a
/// symmetric positive semidefinite shape. For filter output the center is
/// the position estimate and the shape is s times the extent mean.
struct EllipseEstimate {
  Vector center;
  Matrix shape;
};

/// Symmetric PSD square root via eigendecomposition; eigenvalues are clamped
/// at zero. Throws std::domain_error for non-symmetric input or eigenvalues
/// negative beyond numerical noise.
[[nodiscard]] Matrix spd_sqrt(const Matrix& a);

/// Squared L2 Wasserstein distance between the Gaussians N(center, shape):
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}).
/// Tiny negative trace residue from the eigendecompositions is clamped to 0.
[[nodiscard]] double gwd_squared(const EllipseEstimate& a, const EllipseEstimate& b);
[[nodiscard]] double gwd(const EllipseEstimate& a, const EllipseEstimate& b);

/// Root of the mean of squared distances. Aggregation over nodes and Monte
/// Carlo runs pools the squared distances before the root, so feeding all
/// (run, node) squares at once is the intended use.
[[nodiscard]] double rgwe(std::span<const double> squared_distances);

}  // namespace eot
