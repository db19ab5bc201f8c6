#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace eot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric positive definite matrices are carried as plain Eigen matrices.
// The helpers below enforce that contract at API boundaries: every inversion
// and log-determinant goes through a Cholesky factorization, with a single
// jitter retry (eps = 1e-9 * tr(A)/d) before reporting failure.

/// True if `a` is square, symmetric to `sym_tol` (relative to its largest
/// entry) and admits a Cholesky factorization.
[[nodiscard]] bool is_spd(const Matrix& a, double sym_tol = 1e-10);

/// (A + A^T) / 2.
[[nodiscard]] Matrix symmetrize(const Matrix& a);

/// Cholesky factorization with the jitter-retry policy. Throws
/// std::domain_error if the matrix is not positive definite.
[[nodiscard]] Eigen::LLT<Matrix> spd_llt(const Matrix& a);

/// Inverse computed through spd_llt.
[[nodiscard]] Matrix spd_inverse(const Matrix& a);

/// log|A| computed through spd_llt.
[[nodiscard]] double spd_logdet(const Matrix& a);

/// log Gamma_d(a), the multivariate log-gamma function.
[[nodiscard]] double multivariate_lgamma(int d, double a);

/// Wishart distribution W_d(n, W) over d x d SPD matrices with E[X] = n W.
/// Fractional degrees of freedom are allowed as long as n > d - 1.
struct WishartParams {
  double dof = 0.0;
  Matrix scale;
};

/// Inverse-Wishart distribution IW_d(n, W); the mean W / (n - d - 1)
/// exists for n > d + 1.
struct InverseWishartParams {
  double dof = 0.0;
  Matrix scale;
};

[[nodiscard]] double wishart_logpdf(const Matrix& x, const WishartParams& p);
[[nodiscard]] double invwishart_logpdf(const Matrix& x, const InverseWishartParams& p);

/// E[X] = n W.
[[nodiscard]] Matrix wishart_mean(const WishartParams& p);

/// E[X] = W / (n - d - 1). Throws std::domain_error when n <= d + 1.
[[nodiscard]] Matrix invwishart_mean(const InverseWishartParams& p);

/// Bartlett-construction draw: X = (L B)(L B)^T with W = L L^T, B lower
/// triangular, B_ii^2 chi-square with n - i degrees of freedom (0-based i)
/// and standard normal subdiagonal. Fractional dof use the gamma sampler.
[[nodiscard]] Matrix sample_wishart(const WishartParams& p, std::mt19937_64& rng);

/// Stable substream seed: stream `k` of a master seed does not depend on how
/// many other streams are drawn. splitmix64-style mixing.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace eot
