#include "eot/matstat.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eot {

bool is_spd(const Matrix& a, double sym_tol) {
  if (a.rows() == 0 || a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale) return false;
  Eigen::LLT<Matrix> llt(symmetrize(a));
  return llt.info() == Eigen::Success;
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Eigen::LLT<Matrix> spd_llt(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw std::invalid_argument("spd_llt: matrix must be square and non-empty");
  const Matrix sym = symmetrize(a);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt;
  const double eps = 1e-9 * sym.trace() / static_cast<double>(sym.rows());
  if (eps > 0.0) {
    llt.compute(sym + eps * Matrix::Identity(sym.rows(), sym.cols()));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::domain_error("spd_llt: matrix is not positive definite");
}

Matrix spd_inverse(const Matrix& a) {
  return spd_llt(a).solve(Matrix::Identity(a.rows(), a.cols()));
}

double spd_logdet(const Matrix& a) {
  const Matrix l = spd_llt(a).matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

double multivariate_lgamma(int d, double a) {
  if (d < 1) throw std::invalid_argument("multivariate_lgamma: d must be positive");
  if (!(a > 0.5 * (d - 1)))
    throw std::invalid_argument("multivariate_lgamma: argument out of domain");
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= d; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

namespace {

int checked_dim(const Matrix& scale, double dof, const char* who) {
  const int d = static_cast<int>(scale.rows());
  if (d == 0 || scale.cols() != d)
    throw std::invalid_argument(std::string(who) + ": scale must be square and non-empty");
  if (!(dof > d - 1))
    throw std::invalid_argument(std::string(who) + ": dof must exceed d - 1");
  if (!is_spd(scale)) throw std::invalid_argument(std::string(who) + ": scale must be SPD");
  return d;
}

}  // namespace

double wishart_logpdf(const Matrix& x, const WishartParams& p) {
  const int d = checked_dim(p.scale, p.dof, "wishart_logpdf");
  if (x.rows() != d || x.cols() != d)
    throw std::invalid_argument("wishart_logpdf: dimension mismatch");
  if (!is_spd(x)) throw std::domain_error("wishart_logpdf: input is not SPD");
  const auto llt = spd_llt(p.scale);
  const Matrix l = llt.matrixL();
  const double logdet_scale = 2.0 * l.diagonal().array().log().sum();
  const double trace_term = llt.solve(x).trace();
  return -0.5 * p.dof * logdet_scale + 0.5 * (p.dof - d - 1) * spd_logdet(x) -
         0.5 * p.dof * d * std::numbers::ln2 - multivariate_lgamma(d, 0.5 * p.dof) -
         0.5 * trace_term;
}

double invwishart_logpdf(const Matrix& x, const InverseWishartParams& p) {
  const int d = checked_dim(p.scale, p.dof, "invwishart_logpdf");
  if (x.rows() != d || x.cols() != d)
    throw std::invalid_argument("invwishart_logpdf: dimension mismatch");
  if (!is_spd(x)) throw std::domain_error("invwishart_logpdf: input is not SPD");
  const double trace_term = spd_llt(x).solve(p.scale).trace();
  return 0.5 * p.dof * spd_logdet(p.scale) - 0.5 * (p.dof + d + 1) * spd_logdet(x) -
         0.5 * p.dof * d * std::numbers::ln2 - multivariate_lgamma(d, 0.5 * p.dof) -
         0.5 * trace_term;
}

Matrix wishart_mean(const WishartParams& p) {
  checked_dim(p.scale, p.dof, "wishart_mean");
  return p.dof * p.scale;
}

Matrix invwishart_mean(const InverseWishartParams& p) {
  const int d = checked_dim(p.scale, p.dof, "invwishart_mean");
  if (!(p.dof > d + 1))
    throw std::domain_error("invwishart_mean: mean undefined for dof <= d + 1");
  return p.scale / (p.dof - d - 1);
}

Matrix sample_wishart(const WishartParams& p, std::mt19937_64& rng) {
  const int d = checked_dim(p.scale, p.dof, "sample_wishart");
  const Matrix l = spd_llt(p.scale).matrixL();
  Matrix bartlett = Matrix::Zero(d, d);
  std::normal_distribution<double> unit;
  for (int i = 0; i < d; ++i) {
    std::gamma_distribution<double> chi_sq(0.5 * (p.dof - i), 2.0);
    bartlett(i, i) = std::sqrt(chi_sq(rng));
    for (int j = 0; j < i; ++j) bartlett(i, j) = unit(rng);
  }
  const Matrix f = l * bartlett;
  return symmetrize(f * f.transpose());
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace eot
