#pragma once

#include <Eigen/Dense>
#include <variant>

#include "unlearn/errors.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense real symmetric matrix. Construction validates finiteness and
// symmetry (relative tolerance 1e-12) and then symmetrizes exactly, so all
// downstream kernels may assume m == m.transpose() bitwise.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix from_diagonal(const Vector& diag);

  Eigen::Index dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
};

struct EigenPair {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, M = V diag(values) V^T
};

// Covariance of a Gaussian: diagonal (variances) or full SPD matrix.
struct DiagonalCov {
  Vector variances;
};
struct FullCov {
  SymMatrix matrix;
};
using Covariance = std::variant<DiagonalCov, FullCov>;

Eigen::Index cov_dim(const Covariance& cov);

struct GaussianParams {
  Vector mean;
  Covariance cov;
};

EigenPair sym_eig(const SymMatrix& m);

// V diag(exp(values * t)) V^T. Throws Overflow when an exponent exceeds 700.
SymMatrix mat_exp(const SymMatrix& m, double t);

// Replaces every eigenvalue above `cap` with `cap`; eigenvectors unchanged.
SymMatrix clamp_eigs(const SymMatrix& m, double cap);

// Floors eigenvalues at `floor` (> 0), then raises them to `exponent`, one
// of -1, -1/2, -1/4. Result is symmetric positive definite.
SymMatrix inv_frac_power(const SymMatrix& m, double exponent, double floor);

// KL divergence between multivariate normals, in NATs. Mixed diagonal/full
// pairs are promoted to full up to dimension 512.
double gaussian_kl(const GaussianParams& p, const GaussianParams& q);

// One draw n ~ N(0, cov).
Vector sample_gaussian(const Covariance& cov, Rng& rng);

}  // namespace unlearn
