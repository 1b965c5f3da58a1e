#include "unlearn/linalg.hpp"

#include <cmath>
#include <string>

namespace unlearn {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NonFinite: return "NonFinite";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::Overflow: return "Overflow";
    case Errc::InvalidFloor: return "InvalidFloor";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::EmptyForget: return "EmptyForget";
    case Errc::EmptyRetain: return "EmptyRetain";
    case Errc::NoSuchClass: return "NoSuchClass";
    case Errc::ParseError: return "ParseError";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::UnsupportedModel: return "UnsupportedModel";
    case Errc::Diverged: return "Diverged";
    case Errc::NotAtMinimum: return "NotAtMinimum";
    case Errc::NoiselessMethod: return "NoiselessMethod";
    case Errc::DegenerateFit: return "DegenerateFit";
    case Errc::HidingRequiresWholeClass: return "HidingRequiresWholeClass";
    case Errc::NotReached: return "NotReached";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    raise(Errc::DimensionMismatch, "symmetric matrix must be square, got " +
                                       std::to_string(m.rows()) + "x" +
                                       std::to_string(m.cols()));
  }
  if (!m.allFinite()) {
    raise(Errc::NonFinite, "matrix contains NaN or Inf");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double tol = 1e-12 * std::max(1.0, std::abs(m(i, j)));
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        raise(Errc::DimensionMismatch,
              "matrix is not symmetric at (" + std::to_string(i) + "," +
                  std::to_string(j) + ")");
      }
    }
  }
  mat_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  return SymMatrix(Matrix::Identity(dim, dim));
}

SymMatrix SymMatrix::from_diagonal(const Vector& diag) {
  return SymMatrix(Matrix(diag.asDiagonal()));
}

Eigen::Index cov_dim(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) return d->variances.size();
  return std::get<FullCov>(cov).matrix.dim();
}

EigenPair sym_eig(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    raise(Errc::ConvergenceFailure, "symmetric eigendecomposition failed");
  }
  return EigenPair{solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

SymMatrix rebuild(const EigenPair& eig, const Vector& new_values) {
  Matrix m = eig.vectors * new_values.asDiagonal() * eig.vectors.transpose();
  return SymMatrix(0.5 * (m + m.transpose()));
}

}  // namespace

SymMatrix mat_exp(const SymMatrix& m, double t) {
  const EigenPair eig = sym_eig(m);
  Vector exps(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double a = eig.values[i] * t;
    if (a > 700.0) {
      raise(Errc::Overflow, "exp(" + std::to_string(a) +
                                ") exceeds double range in matrix exponential");
    }
    exps[i] = std::exp(a);
  }
  return rebuild(eig, exps);
}

SymMatrix clamp_eigs(const SymMatrix& m, double cap) {
  if (std::isinf(cap) && cap > 0) return m;
  const EigenPair eig = sym_eig(m);
  if (eig.values.maxCoeff() <= cap) return m;
  Vector capped = eig.values.cwiseMin(cap);
  return rebuild(eig, capped);
}

SymMatrix inv_frac_power(const SymMatrix& m, double exponent, double floor) {
  if (!(floor > 0.0)) {
    raise(Errc::InvalidFloor, "eigenvalue floor must be positive");
  }
  if (exponent != -1.0 && exponent != -0.5 && exponent != -0.25) {
    raise(Errc::InvalidSpec, "exponent must be one of -1, -1/2, -1/4");
  }
  const EigenPair eig = sym_eig(m);
  Vector powered(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    powered[i] = std::pow(std::max(eig.values[i], floor), exponent);
  }
  return rebuild(eig, powered);
}

namespace {

Matrix to_full(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    return Matrix(d->variances.asDiagonal());
  }
  return std::get<FullCov>(cov).matrix.mat();
}

bool cov_equal(const Covariance& a, const Covariance& b) {
  if (const auto* da = std::get_if<DiagonalCov>(&a)) {
    const auto* db = std::get_if<DiagonalCov>(&b);
    return db && da->variances == db->variances;
  }
  const auto* fb = std::get_if<FullCov>(&b);
  return fb && std::get<FullCov>(a).matrix.mat() == fb->matrix.mat();
}

// KL for diagonal covariances decomposes into a sum of 1-D terms.
double diagonal_kl(const Vector& mp, const Vector& vp, const Vector& mq,
                   const Vector& vq) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mp.size(); ++i) {
    if (vp[i] <= 0.0 || vq[i] <= 0.0) {
      raise(Errc::SingularCovariance, "non-positive diagonal variance");
    }
    const double diff = mq[i] - mp[i];
    kl += 0.5 * (vp[i] / vq[i] + diff * diff / vq[i] - 1.0 +
                 std::log(vq[i] / vp[i]));
  }
  return kl;
}

}  // namespace

double gaussian_kl(const GaussianParams& p, const GaussianParams& q) {
  const Eigen::Index k = p.mean.size();
  if (q.mean.size() != k || cov_dim(p.cov) != k || cov_dim(q.cov) != k) {
    raise(Errc::DimensionMismatch, "Gaussian parameters differ in dimension");
  }
  if (p.mean == q.mean && cov_equal(p.cov, q.cov)) return 0.0;

  const auto* dp = std::get_if<DiagonalCov>(&p.cov);
  const auto* dq = std::get_if<DiagonalCov>(&q.cov);
  if (dp && dq) {
    return std::max(0.0, diagonal_kl(p.mean, dp->variances, q.mean,
                                     dq->variances));
  }
  if ((dp || dq) && k > 512) {
    raise(Errc::DimensionMismatch,
          "mixed diagonal/full covariance pair beyond dimension 512");
  }

  // 1/2 (tr(Sq^-1 Sp) + (mq-mp)^T Sq^-1 (mq-mp) - k + log |Sq|/|Sp|)
  const Matrix sp = to_full(p.cov);
  const Matrix sq = to_full(q.cov);
  Eigen::LLT<Matrix> llt_q(sq);
  if (llt_q.info() != Eigen::Success) {
    raise(Errc::SingularCovariance, "q covariance is not positive definite");
  }
  Eigen::LLT<Matrix> llt_p(sp);
  if (llt_p.info() != Eigen::Success) {
    raise(Errc::SingularCovariance, "p covariance is not positive definite");
  }
  const double trace_term = llt_q.solve(sp).trace();
  const Vector diff = q.mean - p.mean;
  const double maha = diff.dot(llt_q.solve(diff));
  double log_det_ratio = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    log_det_ratio += 2.0 * (std::log(llt_q.matrixL()(i, i)) -
                            std::log(llt_p.matrixL()(i, i)));
  }
  const double kl =
      0.5 * (trace_term + maha - static_cast<double>(k) + log_det_ratio);
  return std::max(0.0, kl);
}

Vector sample_gaussian(const Covariance& cov, Rng& rng) {
  const Eigen::Index k = cov_dim(cov);
  Vector eps(k);
  for (Eigen::Index i = 0; i < k; ++i) eps[i] = rng.gaussian();
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    if ((d->variances.array() < 0.0).any()) {
      raise(Errc::SingularCovariance, "negative variance");
    }
    return (d->variances.array().sqrt() * eps.array()).matrix();
  }
  const EigenPair eig = sym_eig(std::get<FullCov>(cov).matrix);
  if (eig.values.minCoeff() < 0.0) {
    raise(Errc::SingularCovariance, "covariance has a negative eigenvalue");
  }
  return eig.vectors * (eig.values.array().sqrt() * eps.array()).matrix();
}

}  // namespace unlearn
