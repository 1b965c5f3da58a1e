#pragma once

#include <cmath>
#include <numbers>

#include "unlearn/dataset.hpp"
#include "unlearn/linalg.hpp"
#include "unlearn/rng.hpp"

namespace testutil {

using unlearn::Matrix;
using unlearn::Rng;
using unlearn::SymMatrix;
using unlearn::Vector;

inline Vector random_vector(int p, Rng& rng, double scale = 1.0) {
  Vector v(p);
  for (int i = 0; i < p; ++i) v[i] = scale * rng.gaussian();
  return v;
}

inline Matrix random_orthogonal(int p, Rng& rng) {
  Matrix g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  return q;
}

// SPD matrix with eigenvalues uniform in [lo, hi].
inline SymMatrix random_spd(int p, Rng& rng, double lo, double hi) {
  const Matrix q = random_orthogonal(p, rng);
  Vector eigs(p);
  for (int i = 0; i < p; ++i) eigs[i] = rng.uniform(lo, hi);
  Matrix m = q * eigs.asDiagonal() * q.transpose();
  return SymMatrix(0.5 * (m + m.transpose()));
}

inline SymMatrix random_symmetric(int p, Rng& rng, double scale = 1.0) {
  Matrix g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = scale * rng.gaussian();
  return SymMatrix(0.5 * (g + g.transpose()));
}

// Independent oracle for the 1-D Gaussian KL: Simpson integration of
// p(x) log(p(x)/q(x)) on a grid wide enough to hold all of p's mass.
inline double kl_1d_numeric(double mu_p, double var_p, double mu_q,
                            double var_q) {
  const double sd_p = std::sqrt(var_p);
  const double sd_q = std::sqrt(var_q);
  const double lo = std::min(mu_p, mu_q) - 15.0 * std::max(sd_p, sd_q);
  const double hi = std::max(mu_p, mu_q) + 15.0 * std::max(sd_p, sd_q);
  const int n = 200001;  // odd for Simpson
  const double h = (hi - lo) / (n - 1);
  auto log_pdf = [](double x, double mu, double sd) {
    const double z = (x - mu) / sd;
    return -0.5 * z * z - std::log(sd * std::sqrt(2.0 * std::numbers::pi));
  };
  auto integrand = [&](double x) {
    const double lp = log_pdf(x, mu_p, sd_p);
    if (lp < -700.0) return 0.0;
    return std::exp(lp) * (lp - log_pdf(x, mu_q, sd_q));
  };
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < n - 1; ++i) {
    sum += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

// Minimal valid dataset for operations that ignore samples.
inline unlearn::Dataset dummy_dataset() {
  unlearn::Dataset ds;
  ds.features = Matrix::Zero(2, 1);
  ds.features(1, 0) = 1.0;
  ds.labels = {0, 1};
  ds.num_classes = 2;
  ds.name = "dummy";
  return ds;
}

}  // namespace testutil
