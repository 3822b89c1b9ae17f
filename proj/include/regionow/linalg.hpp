#pragma once

#include <Eigen/Dense>

#include <random>

#include "errors.hpp"

namespace regionow {

using Rng = std::mt19937_64;

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
  return z;
}

/// Draw from N(mean, cov) for a symmetric positive semi-definite `cov`.
/// Uses a pivoted LDLT so exactly singular covariances are fine; tiny
/// negative pivots from rounding are clamped to zero.
inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::Index n = mean.size();
  Eigen::VectorXd z = standard_normal(rng, n);
  if (n == 0) return mean;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw NumericError("LDLT failed while sampling a Gaussian");
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd x = ldlt.matrixL() * d.cwiseProduct(z);
  x = ldlt.transpositionsP().transpose() * x;
  return mean + x;
}

/// Draw from N(P^{-1} b, P^{-1}) given a positive definite precision P.
/// This is the conditional posterior of Gaussian linear regression.
inline Eigen::VectorXd sample_from_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(b);
  const Eigen::VectorXd z = standard_normal(rng, b.size());
  return mean + llt.matrixU().solve(z);
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace regionow
