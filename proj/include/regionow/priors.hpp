#pragma once

// Conjugate building blocks of the Gibbs sampler: inverse-gamma variance
// draws, Gaussian regression draws, and horseshoe scale updates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "datamodel.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace regionow {

/// Draw from IG(shape, scale), i.e. 1 / Gamma(shape, rate = scale).
inline double draw_inverse_gamma(double shape, double scale, Rng& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw DomainError("inverse-gamma parameters must be positive");
  std::gamma_distribution<double> g(shape, 1.0);
  return scale / g(rng);
}

/// Variance draw given residuals under an IG(a, b) prior:
/// IG(a + n/2, b + SSR/2).
inline double draw_variance(const Eigen::VectorXd& residuals, const InvGammaPrior& prior, Rng& rng) {
  if (!residuals.allFinite()) throw NumericError("non-finite residuals in variance draw");
  return draw_inverse_gamma(prior.shape + 0.5 * static_cast<double>(residuals.size()),
                            prior.scale + 0.5 * residuals.squaredNorm(), rng);
}

/// Posterior mean of the variance draw; closed form b_post / (a_post - 1).
inline double variance_posterior_mean(double ssr, Eigen::Index n, const InvGammaPrior& prior) {
  const double a = prior.shape + 0.5 * static_cast<double>(n);
  return (prior.scale + 0.5 * ssr) / (a - 1.0);
}

/// Horseshoe scales for one block of coefficients, in the auxiliary
/// inverse-gamma representation of the half-Cauchy:
///   beta_j ~ N(0, tau2 * lambda2_j),
///   lambda2_j | nu_j ~ IG(1/2, 1/nu_j),  nu_j ~ IG(1/2, 1),
///   tau2 | xi ~ IG(1/2, 1/xi),           xi ~ IG(1/2, 1).
/// All members hold squared scales.
struct HorseshoeBlock {
  Eigen::VectorXd local;
  Eigen::VectorXd local_aux;
  double global = 1.0;
  double global_aux = 1.0;

  static HorseshoeBlock ones(Eigen::Index n) {
    return {Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n), 1.0, 1.0};
  }

  Eigen::Index size() const noexcept { return local.size(); }

  // Prior variances are kept inside [1e-10, 1e10] so posterior precisions
  // stay finite when a scale collapses or explodes.
  Eigen::VectorXd prior_variance() const { return (global * local).cwiseMax(1e-10).cwiseMin(1e10); }

  bool positive() const {
    return (local.array() > 0.0).all() && (local_aux.array() > 0.0).all() && global > 0.0 && global_aux > 0.0;
  }
};

/// One Gibbs update of a horseshoe block given the current coefficients.
inline HorseshoeBlock draw_horseshoe_scales(const Eigen::VectorXd& coefficients, const HorseshoeBlock& state,
                                            Rng& rng) {
  if (coefficients.size() != state.size()) throw DimensionError("horseshoe block size mismatch");
  if (!coefficients.allFinite()) throw NumericError("non-finite coefficients in horseshoe update");
  HorseshoeBlock out = state;
  const Eigen::Index n = coefficients.size();
  const Eigen::ArrayXd b2 = coefficients.array().square();
  for (Eigen::Index j = 0; j < n; ++j) {
    out.local[j] = draw_inverse_gamma(1.0, 1.0 / out.local_aux[j] + b2[j] / (2.0 * out.global), rng);
    out.local_aux[j] = draw_inverse_gamma(1.0, 1.0 + 1.0 / out.local[j], rng);
  }
  const double ssq = (b2 / out.local.array()).sum();
  out.global = draw_inverse_gamma(0.5 * static_cast<double>(n + 1), 1.0 / out.global_aux + 0.5 * ssq, rng);
  out.global_aux = draw_inverse_gamma(1.0, 1.0 + 1.0 / out.global, rng);
  out.local = out.local.cwiseMax(1e-300);
  out.global = std::max(out.global, 1e-300);
  return out;
}

/// Accumulates Gaussian regression sufficient statistics X'WX and X'Wy for
/// observation blocks with different noise variances.
class RegressionStats {
 public:
  explicit RegressionStats(Eigen::Index k) : xtx_(Eigen::MatrixXd::Zero(k, k)), xty_(Eigen::VectorXd::Zero(k)) {}

  void add(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double noise_var) {
    if (x.rows() == 0) return;
    if (x.cols() != xtx_.cols() || x.rows() != y.size()) throw DimensionError("regression block shape mismatch");
    xtx_.noalias() += x.transpose() * x / noise_var;
    xty_.noalias() += x.transpose() * y / noise_var;
  }

  void add_row(const Eigen::VectorXd& x, double y, double noise_var) {
    xtx_.noalias() += x * x.transpose() / noise_var;
    xty_ += x * (y / noise_var);
  }

  /// Draw beta ~ N(V b, V), V = (X'WX + diag(1/prior_var))^{-1}.
  Eigen::VectorXd draw(const Eigen::VectorXd& prior_var, Rng& rng) const {
    if (prior_var.size() != xty_.size()) throw DimensionError("prior variance size mismatch");
    Eigen::MatrixXd prec = xtx_;
    prec.diagonal() += prior_var.cwiseInverse();
    return sample_from_precision(prec, xty_, rng);
  }

  Eigen::VectorXd posterior_mean(const Eigen::VectorXd& prior_var) const {
    Eigen::MatrixXd prec = xtx_;
    prec.diagonal() += prior_var.cwiseInverse();
    return prec.llt().solve(xty_);
  }

 private:
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
};

}  // namespace regionow
