#pragma once

// Kalman filter with a time-varying number of observation rows, a
// Rauch-Tung-Striebel smoother for posterior moments, and a
// forward-filter backward-sample simulation smoother.
//
// Prediction exploits the companion structure of the transition: only the
// top Q rows are dense, the rest shift lags down. This keeps the predict step
// at O(Q d^2) instead of O(d^3).

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "statespace.hpp"

namespace regionow {

struct FilterState {
  std::vector<Eigen::VectorXd> predicted_mean;
  std::vector<Eigen::MatrixXd> predicted_cov;
  std::vector<Eigen::VectorXd> filtered_mean;
  std::vector<Eigen::MatrixXd> filtered_cov;
  std::vector<double> loglik_terms;
  double log_likelihood = 0.0;

  int periods() const noexcept { return static_cast<int>(filtered_mean.size()); }
};

/// One companion-form prediction step: (m, P) -> (C m, C P C' + W).
inline void kalman_predict(const TransitionBlock& tb, const Eigen::VectorXd& m, const Eigen::MatrixXd& P,
                           Eigen::VectorXd& mp, Eigen::MatrixXd& Pp) {
  const int d = tb.state_dim();
  const int q = tb.q;
  const int r = d - q;
  mp.resize(d);
  Pp.resize(d, d);
  mp.head(q).noalias() = tb.coefficients * m;
  mp.tail(r) = m.head(r);
  const Eigen::MatrixXd AP = tb.coefficients * P;
  Pp.topLeftCorner(q, q).noalias() = AP * tb.coefficients.transpose();
  Pp.topLeftCorner(q, q) += tb.shock_cov;
  Pp.topRightCorner(q, r) = AP.leftCols(r);
  Pp.bottomLeftCorner(r, q) = AP.leftCols(r).transpose();
  Pp.bottomRightCorner(r, r) = P.topLeftCorner(r, r);
  symmetrize(Pp);
}

/// Measurement update in expanded Joseph form. Returns the log predictive
/// density of the observation block (0 when the block is empty).
inline double kalman_update(const MeasurementBlock& mb, const Eigen::VectorXd& mp, const Eigen::MatrixXd& Pp,
                            Eigen::VectorXd& mf, Eigen::MatrixXd& Pf) {
  const Eigen::Index rows = mb.rows();
  if (rows == 0) {
    mf = mp;
    Pf = Pp;
    return 0.0;
  }
  const Eigen::VectorXd v = mb.y - mb.design * mp;
  const Eigen::MatrixXd ZP = mb.design * Pp;  // rows x d
  Eigen::MatrixXd S = ZP * mb.design.transpose();
  S.diagonal() += mb.noise_var;
  symmetrize(S);
  if (!S.allFinite() || !v.allFinite()) throw NumericError("non-finite innovation covariance at " + mb.t.str());
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericError("innovation covariance not positive definite at " + mb.t.str());

  const Eigen::MatrixXd Kt = llt.solve(ZP);  // K' (rows x d)
  mf = mp + Kt.transpose() * v;
  const Eigen::MatrixXd KZP = Kt.transpose() * ZP;
  Pf = Pp - KZP - KZP.transpose() + Kt.transpose() * S * Kt;
  symmetrize(Pf);

  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = v.dot(llt.solve(v));
  return -0.5 * (static_cast<double>(rows) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

inline FilterState kalman_filter(const StateSpaceModel& model) {
  FilterState fs;
  const auto T = static_cast<std::size_t>(model.periods());
  fs.predicted_mean.resize(T);
  fs.predicted_cov.resize(T);
  fs.filtered_mean.resize(T);
  fs.filtered_cov.resize(T);
  fs.loglik_terms.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (t == 0) {
      fs.predicted_mean[0] = model.initial_mean;
      fs.predicted_cov[0] = model.initial_cov;
    } else {
      kalman_predict(model.transition, fs.filtered_mean[t - 1], fs.filtered_cov[t - 1], fs.predicted_mean[t],
                     fs.predicted_cov[t]);
    }
    fs.loglik_terms[t] = kalman_update(model.measurements[t], fs.predicted_mean[t], fs.predicted_cov[t],
                                       fs.filtered_mean[t], fs.filtered_cov[t]);
    fs.log_likelihood += fs.loglik_terms[t];
  }
  return fs;
}

struct SmoothedMoments {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;
};

namespace detail {

/// C P for a companion transition, with C P = [A P ; top rows of P].
inline Eigen::MatrixXd companion_times(const TransitionBlock& tb, const Eigen::MatrixXd& P) {
  const int d = tb.state_dim();
  Eigen::MatrixXd out(d, P.cols());
  out.topRows(tb.q).noalias() = tb.coefficients * P;
  out.bottomRows(d - tb.q) = P.topRows(d - tb.q);
  return out;
}

inline constexpr double kRegularization = 1e-12;

/// LDLT of a covariance with a 1e-12 diagonal ridge.
inline Eigen::LDLT<Eigen::MatrixXd> regularized_ldlt(Eigen::MatrixXd g) {
  g.diagonal().array() += kRegularization;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
  if (ldlt.info() != Eigen::Success) throw NumericError("predicted covariance factorization failed");
  return ldlt;
}

}  // namespace detail

/// Fixed-interval smoothed means and covariances of every state.
inline SmoothedMoments rts_smoother(const FilterState& fs, const TransitionBlock& tb) {
  const auto T = static_cast<std::size_t>(fs.periods());
  SmoothedMoments sm;
  sm.mean.resize(T);
  sm.cov.resize(T);
  if (T == 0) return sm;
  sm.mean[T - 1] = fs.filtered_mean[T - 1];
  sm.cov[T - 1] = fs.filtered_cov[T - 1];
  for (std::size_t t = T - 1; t-- > 0;) {
    // J' = G^{-1} C P_f with G the next predicted covariance.
    const auto ldlt = detail::regularized_ldlt(fs.predicted_cov[t + 1]);
    const Eigen::MatrixXd Jt = ldlt.solve(detail::companion_times(tb, fs.filtered_cov[t]));
    sm.mean[t] = fs.filtered_mean[t] + Jt.transpose() * (sm.mean[t + 1] - fs.predicted_mean[t + 1]);
    sm.cov[t] = fs.filtered_cov[t] + Jt.transpose() * (sm.cov[t + 1] - fs.predicted_cov[t + 1]) * Jt;
    symmetrize(sm.cov[t]);
  }
  return sm;
}

/// One joint draw of the state path s_1..s_T given all observations
/// (Carter-Kohn backward sampling). Returned as a d x T matrix.
inline Eigen::MatrixXd simulation_smoother(const FilterState& fs, const TransitionBlock& tb, Rng& rng) {
  const int T = fs.periods();
  const int d = tb.state_dim();
  Eigen::MatrixXd path(d, T);
  if (T == 0) return path;
  path.col(T - 1) = sample_mvn(fs.filtered_mean[static_cast<std::size_t>(T - 1)],
                               fs.filtered_cov[static_cast<std::size_t>(T - 1)], rng);
  for (int t = T - 2; t >= 0; --t) {
    const auto ut = static_cast<std::size_t>(t);
    const Eigen::MatrixXd& Pf = fs.filtered_cov[ut];
    const Eigen::MatrixXd CP = detail::companion_times(tb, Pf);  // C P_f = (P_f C')'
    const auto ldlt = detail::regularized_ldlt(fs.predicted_cov[ut + 1]);
    const Eigen::MatrixXd Jt = ldlt.solve(CP);
    const Eigen::VectorXd mean =
        fs.filtered_mean[ut] + Jt.transpose() * (path.col(t + 1) - fs.predicted_mean[ut + 1]);
    Eigen::MatrixXd cov = Pf - CP.transpose() * Jt;
    symmetrize(cov);
    path.col(t) = sample_mvn(mean, cov, rng);
  }
  return path;
}

}  // namespace regionow
