#pragma once

// Mixed-frequency state-space assembly.
//
// The state at quarter t stacks the factor vector and its lags,
//   s_t = (f_t, f_{t-1}, ..., f_{t-P+1}),   f_t = (latent f~_t, observed z_t),
// so annual regional rows can reach seven quarters of latent factors through
// the triangular weights and observed factors stay pinned to their data.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "errors.hpp"
#include "quarter.hpp"

namespace regionow {

inline constexpr int kAnnualWindow = 7;

/// Weights mapping quarterly log growth at lags 0..6 to year-on-year log growth.
inline constexpr std::array<double, kAnnualWindow> triangular_weights() noexcept {
  return {0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25};
}

/// Dimensions shared by the transition and measurement builders.
struct StateLayout {
  int q_latent = 1;
  int q_observed = 1;
  int lags = 7;
  double pin_variance = 1e-10;

  static StateLayout from(const ModelConfig& c) { return {c.q_latent, c.q_observed, c.lags, c.pin_variance}; }

  int q_total() const noexcept { return q_latent + q_observed; }
  int state_dim() const noexcept { return q_total() * lags; }
};

/// Reduced-form VAR in companion form. Only the top Q rows of the companion
/// matrix are stored; the rest is the fixed shift structure.
struct TransitionBlock {
  int q = 1;
  int lags = 7;
  Eigen::MatrixXd coefficients;  // Q x (Q*P): [A_1 ... A_P]
  Eigen::MatrixXd shock_cov;     // Q x Q reduced-form covariance

  int state_dim() const noexcept { return q * lags; }

  Eigen::MatrixXd companion() const {
    const int d = state_dim();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    c.topRows(q) = coefficients;
    if (d > q) c.bottomLeftCorner(d - q, d - q).setIdentity();
    return c;
  }

  /// Full d x d state noise covariance (nonzero only in the top-left block).
  Eigen::MatrixXd state_noise() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(state_dim(), state_dim());
    s.topLeftCorner(q, q) = shock_cov;
    return s;
  }
};

inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectral radius needs a square matrix");
  if (m.size() == 0) return 0.0;
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double companion_spectral_radius(const TransitionBlock& tb) { return spectral_radius(tb.companion()); }

/// Builds the reduced form from the structural VAR
///   B0 f_t = B_1 f_{t-1} + ... + B_P f_{t-P} + eta_t,  eta_t ~ N(0, diag(h)),
/// giving A_p = B0^{-1} B_p and Sigma = B0^{-1} H B0^{-T}.
/// `lag_coefficients` is Q x (Q*P) holding [B_1 ... B_P].
inline TransitionBlock build_transition(const Eigen::MatrixXd& b0, const Eigen::MatrixXd& lag_coefficients,
                                        const Eigen::VectorXd& h) {
  const auto q = b0.rows();
  if (b0.cols() != q || h.size() != q || lag_coefficients.rows() != q || q == 0 || lag_coefficients.cols() % q != 0)
    throw DimensionError("inconsistent structural VAR dimensions");
  if (!b0.allFinite() || !lag_coefficients.allFinite() || !h.allFinite())
    throw NumericError("non-finite structural VAR input");
  for (Eigen::Index i = 0; i < q; ++i) {
    if (b0(i, i) != 1.0) throw ConfigError("B0 must have a unit diagonal");
    for (Eigen::Index j = i + 1; j < q; ++j)
      if (b0(i, j) != 0.0) throw ConfigError("B0 must be lower triangular");
    if (!(h[i] > 0.0)) throw ConfigError("structural shock variances must be positive");
  }
  const Eigen::MatrixXd b0inv =
      b0.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(q, q));
  TransitionBlock tb;
  tb.q = static_cast<int>(q);
  tb.lags = static_cast<int>(lag_coefficients.cols() / q);
  tb.coefficients = b0inv * lag_coefficients;
  tb.shock_cov = b0inv * h.asDiagonal() * b0inv.transpose();
  tb.shock_cov = 0.5 * (tb.shock_cov + tb.shock_cov.transpose()).eval();
  return tb;
}

/// Observations, design, and noise for one quarter.
struct MeasurementBlock {
  QuarterIndex t;
  Eigen::VectorXd y;
  Eigen::MatrixXd design;      // rows x state_dim
  Eigen::VectorXd noise_var;   // diagonal
  std::vector<int> annual_regions;  // region index of each leading annual row

  Eigen::Index rows() const noexcept { return y.size(); }
};

struct MeasurementVariances {
  Eigen::VectorXd me;  // per region
  double cs = 1.0;
};

/// Annual design row for a region with loadings `lambda`.
inline Eigen::RowVectorXd annual_design_row(const Eigen::RowVectorXd& lambda, const StateLayout& layout) {
  const auto w = triangular_weights();
  const int Q = layout.q_total();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(layout.state_dim());
  for (int l = 0; l < kAnnualWindow; ++l)
    for (int q = 0; q < layout.q_latent; ++q) row[l * Q + q] = lambda[q] * w[static_cast<std::size_t>(l)];
  for (int k = 0; k < layout.q_observed; ++k) row[layout.q_latent + k] = lambda[layout.q_latent + k];
  return row;
}

/// Triangular-weighted latent factors followed by current observed factors:
/// the regressors of an annual row, evaluated at one state vector.
inline Eigen::VectorXd annual_regressors(const Eigen::VectorXd& state, const StateLayout& layout) {
  const auto w = triangular_weights();
  const int Q = layout.q_total();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(Q);
  for (int l = 0; l < kAnnualWindow; ++l)
    x.head(layout.q_latent) += w[static_cast<std::size_t>(l)] * state.segment(l * Q, layout.q_latent);
  x.tail(layout.q_observed) = state.segment(layout.q_latent, layout.q_observed);
  return x;
}

/// Measurement rows at quarter `t`: annual regional rows (Q4 of visible
/// years only), the cross-sectional national row, and observed-factor pins.
inline MeasurementBlock build_measurement(const QuarterIndex& t, const Eigen::MatrixXd& loadings,
                                          const MeasurementVariances& var, const Vintage& vintage,
                                          const StateLayout& layout) {
  const CountryPanel& panel = vintage.panel();
  const int N = panel.n_regions();
  const int Q = layout.q_total();
  if (loadings.rows() != N || loadings.cols() != Q)
    throw DimensionError("loadings must be " + std::to_string(N) + "x" + std::to_string(Q) + ", got " +
                         std::to_string(loadings.rows()) + "x" + std::to_string(loadings.cols()));
  if (var.me.size() != N) throw DimensionError("one measurement variance per region required");
  if (layout.lags < kAnnualWindow) throw ConfigError("lag order must be >= 7");
  if (!vintage.timeline().contains(t)) throw RangeError("quarter " + t.str() + " outside vintage timeline");

  MeasurementBlock mb;
  mb.t = t;
  if (t.quarter() == 4)
    for (int i = 0; i < N; ++i)
      if (vintage.annual(i, t.year())) mb.annual_regions.push_back(i);

  const auto n_annual = static_cast<Eigen::Index>(mb.annual_regions.size());
  const Eigen::Index rows = n_annual + 1 + layout.q_observed;
  const int d = layout.state_dim();
  mb.y.resize(rows);
  mb.design = Eigen::MatrixXd::Zero(rows, d);
  mb.noise_var.resize(rows);

  for (Eigen::Index r = 0; r < n_annual; ++r) {
    const int i = mb.annual_regions[static_cast<std::size_t>(r)];
    mb.y[r] = *vintage.annual(i, t.year());
    mb.design.row(r) = annual_design_row(loadings.row(i), layout);
    mb.noise_var[r] = var.me[i];
  }

  const Eigen::Index cs = n_annual;
  mb.y[cs] = panel.national(t);
  mb.design.row(cs).head(layout.q_latent) = panel.weights.transpose() * loadings.leftCols(layout.q_latent);
  mb.noise_var[cs] = var.cs;

  for (int k = 0; k < layout.q_observed; ++k) {
    const Eigen::Index r = cs + 1 + k;
    mb.y[r] = panel.observed_factor(k, t);
    mb.design(r, layout.q_latent + k) = 1.0;
    mb.noise_var[r] = layout.pin_variance;
  }
  return mb;
}

/// Complete linear-Gaussian model over a vintage timeline. The prior applies
/// to the state in the first quarter.
struct StateSpaceModel {
  TransitionBlock transition;
  std::vector<MeasurementBlock> measurements;
  Eigen::VectorXd initial_mean;
  Eigen::MatrixXd initial_cov;

  int state_dim() const noexcept { return transition.state_dim(); }
  int periods() const noexcept { return static_cast<int>(measurements.size()); }
};

inline StateSpaceModel build_model(const TransitionBlock& transition, const Eigen::MatrixXd& loadings,
                                   const MeasurementVariances& var, const Vintage& vintage, const StateLayout& layout,
                                   double initial_state_variance) {
  if (transition.state_dim() != layout.state_dim()) throw DimensionError("transition does not match layout");
  StateSpaceModel m;
  m.transition = transition;
  const auto tl = vintage.timeline();
  m.measurements.reserve(static_cast<std::size_t>(tl.size()));
  for (QuarterIndex t = tl.first; t <= tl.last; ++t)
    m.measurements.push_back(build_measurement(t, loadings, var, vintage, layout));
  m.initial_mean = Eigen::VectorXd::Zero(layout.state_dim());
  m.initial_cov = initial_state_variance * Eigen::MatrixXd::Identity(layout.state_dim(), layout.state_dim());
  return m;
}

/// Quarterly regional growth as loadings-weighted latent states:
///   y_it = sum_q lambda_iq f~_qt.
/// Observed factors are left out, so one latent factor gives series that are
/// scaled copies of each other. `latent` is Q_f x T; `loadings` has at least
/// Q_f columns (any observed-factor columns are ignored); result is N x T.
inline Eigen::MatrixXd quarterly_regional_series(const Eigen::MatrixXd& latent, const Eigen::MatrixXd& loadings) {
  if (loadings.cols() < latent.rows()) throw DimensionError("factor paths and loadings disagree");
  return loadings.leftCols(latent.rows()) * latent;
}

}  // namespace regionow
