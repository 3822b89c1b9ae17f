#pragma once

// Gibbs sampler for the mixed-frequency factor model.
//
// Each sweep: (1) assemble the state space from the current parameters,
// (2) filter and simulation-smooth the factor path, (3) draw loadings row by
// row, (4) draw the structural VAR equation by equation with a stationarity
// rejection step, (5) draw shock and measurement variances, (6) update the
// three horseshoe blocks.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "datamodel.hpp"
#include "errors.hpp"
#include "kalman.hpp"
#include "linalg.hpp"
#include "priors.hpp"
#include "statespace.hpp"

namespace regionow {

/// Current-quarter factors plus the P-1 pre-sample lags carried by the first
/// state. Column c holds quarter offset c - (P - 1) of the vintage timeline.
struct FactorPath {
  Eigen::MatrixXd values;  // Q x (T + P - 1)
  int lags = 7;

  int periods() const noexcept { return static_cast<int>(values.cols()) - (lags - 1); }

  Eigen::VectorXd factor(int t) const { return values.col(t + lags - 1); }

  /// Companion state s_t = (f_t, ..., f_{t-P+1}) for 0 <= t < T.
  Eigen::VectorXd state(int t) const {
    const auto q = values.rows();
    Eigen::VectorXd s(q * lags);
    for (int l = 0; l < lags; ++l) s.segment(l * q, q) = values.col(t + lags - 1 - l);
    return s;
  }

  /// Current-quarter factors over the timeline (Q x T).
  Eigen::MatrixXd current() const { return values.rightCols(periods()); }

  static FactorPath from_states(const Eigen::MatrixXd& states, int q, int lags) {
    FactorPath fp;
    fp.lags = lags;
    const auto T = states.cols();
    fp.values.resize(q, T + lags - 1);
    for (int l = 1; l < lags; ++l) fp.values.col(lags - 1 - l) = states.col(0).segment(l * q, q);
    for (Eigen::Index t = 0; t < T; ++t) fp.values.col(t + lags - 1) = states.col(t).head(q);
    return fp;
  }
};

struct HorseshoeState {
  HorseshoeBlock var;              // VAR lag coefficients and free B0 elements
  HorseshoeBlock latent_loadings;  // N x Q_f, column-major
  HorseshoeBlock observed_loadings;

  bool positive() const { return var.positive() && latent_loadings.positive() && observed_loadings.positive(); }
};

struct PosteriorDraw {
  FactorPath factors;
  Eigen::MatrixXd loadings;  // N x Q
  Eigen::MatrixXd b0;        // Q x Q unit lower triangular
  Eigen::MatrixXd b_lags;    // Q x (Q*P)
  Eigen::VectorXd h;         // structural shock variances
  Eigen::VectorXd me_var;    // per region
  double cs_var = 0.0;
  HorseshoeState shrinkage;
  double spectral_radius = 0.0;
  double log_likelihood = 0.0;
};

struct SweepDiagnostics {
  int sweep = 0;
  double log_likelihood = 0.0;
  double spectral_radius = 0.0;
  int rejection_exhaustions = 0;
  double global_var = 0.0;
  double global_latent = 0.0;
  double global_observed = 0.0;
};

struct ChainResult {
  std::vector<PosteriorDraw> draws;
  std::vector<SweepDiagnostics> diagnostics;
  int rejection_exhaustions = 0;
  QuarterRange timeline;
};

// ---------------------------------------------------------------------------
// Loadings

/// Regression data for loadings row i: annual rows (Q regressors) and the
/// cross-sectional partial residuals (first Q_f regressors only).
struct LoadingsRowData {
  Eigen::MatrixXd annual_x;
  Eigen::VectorXd annual_y;
  Eigen::MatrixXd cs_x;  // T x Q_f, empty when the row ignores the national restriction
  Eigen::VectorXd cs_y;
  double cs_var = 1.0;
};

inline LoadingsRowData loadings_row_data(int i, const FactorPath& fp, const Eigen::MatrixXd& loadings,
                                         const Vintage& vintage, const StateLayout& layout, double cs_var) {
  const auto tl = vintage.timeline();
  const CountryPanel& panel = vintage.panel();
  LoadingsRowData d;
  std::vector<int> obs_t;
  for (QuarterIndex t = tl.first; t <= tl.last; ++t)
    if (t.quarter() == 4 && vintage.annual(i, t.year())) obs_t.push_back(static_cast<int>(tl.offset(t)));
  d.annual_x.resize(static_cast<Eigen::Index>(obs_t.size()), layout.q_total());
  d.annual_y.resize(static_cast<Eigen::Index>(obs_t.size()));
  for (std::size_t k = 0; k < obs_t.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    d.annual_x.row(r) = annual_regressors(fp.state(obs_t[k]), layout).transpose();
    d.annual_y[r] = *vintage.annual(i, tl.at(obs_t[k]).year());
  }

  const auto T = static_cast<Eigen::Index>(tl.size());
  const double wi = panel.weights[i];
  d.cs_var = cs_var;
  if (wi > 0.0) {
    const Eigen::MatrixXd latent = fp.current().topRows(layout.q_latent);  // Q_f x T
    Eigen::RowVectorXd others = panel.weights.transpose() * loadings.leftCols(layout.q_latent);
    others -= wi * loadings.row(i).head(layout.q_latent);
    d.cs_x = wi * latent.transpose();
    d.cs_y.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) d.cs_y[t] = panel.national(tl.at(t)) - others.dot(latent.col(t));
  }
  return d;
}

/// Conditional posterior draw of one loadings row. With no observations the
/// draw comes from the prior.
inline Eigen::VectorXd draw_loadings_row(const LoadingsRowData& data, double me_var, const Eigen::VectorXd& prior_var,
                                         Rng& rng) {
  const Eigen::Index Q = prior_var.size();
  if (data.annual_x.rows() > 0 && data.annual_x.cols() != Q) throw DimensionError("loadings regressors mismatch");
  RegressionStats stats(Q);
  stats.add(data.annual_x, data.annual_y, me_var);
  if (data.cs_x.rows() > 0) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(data.cs_x.rows(), Q);
    x.leftCols(data.cs_x.cols()) = data.cs_x;
    stats.add(x, data.cs_y, data.cs_var);
  }
  return stats.draw(prior_var, rng);
}

// ---------------------------------------------------------------------------
// Structural VAR

/// Draw equation q of B0 f_t = B_1 f_{t-1} + ... + eta_t, written as
///   f_qt = c' f_{1..q-1,t} + b' s_{t-1} + eta_qt,   eta_qt ~ N(0, h_q).
/// `current` is Q x n (f_t), `lagged` is (Q*P) x n (s_{t-1}). Returns (c, b);
/// the B0 row holds -c.
inline Eigen::VectorXd draw_var_equation(int q, const Eigen::MatrixXd& current, const Eigen::MatrixXd& lagged,
                                         const Eigen::VectorXd& prior_var, double h_q, Rng& rng) {
  const auto n = current.cols();
  const auto d = lagged.rows();
  if (lagged.cols() != n || prior_var.size() != q + d) throw DimensionError("VAR equation shapes mismatch");
  Eigen::MatrixXd x(n, q + d);
  x.leftCols(q) = current.topRows(q).transpose();
  x.rightCols(d) = lagged.transpose();
  RegressionStats stats(q + d);
  stats.add(x, current.row(q).transpose(), h_q);
  return stats.draw(prior_var, rng);
}

struct VarCoefficients {
  Eigen::MatrixXd b0;
  Eigen::MatrixXd b_lags;
};

inline double var_spectral_radius(const VarCoefficients& v) {
  const auto q = v.b0.rows();
  const Eigen::MatrixXd a = v.b0.triangularView<Eigen::UnitLower>().solve(v.b_lags);
  TransitionBlock tb;
  tb.q = static_cast<int>(q);
  tb.lags = static_cast<int>(v.b_lags.cols() / q);
  tb.coefficients = a;
  return companion_spectral_radius(tb);
}

struct StationarityOutcome {
  VarCoefficients accepted;
  double radius = 0.0;
  int attempts = 0;
  bool exhausted = false;
};

/// Rejection step: calls `redraw` until the companion spectral radius is
/// below one, up to `max_retries` times; on exhaustion keeps `previous`.
template <std::invocable F>
StationarityOutcome enforce_stationarity(F&& redraw, const VarCoefficients& previous, int max_retries) {
  StationarityOutcome out;
  for (int k = 0; k < max_retries; ++k) {
    VarCoefficients cand = redraw();
    ++out.attempts;
    const double r = var_spectral_radius(cand);
    if (r < 1.0) {
      out.accepted = std::move(cand);
      out.radius = r;
      return out;
    }
  }
  out.accepted = previous;
  out.radius = var_spectral_radius(previous);
  out.exhausted = true;
  return out;
}

// ---------------------------------------------------------------------------
// Full sampler

namespace detail {

inline Eigen::VectorXd var_coefficient_vector(const VarCoefficients& v) {
  const auto Q = v.b0.rows();
  const auto free_b0 = Q * (Q - 1) / 2;
  Eigen::VectorXd out(free_b0 + v.b_lags.size());
  Eigen::Index k = 0;
  for (Eigen::Index q = 0; q < Q; ++q) {
    for (Eigen::Index j = 0; j < q; ++j) out[k++] = v.b0(q, j);
    for (Eigen::Index j = 0; j < v.b_lags.cols(); ++j) out[k++] = v.b_lags(q, j);
  }
  return out;
}

/// Offset of equation q's coefficients inside var_coefficient_vector.
inline Eigen::Index var_equation_offset(Eigen::Index q, Eigen::Index lag_cols) {
  return q * (q - 1) / 2 + q * lag_cols;
}

template <typename Fn>
auto run_step(int sweep, const char* step, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw NumericError("sweep " + std::to_string(sweep) + ", step '" + step + "': " + e.what());
  }
}

}  // namespace detail

struct GibbsOptions {
  bool keep_diagnostics = true;
};

inline ChainResult gibbs_run(const Vintage& vintage, const ModelConfig& config, Rng& rng,
                             const GibbsOptions& options = {}) {
  const CountryPanel& panel = vintage.panel();
  panel.validate();
  config.validate(panel.n_regions());
  if (config.q_observed != panel.n_observed_factors())
    throw ConfigError("q_observed = " + std::to_string(config.q_observed) + " but panel carries " +
                      std::to_string(panel.n_observed_factors()) + " observed series");

  const StateLayout layout = StateLayout::from(config);
  const int N = panel.n_regions();
  const int Qf = config.q_latent;
  const int Qz = config.q_observed;
  const int Q = layout.q_total();
  const int d = layout.state_dim();
  const auto tl = vintage.timeline();
  const int T = static_cast<int>(tl.size());
  if (T < 2) throw ConfigError("vintage timeline too short");

  ChainResult result;
  result.timeline = tl;

  // Initial values.
  std::normal_distribution<double> nd(0.0, config.initial_loading_sd);
  Eigen::MatrixXd loadings(N, Q);
  for (Eigen::Index j = 0; j < loadings.cols(); ++j)
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) loadings(i, j) = nd(rng);
  VarCoefficients var{Eigen::MatrixXd::Identity(Q, Q), Eigen::MatrixXd::Zero(Q, d)};
  auto prior_mean = [](const InvGammaPrior& p) { return p.scale / (p.shape - 1.0); };
  Eigen::VectorXd h = Eigen::VectorXd::Constant(Q, prior_mean(config.shock_prior));
  Eigen::VectorXd me_var = Eigen::VectorXd::Constant(N, prior_mean(config.me_prior));
  double cs_var = prior_mean(config.cs_prior);
  HorseshoeState hs{HorseshoeBlock::ones(Q * (Q - 1) / 2 + Q * d), HorseshoeBlock::ones(N * Qf),
                    HorseshoeBlock::ones(N * Qz)};

  const int total = config.n_burn + config.n_draws;
  result.draws.reserve(static_cast<std::size_t>(config.n_draws));
  for (int sweep = 0; sweep < total; ++sweep) {
    // (1)-(2) state space, filter, simulation smoother
    const TransitionBlock tb = detail::run_step(sweep, "transition", [&] { return build_transition(var.b0, var.b_lags, h); });
    const MeasurementVariances mv{me_var, cs_var};
    const FilterState fs = detail::run_step(sweep, "filter", [&] {
      return kalman_filter(build_model(tb, loadings, mv, vintage, layout, config.initial_state_variance));
    });
    const Eigen::MatrixXd states =
        detail::run_step(sweep, "smoother", [&] { return simulation_smoother(fs, tb, rng); });
    FactorPath fp = FactorPath::from_states(states, Q, config.lags);

    // (3) loadings
    detail::run_step(sweep, "loadings", [&] {
      const Eigen::VectorXd lat_pv = hs.latent_loadings.prior_variance();
      const Eigen::VectorXd obs_pv = hs.observed_loadings.prior_variance();
      for (int i = 0; i < N; ++i) {
        Eigen::VectorXd pv(Q);
        for (int q = 0; q < Qf; ++q) pv[q] = lat_pv[q * N + i];
        for (int k = 0; k < Qz; ++k) pv[Qf + k] = obs_pv[k * N + i];
        const auto data = loadings_row_data(i, fp, loadings, vintage, layout, cs_var);
        loadings.row(i) = draw_loadings_row(data, me_var[i], pv, rng).transpose();
      }
      return 0;
    });

    // (4) structural VAR with stationarity rejection
    Eigen::MatrixXd current(Q, T - 1), lagged(d, T - 1);
    for (int t = 1; t < T; ++t) {
      current.col(t - 1) = fp.factor(t);
      lagged.col(t - 1) = states.col(t - 1);
    }
    const Eigen::VectorXd var_pv = hs.var.prior_variance();
    const auto outcome = detail::run_step(sweep, "var", [&] {
      auto redraw = [&] {
        VarCoefficients cand{Eigen::MatrixXd::Identity(Q, Q), Eigen::MatrixXd::Zero(Q, d)};
        for (int q = 0; q < Q; ++q) {
          const auto off = detail::var_equation_offset(q, d);
          const Eigen::VectorXd beta = draw_var_equation(q, current, lagged, var_pv.segment(off, q + d), h[q], rng);
          for (int j = 0; j < q; ++j) cand.b0(q, j) = -beta[j];
          cand.b_lags.row(q) = beta.tail(d).transpose();
        }
        return cand;
      };
      return enforce_stationarity(redraw, var, config.max_stationarity_retries);
    });
    var = outcome.accepted;
    if (outcome.exhausted) ++result.rejection_exhaustions;

    // (5) variances
    detail::run_step(sweep, "variances", [&] {
      const Eigen::MatrixXd resid = var.b0 * current - var.b_lags * lagged;  // eta_t
      for (int q = 0; q < Q; ++q) h[q] = draw_variance(resid.row(q).transpose(), config.shock_prior, rng);
      for (int i = 0; i < N; ++i) {
        const auto data = loadings_row_data(i, fp, loadings, vintage, layout, cs_var);
        const Eigen::VectorXd r = data.annual_y - data.annual_x * loadings.row(i).transpose();
        me_var[i] = draw_variance(r, config.me_prior, rng);
      }
      const Eigen::RowVectorXd cs_load = panel.weights.transpose() * loadings.leftCols(Qf);
      Eigen::VectorXd r(T);
      for (int t = 0; t < T; ++t) r[t] = panel.national(tl.at(t)) - cs_load.dot(fp.factor(t).head(Qf));
      cs_var = draw_variance(r, config.cs_prior, rng);
      return 0;
    });

    // (6) horseshoe scales
    detail::run_step(sweep, "horseshoe", [&] {
      hs.var = draw_horseshoe_scales(detail::var_coefficient_vector(var), hs.var, rng);
      const Eigen::MatrixXd lat = loadings.leftCols(Qf);
      const Eigen::MatrixXd obs = loadings.rightCols(Qz);
      hs.latent_loadings =
          draw_horseshoe_scales(Eigen::Map<const Eigen::VectorXd>(lat.data(), lat.size()), hs.latent_loadings, rng);
      hs.observed_loadings =
          draw_horseshoe_scales(Eigen::Map<const Eigen::VectorXd>(obs.data(), obs.size()), hs.observed_loadings, rng);
      return 0;
    });

    if (options.keep_diagnostics)
      result.diagnostics.push_back({sweep, fs.log_likelihood, outcome.radius, result.rejection_exhaustions,
                                    hs.var.global, hs.latent_loadings.global, hs.observed_loadings.global});

    if (sweep >= config.n_burn) {
      PosteriorDraw pd;
      pd.factors = std::move(fp);
      pd.loadings = loadings;
      pd.b0 = var.b0;
      pd.b_lags = var.b_lags;
      pd.h = h;
      pd.me_var = me_var;
      pd.cs_var = cs_var;
      pd.shrinkage = hs;
      pd.spectral_radius = outcome.radius;
      pd.log_likelihood = fs.log_likelihood;
      result.draws.push_back(std::move(pd));
    }
  }
  return result;
}

}  // namespace regionow
