#pragma once

// Synthetic panels from the model's own data-generating process, and a dense
// joint-Gaussian oracle for checking the filter and smoother.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "errors.hpp"
#include "ingest.hpp"
#include "linalg.hpp"
#include "statespace.hpp"

namespace regionow {

struct DgpSpec {
  std::string country = "SY";
  int n_regions = 6;
  int q_latent = 3;
  int lags = 7;
  int periods = 84;  // quarters; multiple of 4
  int first_year = 2001;
  Eigen::MatrixXd loadings;          // N x (Q_f + 1); last column loads national growth
  Eigen::MatrixXd var_coefficients;  // Q_f x (Q_f * lags), reduced form [A_1 ... A_P]
  Eigen::MatrixXd shock_cov;         // Q_f x Q_f
  Eigen::VectorXd me_var;            // per region
  double cs_var = 0.09;
  Eigen::VectorXd weights;
  std::uint64_t seed = 1;
  int burn_in = 200;  // quarters simulated before the timeline starts

  TransitionBlock transition() const {
    return TransitionBlock{q_latent, lags, var_coefficients, shock_cov};
  }

  void validate() const {
    if (n_regions < 2 || q_latent < 1 || lags < kAnnualWindow) throw ConfigError("invalid DGP dimensions");
    if (periods <= 0 || periods % 4 != 0) throw ConfigError("DGP periods must be a positive multiple of 4");
    if (loadings.rows() != n_regions || loadings.cols() != q_latent + 1)
      throw DimensionError("DGP loadings must be N x (Q_f + 1)");
    if (var_coefficients.rows() != q_latent || var_coefficients.cols() != q_latent * lags)
      throw DimensionError("DGP VAR coefficients must be Q_f x (Q_f * P)");
    if (shock_cov.rows() != q_latent || shock_cov.cols() != q_latent) throw DimensionError("DGP shock covariance");
    if (me_var.size() != n_regions || weights.size() != n_regions) throw DimensionError("DGP per-region vectors");
    if (std::abs(weights.sum() - 1.0) > 1e-10 || (weights.array() < 0.0).any())
      throw ConfigError("DGP weights must be a probability vector");
    if (companion_spectral_radius(transition()) >= 0.95) throw ConfigError("DGP VAR is too persistent or explosive");
  }
};

struct SyntheticTruth {
  Eigen::MatrixXd latent;        // Q_f x (T + 6): six pre-sample quarters, then the timeline
  Eigen::RowVectorXd national;   // 1 x T, observed national growth
  Eigen::MatrixXd quarterly;     // N x T, loadings-weighted latent states
  Eigen::MatrixXd annual_noiseless;  // N x years; column k is year first_year + k (first column unused)
  DgpSpec dgp;

  static constexpr int kPresample = kAnnualWindow - 1;

  Eigen::VectorXd latent_at(int t) const { return latent.col(t + kPresample); }
};

struct SyntheticPanel {
  CountryPanel panel;
  SyntheticTruth truth;
};

/// Runs the factor VAR forward and builds the panel:
///   national_t = sum_i w_i lambda_i' f~_t + e_t,
///   annual_iy  = lambda_i' sum_l w_l f~_{t-l} + lambda_iz national_t + u_iy  at Q4 of y.
/// The first year carries no annual observation (no predecessor level).
inline SyntheticPanel simulate(const DgpSpec& dgp) {
  dgp.validate();
  Rng rng(dgp.seed);
  const int Qf = dgp.q_latent;
  const int P = dgp.lags;
  const int T = dgp.periods;
  const int N = dgp.n_regions;
  const int total = dgp.burn_in + T;

  Eigen::MatrixXd shock_factor = Eigen::MatrixXd::Zero(Qf, Qf);
  if (dgp.shock_cov.squaredNorm() > 0.0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(dgp.shock_cov);
    shock_factor = ldlt.transpositionsP().transpose() * Eigen::MatrixXd(ldlt.matrixL()) *
                   ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(Qf, total);
  for (int t = 0; t < total; ++t) {
    Eigen::VectorXd ft = shock_factor * standard_normal(rng, Qf);
    for (int p = 1; p <= P && t - p >= 0; ++p)
      ft += dgp.var_coefficients.middleCols((p - 1) * Qf, Qf) * f.col(t - p);
    f.col(t) = ft;
  }

  SyntheticPanel out;
  SyntheticTruth& truth = out.truth;
  truth.dgp = dgp;
  const int pre = SyntheticTruth::kPresample;
  truth.latent = f.middleCols(dgp.burn_in - pre, T + pre);

  const Eigen::MatrixXd lat_load = dgp.loadings.leftCols(Qf);
  const Eigen::VectorXd z_load = dgp.loadings.col(Qf);
  const Eigen::RowVectorXd cs_load = dgp.weights.transpose() * lat_load;
  const double cs_sd = std::sqrt(dgp.cs_var);
  truth.national.resize(T);
  for (int t = 0; t < T; ++t) truth.national[t] = cs_load.dot(truth.latent_at(t)) + cs_sd * standard_normal(rng, 1)[0];
  truth.quarterly = quarterly_regional_series(truth.latent.rightCols(T), dgp.loadings);

  CountryPanel& panel = out.panel;
  panel.country_code = dgp.country;
  for (int i = 0; i < N; ++i) panel.region_ids.push_back(dgp.country + std::to_string(i + 1));
  panel.weights = dgp.weights;
  panel.timeline = {QuarterIndex(dgp.first_year, 1), QuarterIndex(dgp.first_year, 1) + (T - 1)};
  panel.national_quarterly_growth.assign(truth.national.data(), truth.national.data() + T);
  panel.annual_growth.resize(static_cast<std::size_t>(N));

  const int years = T / 4;
  const auto w = triangular_weights();
  truth.annual_noiseless = Eigen::MatrixXd::Zero(N, years);
  for (int k = 1; k < years; ++k) {
    const int t = 4 * k + 3;  // Q4 of year first_year + k
    Eigen::VectorXd agg = Eigen::VectorXd::Zero(Qf);
    for (int l = 0; l < kAnnualWindow; ++l) agg += w[static_cast<std::size_t>(l)] * truth.latent_at(t - l);
    for (int i = 0; i < N; ++i) {
      const double clean = lat_load.row(i).dot(agg) + z_load[i] * truth.national[t];
      truth.annual_noiseless(i, k) = clean;
      const double noisy = clean + std::sqrt(dgp.me_var[i]) * standard_normal(rng, 1)[0];
      panel.annual_growth[static_cast<std::size_t>(i)][dgp.first_year + k] = noisy;
    }
  }
  panel.validate();
  return out;
}

/// Scenario S1: N = 6, Q_f = 3, one observed factor, P = 7, 84 quarters
/// (2001-2021, 20 annual growth observations per region). Loadings are a
/// fixed standard-Gaussian draw; the latent VAR is diagonal with lag-1
/// coefficient 0.6 and unit shock variances; sigma_ME = 0.1, sigma_CS = 0.3.
inline DgpSpec scenario_s1(std::uint64_t seed = 2016) {
  DgpSpec s;
  s.country = "S1";
  s.n_regions = 6;
  s.q_latent = 3;
  s.lags = 7;
  s.periods = 84;
  s.first_year = 2001;
  Rng load_rng(20240101);
  s.loadings = Eigen::MatrixXd(6, 4);
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 6; ++i) s.loadings(i, j) = standard_normal(load_rng, 1)[0];
  s.var_coefficients = Eigen::MatrixXd::Zero(3, 3 * 7);
  s.var_coefficients.leftCols(3) = 0.6 * Eigen::MatrixXd::Identity(3, 3);
  s.shock_cov = Eigen::MatrixXd::Identity(3, 3);
  s.me_var = Eigen::VectorXd::Constant(6, 0.01);
  s.cs_var = 0.09;
  s.weights = Eigen::VectorXd(6);
  s.weights << 0.30, 0.20, 0.15, 0.15, 0.10, 0.10;
  s.seed = seed;
  return s;
}

/// Level tables whose growth transformations reproduce `panel`. Annual levels
/// start at 1000 * w_i in the first year; national levels start at 100 in the
/// quarter before the timeline. Annual series must be gap-free after their
/// first observation.
inline std::pair<RawAnnualTable, RawQuarterlyTable> panel_to_tables(const CountryPanel& panel) {
  RawAnnualTable annual;
  const int y0 = panel.first_year();
  for (int i = 0; i < panel.n_regions(); ++i) {
    const auto& g = panel.annual_growth[static_cast<std::size_t>(i)];
    const int first = g.empty() ? y0 + 1 : g.begin()->first;
    double level = 1000.0 * std::max(panel.weights[i], 1e-6);
    annual.rows.push_back({panel.country_code, panel.region_ids[static_cast<std::size_t>(i)], first - 1, level});
    for (const auto& [year, growth] : g) {
      if (year != annual.rows.back().year + 1) throw ConfigError("annual growth has gaps; cannot rebuild levels");
      level *= std::exp(growth / 100.0);
      annual.rows.push_back({panel.country_code, panel.region_ids[static_cast<std::size_t>(i)], year, level});
    }
  }
  RawQuarterlyTable quarterly;
  QuarterIndex q = panel.timeline.first - 1;
  double level = 100.0;
  quarterly.rows.push_back({panel.country_code, q.year(), q.quarter(), level});
  for (double g : panel.national_quarterly_growth) {
    ++q;
    level *= std::exp(g / 100.0);
    quarterly.rows.push_back({panel.country_code, q.year(), q.quarter(), level});
  }
  return {annual, quarterly};
}

// ---------------------------------------------------------------------------
// Dense oracle

struct GaussianPathMoments {
  Eigen::VectorXd mean;  // stacked (s_1, ..., s_T)
  Eigen::MatrixXd cov;
  int state_dim = 0;

  Eigen::VectorXd mean_at(int t) const { return mean.segment(t * state_dim, state_dim); }
  Eigen::MatrixXd cov_at(int t) const { return cov.block(t * state_dim, t * state_dim, state_dim, state_dim); }
};

inline constexpr int kOracleMaxDim = 200;

/// Exact conditional moments of the whole state path given the observations
/// of periods 0..`last_observed` (all periods when negative), by building the
/// joint Gaussian of states and observations explicitly.
inline GaussianPathMoments dense_gaussian_oracle(const StateSpaceModel& model, int last_observed = -1) {
  const int d = model.state_dim();
  const int T = model.periods();
  const int D = d * T;
  if (D > kOracleMaxDim) throw ConfigError("dense oracle limited to " + std::to_string(kOracleMaxDim) + " states");
  if (last_observed < 0) last_observed = T - 1;

  const Eigen::MatrixXd C = model.transition.companion();
  const Eigen::MatrixXd W = model.transition.state_noise();

  // Prior moments: mu_t = C^t mu_1, Var(s_t) = C Var(s_{t-1}) C' + W,
  // Cov(s_s, s_t) = C^{s-t} Var(s_t) for s >= t.
  Eigen::VectorXd mu(D);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(D, D);
  std::vector<Eigen::MatrixXd> var(static_cast<std::size_t>(T));
  mu.segment(0, d) = model.initial_mean;
  var[0] = model.initial_cov;
  for (int t = 1; t < T; ++t) {
    mu.segment(t * d, d) = C * mu.segment((t - 1) * d, d);
    var[static_cast<std::size_t>(t)] = C * var[static_cast<std::size_t>(t - 1)] * C.transpose() + W;
  }
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd block = var[static_cast<std::size_t>(t)];
    for (int s = t; s < T; ++s) {
      S.block(s * d, t * d, d, d) = block;
      S.block(t * d, s * d, d, d) = block.transpose();
      block = C * block;
    }
  }

  int rows = 0;
  for (int t = 0; t <= last_observed; ++t) rows += static_cast<int>(model.measurements[static_cast<std::size_t>(t)].rows());
  GaussianPathMoments out;
  out.state_dim = d;
  if (rows == 0) {
    out.mean = mu;
    out.cov = S;
    return out;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, D);
  Eigen::VectorXd y(rows), r(rows);
  int k = 0;
  for (int t = 0; t <= last_observed; ++t) {
    const auto& mb = model.measurements[static_cast<std::size_t>(t)];
    const auto m = static_cast<int>(mb.rows());
    H.block(k, t * d, m, d) = mb.design;
    y.segment(k, m) = mb.y;
    r.segment(k, m) = mb.noise_var;
    k += m;
  }
  Eigen::MatrixXd G = H * S * H.transpose();
  G.diagonal() += r;
  const Eigen::MatrixXd SHt = S * H.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  out.mean = mu + SHt * ldlt.solve(y - H * mu);
  out.cov = S - SHt * ldlt.solve(SHt.transpose());
  symmetrize(out.cov);
  return out;
}

}  // namespace regionow
