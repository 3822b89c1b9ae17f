#pragma once

// Test-only reference implementations. These deliberately avoid the library
// code paths they are used to check.

#include <regionow/datamodel.hpp>
#include <regionow/kalman.hpp>
#include <regionow/statespace.hpp>
#include <regionow/synth.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace regionow::testing {

/// CRPS straight from its definition, O(S^2). Long double sums keep the
/// S^2 accumulation well below the comparison tolerance.
inline double crps_pairwise(const std::vector<double>& x, double y) {
  const auto S = static_cast<long double>(x.size());
  long double a = 0.0L, b = 0.0L;
  for (double xi : x) a += std::abs(static_cast<long double>(xi) - y);
  for (double xi : x)
    for (double xj : x) b += std::abs(static_cast<long double>(xi) - xj);
  return static_cast<double>(a / S - b / (2.0L * S * S));
}

/// Annual measurement written out term by term:
/// sum_q lambda_q (1/4 f_t + 2/4 f_{t-1} + 3/4 f_{t-2} + f_{t-3} + 3/4 f_{t-4}
/// + 2/4 f_{t-5} + 1/4 f_{t-6}) + sum_k lambda_k z_kt.
/// `latent(q, j)` is factor q at lag j.
template <typename LatentFn>
double annual_direct_loop(const Eigen::VectorXd& lambda, int q_latent, LatentFn&& latent, const Eigen::VectorXd& z) {
  double y = 0.0;
  for (int q = 0; q < q_latent; ++q)
    y += lambda[q] * (0.25 * latent(q, 0) + 0.5 * latent(q, 1) + 0.75 * latent(q, 2) + 1.0 * latent(q, 3) +
                      0.75 * latent(q, 4) + 0.5 * latent(q, 5) + 0.25 * latent(q, 6));
  for (Eigen::Index k = 0; k < z.size(); ++k) y += lambda[q_latent + k] * z[k];
  return y;
}

/// Twelve-quarter toy model: one latent factor, no observed factor in the
/// state, N = 2 regions observed at each Q4, and the national row every
/// quarter. State dimension 7, so the whole path has 84 coordinates.
struct ToyModel {
  CountryPanel panel;
  Vintage vintage;
  StateLayout layout{1, 0, 7, 1e-10};
  TransitionBlock transition;
  Eigen::MatrixXd loadings;
  MeasurementVariances variances;

  StateSpaceModel model() const { return build_model(transition, loadings, variances, vintage, layout, 10.0); }
};

inline ToyModel make_toy_model() {
  ToyModel toy;
  CountryPanel& p = toy.panel;
  p.country_code = "TY";
  p.region_ids = {"TY1", "TY2"};
  p.timeline = {QuarterIndex(2001, 1), QuarterIndex(2003, 4)};
  p.national_quarterly_growth = {0.4, -0.2, 0.9, 0.3, -0.5, 0.1, 0.7, 1.1, -0.3, 0.2, 0.6, -0.8};
  p.annual_growth = {{{2001, 1.2}, {2002, 2.1}, {2003, 0.4}}, {{2001, 0.6}, {2002, 1.5}, {2003, -0.7}}};
  p.weights = Eigen::Vector2d(0.6, 0.4);
  toy.vintage = Vintage{&toy.panel, 2003, QuarterIndex(2003, 4), 2003};
  toy.transition.q = 1;
  toy.transition.lags = 7;
  toy.transition.coefficients = Eigen::MatrixXd::Zero(1, 7);
  toy.transition.coefficients(0, 0) = 0.5;
  toy.transition.coefficients(0, 1) = 0.2;
  toy.transition.shock_cov = Eigen::MatrixXd::Constant(1, 1, 1.0);
  toy.loadings = Eigen::MatrixXd(2, 1);
  toy.loadings << 1.0, 0.5;
  toy.variances.me = Eigen::Vector2d(0.2, 0.3);
  toy.variances.cs = 0.5;
  return toy;
}

inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

/// Monte Carlo comparison of FFBS draws with the dense oracle. The path is
/// reduced to its distinct coordinates: the current factor block of every
/// quarter plus the pre-sample lags carried by the first state.
struct FfbsCheck {
  double max_mean_z = 0.0;  // |sample mean - mean| / MC standard error
  double max_cov_z = 0.0;   // same for every covariance entry
  int coordinates = 0;
};

inline FfbsCheck ffbs_moment_check(const StateSpaceModel& model, int draws, std::uint64_t seed) {
  const int d = model.state_dim();
  const int T = model.periods();
  const int q = model.transition.q;
  // Coordinate map: state s_0 in full (lags 0..P-1), then the top block of s_t.
  std::vector<int> index;
  for (int k = d - 1; k >= 0; --k) index.push_back(k);  // oldest lag first
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < q; ++j) index.push_back(t * d + j);
  const int n = static_cast<int>(index.size());

  const auto oracle = dense_gaussian_oracle(model);
  Eigen::VectorXd mean(n);
  Eigen::MatrixXd cov(n, n);
  for (int a = 0; a < n; ++a) {
    mean[a] = oracle.mean[index[static_cast<std::size_t>(a)]];
    for (int b = 0; b < n; ++b) cov(a, b) = oracle.cov(index[static_cast<std::size_t>(a)], index[static_cast<std::size_t>(b)]);
  }

  const auto fs = kalman_filter(model);
  Rng rng(seed);
  Eigen::MatrixXd x(n, draws);
  for (int s = 0; s < draws; ++s) {
    const Eigen::MatrixXd path = simulation_smoother(fs, model.transition, rng);
    for (int a = 0; a < n; ++a) {
      const int k = index[static_cast<std::size_t>(a)];
      x(a, s) = path(k % d, k / d);
    }
  }
  const Eigen::VectorXd m = x.rowwise().mean();
  const Eigen::MatrixXd c = x.colwise() - m;
  const Eigen::MatrixXd sc = c * c.transpose() / (draws - 1.0);

  FfbsCheck out;
  out.coordinates = n;
  for (int a = 0; a < n; ++a) {
    out.max_mean_z = std::max(out.max_mean_z, std::abs(m[a] - mean[a]) / std::sqrt(cov(a, a) / draws));
    for (int b = 0; b <= a; ++b) {
      // Var of a Gaussian sample covariance: (s_aa s_bb + s_ab^2) / S.
      const double se = std::sqrt((cov(a, a) * cov(b, b) + cov(a, b) * cov(a, b)) / draws);
      out.max_cov_z = std::max(out.max_cov_z, std::abs(sc(a, b) - cov(a, b)) / se);
    }
  }
  return out;
}

}  // namespace regionow::testing
