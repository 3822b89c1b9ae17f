#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"

namespace regionow {

inline constexpr std::array<double, 5> kSummaryLevels{0.05, 0.16, 0.50, 0.84, 0.95};

/// Empirical quantile with linear interpolation between order statistics
/// (the R type-7 rule). `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double v = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  // Interpolation can overshoot the bracketing order statistics by an ulp.
  return std::clamp(v, sorted[lo], sorted[hi]);
}

inline std::array<double, 5> summary_quantiles(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::array<double, 5> q{};
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = quantile_sorted(samples, kSummaryLevels[k]);
  return q;
}

/// Sample-based predictive density of annual growth for one region-year.
struct PredictiveDensity {
  std::string region;
  int target_year = 0;
  std::vector<double> samples;
  std::array<double, 5> quantiles{};  // at kSummaryLevels

  static PredictiveDensity from_samples(std::string region, int year, std::vector<double> samples) {
    PredictiveDensity p{std::move(region), year, std::move(samples), {}};
    if (!p.samples.empty()) p.quantiles = summary_quantiles(p.samples);
    return p;
  }
};

}  // namespace regionow
