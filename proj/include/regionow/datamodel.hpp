#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quarter.hpp"

namespace regionow {

/// An additional quarterly observed factor beyond national GVA growth
/// (interest rates, unemployment, ...). Aligned with the panel timeline.
struct ObservedSeries {
  std::string name;
  std::vector<double> values;
};

/// Annual regional and quarterly national growth for one country.
///
/// Growth rates are log-differences in percent. Annual growth for year y is
/// anchored at Q4 of y. Missing annual values are simply absent from the map.
struct CountryPanel {
  std::string country_code;
  std::vector<std::string> region_ids;
  /// Indexed by region position; year -> year-on-year growth.
  std::vector<std::map<int, double>> annual_growth;
  /// One value per quarter of `timeline`.
  std::vector<double> national_quarterly_growth;
  std::vector<ObservedSeries> extra_observed;
  Eigen::VectorXd weights;
  QuarterRange timeline;

  int n_regions() const noexcept { return static_cast<int>(region_ids.size()); }
  int n_observed_factors() const noexcept { return 1 + static_cast<int>(extra_observed.size()); }

  std::optional<double> annual(int region, int year) const {
    const auto& m = annual_growth.at(static_cast<std::size_t>(region));
    auto it = m.find(year);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  double national(const QuarterIndex& q) const {
    if (!timeline.contains(q)) throw RangeError("quarter " + q.str() + " outside panel timeline");
    return national_quarterly_growth[static_cast<std::size_t>(timeline.offset(q))];
  }

  /// Observed factor k at quarter q (k = 0 is national growth).
  double observed_factor(int k, const QuarterIndex& q) const {
    if (k == 0) return national(q);
    if (!timeline.contains(q)) throw RangeError("quarter " + q.str() + " outside panel timeline");
    return extra_observed.at(static_cast<std::size_t>(k - 1)).values.at(static_cast<std::size_t>(timeline.offset(q)));
  }

  int first_year() const noexcept { return timeline.first.year(); }
  int last_year() const noexcept { return timeline.last.year(); }

  /// Throws ConfigError when an invariant is violated.
  void validate() const {
    const auto n = region_ids.size();
    if (n < 2) throw ConfigError("panel " + country_code + " needs at least 2 regions");
    if (annual_growth.size() != n) throw DimensionError("annual_growth must have one entry per region");
    if (static_cast<std::size_t>(weights.size()) != n) throw DimensionError("weights must have one entry per region");
    if ((weights.array() < 0.0).any()) throw ConfigError("weights must be nonnegative");
    if (std::abs(weights.sum() - 1.0) > 1e-10) throw ConfigError("weights must sum to 1");
    if (timeline.first > timeline.last) throw ConfigError("empty timeline");
    const auto T = static_cast<std::size_t>(timeline.size());
    if (national_quarterly_growth.size() != T)
      throw ConfigError("national growth must cover every quarter of the timeline");
    for (const auto& s : extra_observed)
      if (s.values.size() != T) throw ConfigError("observed series " + s.name + " must cover the timeline");
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [year, value] : annual_growth[i]) {
        if (!timeline.contains_year(year))
          throw ConfigError("annual value for " + region_ids[i] + " in " + std::to_string(year) +
                            " lies outside the timeline");
        if (!std::isfinite(value)) throw ConfigError("non-finite annual value for " + region_ids[i]);
      }
  }
};

/// Information set available when nowcasting `target_year`.
///
/// Annual regional data are published with a two-year lag, so only years up
/// to `annual_cutoff_year` are visible. `base` must outlive the vintage.
struct Vintage {
  const CountryPanel* base = nullptr;
  int annual_cutoff_year = 0;
  QuarterIndex quarterly_cutoff;
  int target_year = 0;

  const CountryPanel& panel() const { return *base; }

  QuarterRange timeline() const { return {base->timeline.first, quarterly_cutoff}; }

  std::optional<double> annual(int region, int year) const {
    if (year > annual_cutoff_year) return std::nullopt;
    return base->annual(region, year);
  }
};

inline constexpr int kPublicationLagYears = 2;

/// Builds the vintage for `target_year`. `last_quarter` < 4 gives an intra-year
/// vintage; the default reproduces the end-of-year design.
inline Vintage make_vintage(const CountryPanel& panel, int target_year, int last_quarter = 4) {
  const int cutoff = target_year - kPublicationLagYears;
  const QuarterIndex qcut(target_year, last_quarter);
  if (!panel.timeline.contains(qcut))
    throw RangeError("target " + qcut.str() + " outside panel timeline " + panel.timeline.first.str() + "-" +
                     panel.timeline.last.str());
  if (!panel.timeline.contains(QuarterIndex(cutoff, 4)))
    throw RangeError("annual cutoff year " + std::to_string(cutoff) + " outside panel timeline");
  return Vintage{&panel, cutoff, qcut, target_year};
}

/// Inverse-gamma prior IG(shape, scale); mean scale / (shape - 1).
struct InvGammaPrior {
  double shape;
  double scale;
};

/// Model dimensions, chain lengths, and hyperparameters.
struct ModelConfig {
  int q_latent = 1;
  int q_observed = 1;
  int lags = 7;
  int n_draws = 3000;
  int n_burn = 2000;
  InvGammaPrior shock_prior{3.0, 0.3};
  InvGammaPrior me_prior{100.0, 0.01};
  InvGammaPrior cs_prior{5.0, 0.05};
  int max_stationarity_retries = 100;
  std::uint64_t rng_seed = 42;
  double initial_state_variance = 10.0;
  double pin_variance = 1e-10;
  double initial_loading_sd = 0.1;

  int q_total() const noexcept { return q_latent + q_observed; }
  int state_dim() const noexcept { return q_total() * lags; }

  /// Throws ConfigError on hard violations; returns soft warnings.
  std::vector<std::string> validate(int n_regions) const {
    if (q_latent < 1) throw ConfigError("q_latent must be >= 1");
    if (q_observed < 1) throw ConfigError("q_observed must be >= 1 (national growth is always observed)");
    if (lags < 7) throw ConfigError("lag order must be >= 7 to carry the seven-quarter annual window");
    if (n_draws < 0 || n_burn < 0) throw ConfigError("chain lengths must be nonnegative");
    if (max_stationarity_retries < 1) throw ConfigError("max_stationarity_retries must be >= 1");
    for (const auto& p : {shock_prior, me_prior, cs_prior})
      if (!(p.shape > 0.0 && p.scale > 0.0)) throw ConfigError("prior parameters must be strictly positive");
    if (!(initial_state_variance > 0.0) || !(pin_variance > 0.0)) throw ConfigError("variances must be positive");
    std::vector<std::string> warnings;
    if (q_total() > n_regions)
      warnings.push_back("Q = " + std::to_string(q_total()) + " exceeds region count " + std::to_string(n_regions));
    return warnings;
  }
};

}  // namespace regionow
