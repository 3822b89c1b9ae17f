#pragma once

// Density scoring: empirical CRPS, share-weighted aggregation, benchmark
// densities, and the report tables.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "datamodel.hpp"
#include "density.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace regionow {

/// Ensemble CRPS
///   (1/S) sum_s |x_s - y| - (1/(2 S^2)) sum_s sum_s' |x_s - x_s'|
/// evaluated in O(S log S) via order statistics:
///   sum_s sum_s' |x_s - x_s'| = 2 sum_i x_(i) (2i - S - 1),  i = 1..S.
inline double crps_empirical(std::span<const double> samples, double y) {
  if (samples.empty()) throw DomainError("CRPS of an empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("non-finite CRPS sample");
  std::sort(x.begin(), x.end());
  const auto S = static_cast<double>(x.size());
  double abs_err = 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_err += std::abs(x[i] - y);
    spread += x[i] * (2.0 * static_cast<double>(i + 1) - S - 1.0);
  }
  return std::max(0.0, abs_err / S - spread / (S * S));
}

/// sum_i w_i crps_i.
inline double weighted_crps(const Eigen::VectorXd& crps, const Eigen::VectorXd& weights) {
  if (crps.size() != weights.size()) throw DimensionError("CRPS and weight vectors differ in length");
  return crps.dot(weights);
}

inline double relative_score(double model, double benchmark) {
  if (!(benchmark > 0.0)) throw DomainError("benchmark score must be positive for a relative score");
  return model / benchmark;
}

namespace detail {

inline std::vector<double> gaussian_samples(double mean, double variance, int n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const double sd = std::sqrt(std::max(variance, 0.0));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = mean + sd * nd(rng);
  return out;
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace detail

struct GaussianForecast {
  double mean = 0.0;
  double variance = 0.0;
};

/// Random walk in growth rates: centre at the last visible growth, variance
/// from the sample variance of first differences of visible growth (zero with
/// fewer than two differences).
inline GaussianForecast rw_forecast(const std::map<int, double>& visible) {
  if (visible.empty()) throw ConfigError("random-walk benchmark needs visible growth observations");
  std::vector<double> diffs;
  for (auto it = std::next(visible.begin()); it != visible.end(); ++it)
    diffs.push_back(it->second - std::prev(it)->second);
  return {visible.rbegin()->second, detail::sample_variance(diffs)};
}

inline constexpr std::size_t kMinBenchmarkHistory = 3;

inline PredictiveDensity rw_benchmark(const std::map<int, double>& visible, int target_year, int n_draws, Rng& rng,
                                      const std::string& region = {}) {
  if (visible.size() < kMinBenchmarkHistory)
    throw ConfigError("insufficient history for the random-walk benchmark" + (region.empty() ? "" : " of " + region) +
                      ": " + std::to_string(visible.size()) + " visible years, need " +
                      std::to_string(kMinBenchmarkHistory));
  const auto f = rw_forecast(visible);
  return PredictiveDensity::from_samples(region, target_year, detail::gaussian_samples(f.mean, f.variance, n_draws, rng));
}

struct Ar1Fit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual_variance = 0.0;
  bool degenerate = false;
};

/// Least-squares AR(1) with intercept on consecutive-year pairs.
inline Ar1Fit fit_ar1(const std::map<int, double>& visible) {
  if (visible.size() < 4) throw ConfigError("AR(1) benchmark needs at least 4 visible growth observations");
  std::vector<double> x, y;
  for (auto it = std::next(visible.begin()); it != visible.end(); ++it)
    if (std::prev(it)->first == it->first - 1) {
      x.push_back(std::prev(it)->second);
      y.push_back(it->second);
    }
  if (x.size() < 3) throw ConfigError("AR(1) benchmark needs at least 3 consecutive-year pairs");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Ar1Fit fit;
  if (sxx <= 1e-12 * std::max(1.0, mx * mx) * n) {
    fit.degenerate = true;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    ssr += e * e;
  }
  fit.residual_variance = x.size() > 2 ? ssr / (n - 2.0) : 0.0;
  return fit;
}

/// AR(1) forecast iterated from the last visible year to `target_year`.
/// A zero-variance regressor falls back to the random-walk centre.
inline GaussianForecast ar1_forecast(const std::map<int, double>& visible, int target_year) {
  const Ar1Fit fit = fit_ar1(visible);
  const auto [last_year, last] = *visible.rbegin();
  if (fit.degenerate) return {last, 0.0};
  const int h = std::max(1, target_year - last_year);
  double mean = last;
  double var = 0.0;
  double phi_pow = 1.0;
  for (int k = 0; k < h; ++k) {
    mean = fit.intercept + fit.slope * mean;
    var += fit.residual_variance * phi_pow;
    phi_pow *= fit.slope * fit.slope;
  }
  return {mean, var};
}

inline PredictiveDensity ar1_benchmark(const std::map<int, double>& visible, int target_year, int n_draws, Rng& rng,
                                       const std::string& region = {}) {
  const auto f = ar1_forecast(visible, target_year);
  return PredictiveDensity::from_samples(region, target_year, detail::gaussian_samples(f.mean, f.variance, n_draws, rng));
}

// ---------------------------------------------------------------------------
// Reports

/// Densities for one model configuration: year -> one density per region
/// (in panel region order).
using DensitySet = std::map<int, std::vector<PredictiveDensity>>;

struct ScoreRow {
  std::string country;
  int q = 0;
  std::optional<int> year;  // nullopt = average over years
  double wcrps = 0.0;
  double rel_wcrps = 0.0;
};

struct RegionRow {
  std::string country;
  std::string region;
  double avg_rel_crps = 0.0;
};

struct RegionYearRow {
  std::string country;
  std::string region;
  int year = 0;
  double rel_crps = 0.0;
};

struct Exclusion {
  std::string country;
  int q = 0;
  std::string region;
  int year = 0;
  std::string reason;
};

struct Reports {
  std::vector<ScoreRow> scores;
  std::vector<RegionRow> regions;
  std::vector<RegionYearRow> region_years;
  std::vector<Exclusion> exclusions;
};

/// Per-year weighted CRPS of a density set. Regions lacking a realization are
/// excluded and the remaining weights renormalized.
struct YearScore {
  int year = 0;
  double wcrps = 0.0;
  std::vector<std::optional<double>> region_crps;
};

inline std::vector<YearScore> score_density_set(const CountryPanel& panel, const DensitySet& set, int q,
                                                std::vector<Exclusion>* exclusions = nullptr) {
  std::vector<YearScore> out;
  const int N = panel.n_regions();
  for (const auto& [year, dens] : set) {
    if (static_cast<int>(dens.size()) != N) throw DimensionError("one density per region required");
    YearScore ys{year, 0.0, std::vector<std::optional<double>>(static_cast<std::size_t>(N))};
    double wsum = 0.0;
    for (int i = 0; i < N; ++i) {
      const auto real = panel.annual(i, year);
      if (!real) {
        if (exclusions)
          exclusions->push_back({panel.country_code, q, panel.region_ids[static_cast<std::size_t>(i)], year,
                                 "missing realization"});
        continue;
      }
      const double c = crps_empirical(dens[static_cast<std::size_t>(i)].samples, *real);
      ys.region_crps[static_cast<std::size_t>(i)] = c;
      ys.wcrps += panel.weights[i] * c;
      wsum += panel.weights[i];
    }
    if (wsum > 0.0) ys.wcrps /= wsum;
    out.push_back(std::move(ys));
  }
  return out;
}

/// Builds the three report tables: country x Q scores (per year and averaged),
/// per-region average relative CRPS, and per-region-year relative CRPS.
/// The regional tables are produced for `selected_q`.
inline Reports build_reports(const CountryPanel& panel, const std::map<int, DensitySet>& by_q,
                             const DensitySet& benchmark, int selected_q) {
  Reports rep;
  const auto bench = score_density_set(panel, benchmark, 0);
  std::map<int, const YearScore*> bench_by_year;
  for (const auto& b : bench) bench_by_year[b.year] = &b;

  for (const auto& [q, set] : by_q) {
    const auto scores = score_density_set(panel, set, q, &rep.exclusions);
    double model_sum = 0.0, bench_sum = 0.0;
    int n = 0;
    for (const auto& ys : scores) {
      auto it = bench_by_year.find(ys.year);
      if (it == bench_by_year.end()) throw LookupError("no benchmark densities for " + std::to_string(ys.year));
      const double b = it->second->wcrps;
      if (!(b > 0.0)) {
        rep.exclusions.push_back({panel.country_code, q, "*", ys.year, "zero benchmark score"});
        continue;
      }
      rep.scores.push_back({panel.country_code, q, ys.year, ys.wcrps, relative_score(ys.wcrps, b)});
      model_sum += ys.wcrps;
      bench_sum += b;
      ++n;
    }
    if (n > 0)
      rep.scores.push_back({panel.country_code, q, std::nullopt, model_sum / n, relative_score(model_sum, bench_sum)});

    if (q != selected_q) continue;
    for (int i = 0; i < panel.n_regions(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      double msum = 0.0, bsum = 0.0;
      for (const auto& ys : scores) {
        const auto& m = ys.region_crps[ui];
        const auto& b = bench_by_year.at(ys.year)->region_crps[ui];
        if (!m || !b) continue;
        if (!(*b > 0.0)) {
          rep.exclusions.push_back({panel.country_code, q, panel.region_ids[ui], ys.year, "zero benchmark score"});
          continue;
        }
        rep.region_years.push_back({panel.country_code, panel.region_ids[ui], ys.year, relative_score(*m, *b)});
        msum += *m;
        bsum += *b;
      }
      if (bsum > 0.0) rep.regions.push_back({panel.country_code, panel.region_ids[ui], relative_score(msum, bsum)});
    }
  }
  return rep;
}

/// Random-walk densities for every region and target year.
inline DensitySet rw_benchmark_set(const CountryPanel& panel, const std::vector<int>& years, int n_draws, Rng& rng) {
  DensitySet out;
  for (int year : years) {
    auto& v = out[year];
    for (int i = 0; i < panel.n_regions(); ++i) {
      std::map<int, double> visible;
      for (const auto& [y, g] : panel.annual_growth[static_cast<std::size_t>(i)])
        if (y <= year - kPublicationLagYears) visible.emplace(y, g);
      v.push_back(rw_benchmark(visible, year, n_draws, rng, panel.region_ids[static_cast<std::size_t>(i)]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delimited output

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_scores(std::ostream& out, const std::vector<ScoreRow>& rows) {
  out << "country,Q,year,wcrps,rel_wcrps\n";
  for (const auto& r : rows)
    out << r.country << ',' << r.q << ',' << (r.year ? std::to_string(*r.year) : std::string("average")) << ','
        << format_number(r.wcrps) << ',' << format_number(r.rel_wcrps) << '\n';
}

inline void write_region_scores(std::ostream& out, const std::vector<RegionRow>& rows) {
  out << "country,region,avg_rel_crps\n";
  for (const auto& r : rows) out << r.country << ',' << r.region << ',' << format_number(r.avg_rel_crps) << '\n';
}

inline void write_region_year_scores(std::ostream& out, const std::vector<RegionYearRow>& rows) {
  out << "country,region,year,rel_crps\n";
  for (const auto& r : rows)
    out << r.country << ',' << r.region << ',' << r.year << ',' << format_number(r.rel_crps) << '\n';
}

inline void write_exclusions(std::ostream& out, const std::vector<Exclusion>& rows) {
  out << "country,Q,region,year,reason\n";
  for (const auto& r : rows) out << r.country << ',' << r.q << ',' << r.region << ',' << r.year << ',' << r.reason << '\n';
}

}  // namespace regionow
