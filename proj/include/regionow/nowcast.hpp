#pragma once

// Pseudo real-time harness: per-vintage fits, predictive densities for the
// target year (and the backcast year), expanding windows, factor-count
// selection, and quarterly regional series with credible bands.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "density.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "parallel.hpp"
#include "sampler.hpp"
#include "statespace.hpp"

namespace regionow {

inline constexpr int kMaxFactors = 10;

/// Q* = max(1, ceil(log_base N)); natural log by default.
inline int rule_of_thumb_Q(int n_regions, double log_base = std::numbers::e) {
  if (n_regions < 1) throw DomainError("rule of thumb needs at least one region");
  if (!(log_base > 1.0)) throw DomainError("logarithm base must exceed 1");
  const double v = std::log(static_cast<double>(n_regions)) / std::log(log_base);
  return std::max(1, static_cast<int>(std::ceil(v - 1e-12)));
}

/// Latent factor counts 1..min(N, q_max).
inline std::vector<int> factor_grid(int n_regions, int q_max = kMaxFactors) {
  if (n_regions < 2) throw ConfigError("factor grid needs at least 2 regions");
  std::vector<int> g;
  for (int q = 1; q <= std::min(n_regions, q_max); ++q) g.push_back(q);
  return g;
}

/// Independent stream seed for one (country, Q, year) task.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& country, int q, int year) {
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                      static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(year)};
  for (unsigned char c : country) material.push_back(c);
  std::seed_seq seq(material.begin(), material.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Predictive draws of annual growth in `year` for every region: the annual
/// measurement equation at Q4 of `year` evaluated on each posterior draw, plus
/// a measurement-error disturbance.
inline std::vector<PredictiveDensity> predictive_at_year(const std::vector<PosteriorDraw>& draws,
                                                         const CountryPanel& panel, const QuarterRange& timeline,
                                                         const StateLayout& layout, int year, Rng& rng) {
  const QuarterIndex anchor(year, 4);
  if (!timeline.contains(anchor)) throw RangeError("anchor " + anchor.str() + " outside fitted timeline");
  const int t = static_cast<int>(timeline.offset(anchor));
  const int N = panel.n_regions();
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(N));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (const auto& d : draws) {
    const Eigen::VectorXd x = annual_regressors(d.factors.state(t), layout);
    for (int i = 0; i < N; ++i)
      samples[static_cast<std::size_t>(i)].push_back(d.loadings.row(i).dot(x) + std::sqrt(d.me_var[i]) * nd(rng));
  }
  std::vector<PredictiveDensity> out;
  for (int i = 0; i < N; ++i)
    out.push_back(PredictiveDensity::from_samples(panel.region_ids[static_cast<std::size_t>(i)], year,
                                                  std::move(samples[static_cast<std::size_t>(i)])));
  return out;
}

struct VintageNowcast {
  int target_year = 0;
  int q_latent = 0;
  std::vector<PredictiveDensity> nowcasts;
  std::vector<PredictiveDensity> backcasts;
  std::vector<SweepDiagnostics> diagnostics;
  int rejection_exhaustions = 0;
  double max_spectral_radius = 0.0;
  std::size_t retained = 0;
};

inline VintageNowcast nowcast_vintage(const CountryPanel& panel, int target_year, const ModelConfig& config, Rng& rng) {
  const Vintage v = make_vintage(panel, target_year);
  const ChainResult chain = gibbs_run(v, config, rng);
  VintageNowcast out;
  out.target_year = target_year;
  out.q_latent = config.q_latent;
  const auto layout = StateLayout::from(config);
  out.nowcasts = predictive_at_year(chain.draws, panel, chain.timeline, layout, target_year, rng);
  out.backcasts = predictive_at_year(chain.draws, panel, chain.timeline, layout, target_year - 1, rng);
  out.diagnostics = chain.diagnostics;
  out.rejection_exhaustions = chain.rejection_exhaustions;
  out.retained = chain.draws.size();
  for (const auto& d : chain.draws) out.max_spectral_radius = std::max(out.max_spectral_radius, d.spectral_radius);
  return out;
}

/// Refits from scratch for each target year; each vintage draws from its own
/// stream derived from (config.rng_seed, country, Q_f, year).
inline std::vector<VintageNowcast> expanding_window(const CountryPanel& panel, const std::vector<int>& years,
                                                    const ModelConfig& config, int workers = 1) {
  std::vector<VintageNowcast> out(years.size());
  parallel_for(years.size(), workers, [&](std::size_t k) {
    Rng rng(derive_seed(config.rng_seed, panel.country_code, config.q_latent, years[k]));
    out[k] = nowcast_vintage(panel, years[k], config, rng);
  });
  return out;
}

inline DensitySet nowcast_set(const std::vector<VintageNowcast>& vs) {
  DensitySet s;
  for (const auto& v : vs) s[v.target_year] = v.nowcasts;
  return s;
}

/// Target years of an expanding window clipped to what the panel supports.
inline std::vector<int> holdout_years(const CountryPanel& panel, int first, int last) {
  std::vector<int> out;
  for (int y = first; y <= last; ++y)
    if (panel.timeline.contains(QuarterIndex(y, 4)) && panel.timeline.contains(QuarterIndex(y - kPublicationLagYears, 4)))
      out.push_back(y);
  return out;
}

struct GridPoint {
  int q_latent = 0;
  std::vector<VintageNowcast> vintages;
  std::vector<YearScore> year_scores;
  double avg_wcrps = 0.0;
  std::optional<double> rel_wcrps;  // vs benchmark, ratio of averages
};

struct GridResult {
  std::vector<GridPoint> points;
  int selected_q = 0;

  const GridPoint& at(int q) const {
    for (const auto& p : points)
      if (p.q_latent == q) return p;
    throw LookupError("grid has no Q_f = " + std::to_string(q));
  }
};

/// Evaluates each Q_f in `grid` over the holdout years and selects the one
/// with the smallest time-averaged weighted CRPS (ties go to the smaller Q).
inline GridResult grid_search_Q(const CountryPanel& panel, const std::vector<int>& years, const ModelConfig& base,
                                const std::vector<int>& grid, const DensitySet* benchmark = nullptr, int workers = 1) {
  if (grid.empty()) throw ConfigError("empty factor grid");
  // Flatten (Q, year) so every task can run in parallel.
  std::vector<std::pair<int, int>> tasks;
  for (int q : grid)
    for (int y : years) tasks.emplace_back(q, y);
  std::vector<VintageNowcast> results(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t k) {
    ModelConfig c = base;
    c.q_latent = tasks[k].first;
    Rng rng(derive_seed(c.rng_seed, panel.country_code, c.q_latent, tasks[k].second));
    results[k] = nowcast_vintage(panel, tasks[k].second, c, rng);
  });

  std::vector<YearScore> bench_scores;
  if (benchmark) bench_scores = score_density_set(panel, *benchmark, 0);

  GridResult gr;
  double best = std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  for (int q : grid) {
    GridPoint gp;
    gp.q_latent = q;
    for (std::size_t j = 0; j < years.size(); ++j) gp.vintages.push_back(std::move(results[k++]));
    gp.year_scores = score_density_set(panel, nowcast_set(gp.vintages), q);
    double sum = 0.0;
    for (const auto& ys : gp.year_scores) sum += ys.wcrps;
    gp.avg_wcrps = gp.year_scores.empty() ? 0.0 : sum / static_cast<double>(gp.year_scores.size());
    if (benchmark) {
      double bsum = 0.0;
      for (const auto& b : bench_scores) bsum += b.wcrps;
      if (bsum > 0.0) gp.rel_wcrps = relative_score(sum, bsum);
    }
    if (gp.avg_wcrps < best) {
      best = gp.avg_wcrps;
      gr.selected_q = q;
    }
    gr.points.push_back(std::move(gp));
  }
  return gr;
}

// ---------------------------------------------------------------------------
// Quarterly regional series

struct QuarterlyBands {
  QuarterRange timeline;
  std::vector<std::string> region_ids;
  /// bands[i][t] holds the quantiles at kSummaryLevels.
  std::vector<std::vector<std::array<double, 5>>> bands;

  Eigen::MatrixXd median() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(bands.size()), timeline.size());
    for (std::size_t i = 0; i < bands.size(); ++i)
      for (std::size_t t = 0; t < bands[i].size(); ++t)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = bands[i][t][2];
    return m;
  }
};

/// Posterior quantiles of the contemporaneous quarterly regional series over
/// the retained draws of a chain.
inline QuarterlyBands quarterly_bands(const ChainResult& chain, const CountryPanel& panel, const StateLayout& layout) {
  QuarterlyBands qb;
  qb.timeline = chain.timeline;
  qb.region_ids = panel.region_ids;
  const int N = panel.n_regions();
  const auto T = static_cast<std::size_t>(chain.timeline.size());
  if (chain.draws.empty()) throw ConfigError("no retained draws to summarize");
  std::vector<std::vector<double>> acc(static_cast<std::size_t>(N) * T);
  for (const auto& d : chain.draws) {
    const Eigen::MatrixXd f = d.factors.current();
    const Eigen::MatrixXd y =
        quarterly_regional_series(f.topRows(layout.q_latent), d.loadings);
    for (int i = 0; i < N; ++i)
      for (std::size_t t = 0; t < T; ++t)
        acc[static_cast<std::size_t>(i) * T + t].push_back(y(i, static_cast<Eigen::Index>(t)));
  }
  qb.bands.assign(static_cast<std::size_t>(N), std::vector<std::array<double, 5>>(T));
  for (int i = 0; i < N; ++i)
    for (std::size_t t = 0; t < T; ++t)
      qb.bands[static_cast<std::size_t>(i)][t] = summary_quantiles(std::move(acc[static_cast<std::size_t>(i) * T + t]));
  return qb;
}

/// Vintage exposing every annual observation in the panel.
inline Vintage full_sample_vintage(const CountryPanel& panel) {
  return Vintage{&panel, panel.last_year(), panel.timeline.last, panel.last_year()};
}

/// Full-sample fit summarized as quarterly bands.
inline QuarterlyBands fit_quarterly(const CountryPanel& panel, const ModelConfig& config) {
  Rng rng(derive_seed(config.rng_seed, panel.country_code, config.q_latent, 0));
  const ChainResult chain = gibbs_run(full_sample_vintage(panel), config, rng, {false});
  return quarterly_bands(chain, panel, StateLayout::from(config));
}

// ---------------------------------------------------------------------------
// Delimited output

inline void write_samples(std::ostream& out, const std::string& country, const std::vector<PredictiveDensity>& dens,
                          bool header = true) {
  if (header) out << "country,region,target_year,draw_index,value\n";
  for (const auto& d : dens)
    for (std::size_t s = 0; s < d.samples.size(); ++s)
      out << country << ',' << d.region << ',' << d.target_year << ',' << s << ',' << format_number(d.samples[s])
          << '\n';
}

inline void write_quantiles(std::ostream& out, const std::string& country, int q, const std::string& kind,
                            const std::vector<PredictiveDensity>& dens, bool header = true) {
  if (header) out << "country,Q,kind,region,target_year,q05,q16,q50,q84,q95\n";
  for (const auto& d : dens) {
    out << country << ',' << q << ',' << kind << ',' << d.region << ',' << d.target_year;
    for (double v : d.quantiles) out << ',' << format_number(v);
    out << '\n';
  }
}

inline void write_diagnostics(std::ostream& out, int target_year, const std::vector<SweepDiagnostics>& diag,
                              bool header = true) {
  if (header)
    out << "target_year,sweep,log_likelihood,spectral_radius,rejection_exhaustions,global_var,global_latent,"
           "global_observed\n";
  for (const auto& d : diag)
    out << target_year << ',' << d.sweep << ',' << format_number(d.log_likelihood) << ','
        << format_number(d.spectral_radius) << ',' << d.rejection_exhaustions << ',' << format_number(d.global_var)
        << ',' << format_number(d.global_latent) << ',' << format_number(d.global_observed) << '\n';
}

inline void write_quarterly_bands(std::ostream& out, const std::string& country, const QuarterlyBands& qb) {
  out << "country,region,year,quarter,q05,q16,q50,q84,q95\n";
  for (std::size_t i = 0; i < qb.bands.size(); ++i)
    for (std::size_t t = 0; t < qb.bands[i].size(); ++t) {
      const QuarterIndex q = qb.timeline.at(static_cast<long>(t));
      out << country << ',' << qb.region_ids[i] << ',' << q.year() << ',' << q.quarter();
      for (double v : qb.bands[i][t]) out << ',' << format_number(v);
      out << '\n';
    }
}

}  // namespace regionow
