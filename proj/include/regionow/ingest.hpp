#pragma once

// Delimited-file ingestion and growth transformations.
//
// Annual CSV:    country,region,year,value
// Quarterly CSV: country,year,quarter,value
// Values are GVA levels (strictly positive).

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "datamodel.hpp"
#include "errors.hpp"
#include "quarter.hpp"

namespace regionow {

struct AnnualRow {
  std::string country;
  std::string region;
  int year;
  double value;
};

struct QuarterlyRow {
  std::string country;
  int year;
  int quarter;
  double value;
};

struct RawAnnualTable {
  std::vector<AnnualRow> rows;
};

struct RawQuarterlyTable {
  std::vector<QuarterlyRow> rows;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline int parse_int(std::string_view s, const std::string& file, std::size_t line, const char* field) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(file, line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  return v;
}

inline double parse_double(std::string_view s, const std::string& file, std::size_t line, const char* field) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(file, line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  return v;
}

template <typename RowFn>
void read_delimited(std::istream& in, const std::string& file, std::string_view expected_header, RowFn&& on_row) {
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (lineno == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (!header_seen) {
      if (view != expected_header)
        throw ParseError(file, lineno, "expected header '" + std::string(expected_header) + "', got '" +
                                           std::string(view) + "'");
      header_seen = true;
      continue;
    }
    auto fields = split_fields(view);
    if (fields.size() != 4)
      throw ParseError(file, lineno, "expected 4 fields, got " + std::to_string(fields.size()));
    on_row(fields, lineno);
  }
  if (!header_seen) throw ParseError(file, lineno, "missing header");
}

}  // namespace detail

inline RawAnnualTable parse_annual_csv(std::istream& in, const std::string& file = "<annual>") {
  RawAnnualTable t;
  detail::read_delimited(in, file, "country,region,year,value", [&](const auto& f, std::size_t line) {
    if (f[0].empty()) throw ParseError(file, line, "empty country");
    if (f[1].empty()) throw ParseError(file, line, "empty region");
    t.rows.push_back({std::string(f[0]), std::string(f[1]), detail::parse_int(f[2], file, line, "year"),
                      detail::parse_double(f[3], file, line, "value")});
  });
  return t;
}

inline RawQuarterlyTable parse_quarterly_csv(std::istream& in, const std::string& file = "<quarterly>") {
  RawQuarterlyTable t;
  detail::read_delimited(in, file, "country,year,quarter,value", [&](const auto& f, std::size_t line) {
    if (f[0].empty()) throw ParseError(file, line, "empty country");
    const int q = detail::parse_int(f[2], file, line, "quarter");
    if (q < 1 || q > 4) throw ParseError(file, line, "invalid quarter '" + std::string(f[2]) + "' (expected 1..4)");
    t.rows.push_back({std::string(f[0]), detail::parse_int(f[1], file, line, "year"), q,
                      detail::parse_double(f[3], file, line, "value")});
  });
  return t;
}

inline RawAnnualTable read_annual_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return parse_annual_csv(in, path);
}

inline RawQuarterlyTable read_quarterly_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return parse_quarterly_csv(in, path);
}

inline void write_annual_csv(std::ostream& out, const RawAnnualTable& t) {
  out << "country,region,year,value\n";
  out.precision(17);
  for (const auto& r : t.rows) out << r.country << ',' << r.region << ',' << r.year << ',' << r.value << '\n';
}

inline void write_quarterly_csv(std::ostream& out, const RawQuarterlyTable& t) {
  out << "country,year,quarter,value\n";
  out.precision(17);
  for (const auto& r : t.rows) out << r.country << ',' << r.year << ',' << r.quarter << ',' << r.value << '\n';
}

/// Year-on-year log growth in percent. Years without a predecessor are dropped.
inline std::map<int, double> annual_yoy_growth(const std::map<int, double>& levels,
                                               const std::string& label = "series") {
  for (const auto& [year, level] : levels)
    if (!(level > 0.0) || !std::isfinite(level))
      throw DomainError("nonpositive level for " + label + " in " + std::to_string(year));
  std::map<int, double> out;
  for (const auto& [year, level] : levels) {
    auto prev = levels.find(year - 1);
    if (prev != levels.end()) out[year] = 100.0 * (std::log(level) - std::log(prev->second));
  }
  return out;
}

/// Quarter-on-quarter log growth in percent. The first quarter has no growth.
inline std::map<QuarterIndex, double> quarterly_qoq_growth(const std::map<QuarterIndex, double>& levels,
                                                           const std::string& label = "series") {
  std::map<QuarterIndex, double> out;
  const QuarterIndex* prev_q = nullptr;
  double prev_level = 0.0;
  for (const auto& [q, level] : levels) {
    if (!(level > 0.0) || !std::isfinite(level)) throw DomainError("nonpositive level for " + label + " in " + q.str());
    if (prev_q) {
      if (q - *prev_q != 1)
        throw ContiguityError("gap in quarterly series " + label + " between " + prev_q->str() + " and " + q.str());
      out[q] = 100.0 * (std::log(level) - std::log(prev_level));
    }
    prev_q = &q;
    prev_level = level;
  }
  return out;
}

/// Sorted distinct region ids for a country.
inline std::vector<std::string> country_regions(const RawAnnualTable& annual, const std::string& country) {
  std::set<std::string> ids;
  for (const auto& r : annual.rows)
    if (r.country == country) ids.insert(r.region);
  return {ids.begin(), ids.end()};
}

/// Average regional share of the national total over `[first_year, last_year]`,
/// renormalized to sum to one. Regions are ordered as in `country_regions`.
inline Eigen::VectorXd compute_weights(const RawAnnualTable& annual, const std::string& country, int first_year,
                                       int last_year) {
  if (first_year > last_year)
    throw ConfigError("empty weight training range " + std::to_string(first_year) + "-" + std::to_string(last_year));
  const auto regions = country_regions(annual, country);
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < regions.size(); ++i) pos[regions[i]] = static_cast<int>(i);

  std::map<int, std::map<int, double>> by_year;  // year -> region -> level
  for (const auto& r : annual.rows) {
    if (r.country != country || r.year < first_year || r.year > last_year) continue;
    if (!(r.value > 0.0)) throw DomainError("nonpositive level for " + r.region + " in " + std::to_string(r.year));
    by_year[r.year][pos[r.region]] = r.value;
  }
  const auto n = static_cast<Eigen::Index>(regions.size());
  Eigen::VectorXd share_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(n);
  for (const auto& [year, levels] : by_year) {
    double total = 0.0;
    for (const auto& [i, v] : levels) total += v;
    for (const auto& [i, v] : levels) {
      share_sum[i] += v / total;
      count[i] += 1;
    }
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (count[i] == 0)
      throw ConfigError("region " + regions[static_cast<std::size_t>(i)] + " has no level in weight training years");
    w[i] = share_sum[i] / count[i];
  }
  return w / w.sum();
}

struct PanelOptions {
  /// Last year used for weights; defaults to the last annual year.
  std::optional<int> weight_last_year;
};

/// Assembles a validated CountryPanel from level tables.
///
/// The timeline runs from Q1 of the first annual year through the last Q4
/// covered by quarterly growth, so quarterly levels must start no later than
/// Q4 of the year before the first annual year.
inline CountryPanel build_panel(const RawAnnualTable& annual, const RawQuarterlyTable& quarterly,
                                const std::string& country, const PanelOptions& opts = {}) {
  CountryPanel panel;
  panel.country_code = country;
  panel.region_ids = country_regions(annual, country);
  if (panel.region_ids.empty()) throw LookupError("country " + country + " not found in annual table");

  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < panel.region_ids.size(); ++i) pos[panel.region_ids[i]] = static_cast<int>(i);
  std::vector<std::map<int, double>> levels(panel.region_ids.size());
  for (const auto& r : annual.rows) {
    if (r.country != country) continue;
    auto& m = levels[static_cast<std::size_t>(pos[r.region])];
    if (!m.emplace(r.year, r.value).second)
      throw UniquenessError("duplicate annual row for " + r.region + " in " + std::to_string(r.year));
  }

  std::map<QuarterIndex, double> qlevels;
  for (const auto& r : quarterly.rows) {
    if (r.country != country) continue;
    if (!qlevels.emplace(QuarterIndex(r.year, r.quarter), r.value).second)
      throw UniquenessError("duplicate quarterly row for " + country + " in " + QuarterIndex(r.year, r.quarter).str());
  }
  if (qlevels.empty()) throw LookupError("country " + country + " not found in quarterly table");

  int first_year = std::numeric_limits<int>::max();
  int last_year = std::numeric_limits<int>::min();
  for (const auto& m : levels)
    if (!m.empty()) {
      first_year = std::min(first_year, m.begin()->first);
      last_year = std::max(last_year, m.rbegin()->first);
    }

  const auto qgrowth = quarterly_qoq_growth(qlevels, country + " national");
  if (qgrowth.empty()) throw ConfigError("quarterly table for " + country + " has fewer than two quarters");
  QuarterIndex qlast = qgrowth.rbegin()->first;
  if (qlast.quarter() != 4) qlast = QuarterIndex(qlast.year() - 1, 4);
  const QuarterIndex qfirst(first_year, 1);
  if (qgrowth.begin()->first > qfirst || qlast < QuarterIndex(last_year, 4))
    throw ConfigError("quarterly coverage " + qgrowth.begin()->first.str() + "-" + qgrowth.rbegin()->first.str() +
                      " does not span annual years " + std::to_string(first_year) + "-" + std::to_string(last_year) +
                      " (growth needed from " + qfirst.str() + ")");
  panel.timeline = {qfirst, qlast};
  for (QuarterIndex q = qfirst; q <= qlast; ++q) panel.national_quarterly_growth.push_back(qgrowth.at(q));

  for (std::size_t i = 0; i < levels.size(); ++i)
    panel.annual_growth.push_back(annual_yoy_growth(levels[i], panel.region_ids[i]));

  panel.weights = compute_weights(annual, country, first_year, opts.weight_last_year.value_or(last_year));
  panel.validate();
  return panel;
}

}  // namespace regionow
