// regionow: command-line driver for panel ingestion, synthetic panels,
// expanding-window nowcasts, evaluation, and quarterly regional series.

#include <regionow/regionow.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace regionow;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string annual_path;
  std::string quarterly_path;
  std::string scenario;
  std::uint64_t scenario_seed = 2016;
  std::string country;
  int qf = 0;
  bool grid = false;
  bool rule = false;
  int grid_max = kMaxFactors;
  double log_base = std::numbers::e;
  std::string years;
  int draws = 3000;
  int burn = 2000;
  std::uint64_t seed = 42;
  std::string out = "out";
  int workers = default_workers();
  int weight_last_year = 0;  // 0 = last annual year
  int benchmark_draws = 0;   // 0 = same as draws
};

// ---------------------------------------------------------------------------
// Panel loading

struct LoadedPanel {
  CountryPanel panel;
  std::optional<SyntheticTruth> truth;
};

LoadedPanel load_panel(const RunConfig& rc) {
  const bool from_csv = !rc.annual_path.empty() || !rc.quarterly_path.empty();
  if (from_csv == !rc.scenario.empty()) throw UsageError("give either --annual/--quarterly or --scenario");
  LoadedPanel lp;
  if (!rc.scenario.empty()) {
    if (rc.scenario != "s1") throw UsageError("unknown scenario '" + rc.scenario + "' (available: s1)");
    auto sp = simulate(scenario_s1(rc.scenario_seed));
    if (!rc.country.empty() && rc.country != sp.panel.country_code)
      throw UsageError("scenario s1 provides country " + sp.panel.country_code);
    lp.panel = std::move(sp.panel);
    lp.truth = std::move(sp.truth);
    return lp;
  }
  if (rc.annual_path.empty() || rc.quarterly_path.empty()) throw UsageError("both --annual and --quarterly are required");
  if (rc.country.empty()) throw UsageError("--country is required with CSV input");
  PanelOptions opts;
  if (rc.weight_last_year != 0) opts.weight_last_year = rc.weight_last_year;
  lp.panel = build_panel(read_annual_csv(rc.annual_path), read_quarterly_csv(rc.quarterly_path), rc.country, opts);
  return lp;
}

std::vector<int> parse_years(const std::string& text, const CountryPanel& panel) {
  std::vector<int> years;
  if (text.empty()) {
    years = holdout_years(panel, panel.last_year() - 3, panel.last_year());
  } else {
    static const std::regex range(R"(^\s*(\d{4})\s*[-:]\s*(\d{4})\s*$)");
    std::smatch m;
    if (std::regex_match(text, m, range)) {
      const int a = std::stoi(m[1]), b = std::stoi(m[2]);
      if (a > b) throw UsageError("empty year range " + text);
      for (int y = a; y <= b; ++y) years.push_back(y);
    } else {
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          std::size_t pos = 0;
          years.push_back(std::stoi(tok, &pos));
          if (tok.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::logic_error&) {
          throw UsageError("cannot parse --years '" + text + "'");
        }
      }
    }
  }
  if (years.empty()) throw UsageError("no hold-out years");
  for (int y : years) make_vintage(panel, y);  // RangeError for unsupported targets
  return years;
}

ModelConfig model_config(const RunConfig& rc, int q_latent) {
  ModelConfig c;
  c.q_latent = q_latent;
  c.n_draws = rc.draws;
  c.n_burn = rc.burn;
  c.rng_seed = rc.seed;
  return c;
}

json data_source(const RunConfig& rc) {
  if (!rc.scenario.empty()) return {{"type", "scenario"}, {"name", rc.scenario}, {"seed", rc.scenario_seed}};
  return {{"type", "csv"}, {"annual", rc.annual_path}, {"quarterly", rc.quarterly_path}};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void ensure_out_dir(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.out, ec);
  if (ec || !fs::is_directory(rc.out)) throw UsageError("output directory " + rc.out + " is not writable");
}

std::string quarterly_rows(const CountryPanel& panel, const SyntheticTruth& truth) {
  std::ostringstream os;
  os << "country,region,year,quarter,value\n";
  for (int i = 0; i < panel.n_regions(); ++i)
    for (long t = 0; t < panel.timeline.size(); ++t) {
      const QuarterIndex q = panel.timeline.at(t);
      os << panel.country_code << ',' << panel.region_ids[static_cast<std::size_t>(i)] << ',' << q.year() << ','
         << q.quarter() << ',' << format_number(truth.quarterly(i, t)) << '\n';
    }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const RunConfig& rc) {
  ensure_out_dir(rc);
  const auto lp = load_panel(rc);
  const CountryPanel& p = lp.panel;
  json summary;
  summary["country"] = p.country_code;
  summary["N"] = p.n_regions();
  summary["regions"] = p.region_ids;
  summary["timeline"] = {{"first", p.timeline.first.str()}, {"last", p.timeline.last.str()}, {"quarters", p.timeline.size()}};
  json census = json::array();
  for (int i = 0; i < p.n_regions(); ++i) {
    json missing = json::array();
    const auto& m = p.annual_growth[static_cast<std::size_t>(i)];
    // The first year has no predecessor level, so its growth can never exist.
    for (int y = p.timeline.first.year() + 1; y <= p.last_year(); ++y)
      if (!m.contains(y)) missing.push_back(y);
    census.push_back({{"region", p.region_ids[static_cast<std::size_t>(i)]},
                      {"annual_observations", m.size()},
                      {"missing_years", missing}});
  }
  summary["missing"] = census;
  std::vector<double> w(p.weights.data(), p.weights.data() + p.weights.size());
  summary["weights"] = w;
  open_out(fs::path(rc.out) / "panel_summary.json") << summary.dump(2) << '\n';

  auto a = open_out(fs::path(rc.out) / "panel_annual_growth.csv");
  a << "country,region,year,value\n";
  for (int i = 0; i < p.n_regions(); ++i)
    for (const auto& [y, g] : p.annual_growth[static_cast<std::size_t>(i)])
      a << p.country_code << ',' << p.region_ids[static_cast<std::size_t>(i)] << ',' << y << ',' << format_number(g)
        << '\n';
  auto q = open_out(fs::path(rc.out) / "panel_national_growth.csv");
  q << "country,year,quarter,value\n";
  for (long t = 0; t < p.timeline.size(); ++t) {
    const QuarterIndex qi = p.timeline.at(t);
    q << p.country_code << ',' << qi.year() << ',' << qi.quarter() << ','
      << format_number(p.national_quarterly_growth[static_cast<std::size_t>(t)]) << '\n';
  }
  std::cout << "N=" << p.n_regions() << " timeline=" << p.timeline.first.str() << "-" << p.timeline.last.str() << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& rc) {
  ensure_out_dir(rc);
  RunConfig sim = rc;
  if (sim.scenario.empty()) sim.scenario = "s1";
  sim.annual_path.clear();
  sim.quarterly_path.clear();
  const auto lp = load_panel(sim);
  const auto [annual, quarterly] = panel_to_tables(lp.panel);
  auto af = open_out(fs::path(rc.out) / "annual_levels.csv");
  write_annual_csv(af, annual);
  auto qf = open_out(fs::path(rc.out) / "quarterly_levels.csv");
  write_quarterly_csv(qf, quarterly);
  open_out(fs::path(rc.out) / "truth_quarterly.csv") << quarterly_rows(lp.panel, *lp.truth);
  std::cout << "wrote " << lp.panel.n_regions() << " regions, " << lp.panel.timeline.size() << " quarters\n";
  return 0;
}

void write_quarterly(const RunConfig& rc, const CountryPanel& panel, int q_latent) {
  const auto bands = fit_quarterly(panel, model_config(rc, q_latent));
  auto f = open_out(fs::path(rc.out) / "quarterly.csv");
  write_quarterly_bands(f, panel.country_code, bands);
}

std::string samples_name(int q) { return "samples_qf" + std::to_string(q) + ".csv"; }

/// Scores density sets against the panel and the random-walk benchmark and
/// writes the report tables.
void evaluate_outputs(const RunConfig& rc, const CountryPanel& panel, const std::vector<int>& years,
                      const std::map<int, DensitySet>& by_q, int selected_q) {
  const int bench_draws = rc.benchmark_draws > 0 ? rc.benchmark_draws : std::max(rc.draws, 1);
  Rng brng(derive_seed(rc.seed, panel.country_code, 0, -1));
  const DensitySet bench = rw_benchmark_set(panel, years, bench_draws, brng);
  const Reports rep = build_reports(panel, by_q, bench, selected_q);
  auto scores = open_out(fs::path(rc.out) / "scores.csv");
  write_scores(scores, rep.scores);
  auto regions = open_out(fs::path(rc.out) / "region_scores.csv");
  write_region_scores(regions, rep.regions);
  auto region_years = open_out(fs::path(rc.out) / "region_year_scores.csv");
  write_region_year_scores(region_years, rep.region_years);
  auto excl = open_out(fs::path(rc.out) / "exclusions.csv");
  write_exclusions(excl, rep.exclusions);
}

json manifest_config(const RunConfig& rc, const std::vector<int>& years) {
  return {{"draws", rc.draws},         {"burn", rc.burn},         {"seed", rc.seed},
          {"years", years},            {"lags", ModelConfig{}.lags}, {"weight_last_year", rc.weight_last_year},
          {"benchmark_draws", rc.benchmark_draws}, {"log_base", rc.log_base}, {"grid_max", rc.grid_max}};
}

int cmd_nowcast(const RunConfig& rc) {
  const int modes = (rc.qf > 0) + rc.grid + rc.rule;
  if (modes != 1) throw UsageError("select exactly one of --qf, --grid, --rule");
  if (rc.draws < 1) throw UsageError("--draws must be >= 1");
  ensure_out_dir(rc);
  const auto lp = load_panel(rc);
  const CountryPanel& panel = lp.panel;
  const std::vector<int> years = parse_years(rc.years, panel);

  std::vector<int> qs;
  std::string mode;
  if (rc.grid) {
    qs = factor_grid(panel.n_regions(), rc.grid_max);
    mode = "grid";
  } else if (rc.rule) {
    qs = {rule_of_thumb_Q(panel.n_regions(), rc.log_base)};
    mode = "rule";
  } else {
    qs = {rc.qf};
    mode = "explicit";
  }
  for (const auto& w : model_config(rc, qs.back()).validate(panel.n_regions())) std::cerr << "warning: " << w << "\n";

  // One task per (Q, year); every task owns its own seeded stream.
  std::vector<std::pair<int, int>> tasks;
  for (int q : qs)
    for (int y : years) tasks.emplace_back(q, y);
  std::vector<VintageNowcast> results(tasks.size());
  parallel_for(tasks.size(), rc.workers, [&](std::size_t k) {
    const ModelConfig c = model_config(rc, tasks[k].first);
    Rng rng(derive_seed(c.rng_seed, panel.country_code, c.q_latent, tasks[k].second));
    results[k] = nowcast_vintage(panel, tasks[k].second, c, rng);
  });

  std::map<int, DensitySet> by_q;
  std::map<int, double> avg;
  int exhaustions = 0;
  std::size_t k = 0;
  for (int q : qs) {
    auto samples = open_out(fs::path(rc.out) / samples_name(q));
    auto backs = open_out(fs::path(rc.out) / ("backcast_samples_qf" + std::to_string(q) + ".csv"));
    auto quants = open_out(fs::path(rc.out) / ("quantiles_qf" + std::to_string(q) + ".csv"));
    auto diag = open_out(fs::path(rc.out) / ("diagnostics_qf" + std::to_string(q) + ".csv"));
    std::vector<VintageNowcast> vs;
    for (std::size_t j = 0; j < years.size(); ++j, ++k) {
      const auto& v = results[k];
      const bool first = j == 0;
      write_samples(samples, panel.country_code, v.nowcasts, first);
      write_samples(backs, panel.country_code, v.backcasts, first);
      write_quantiles(quants, panel.country_code, q, "nowcast", v.nowcasts, first);
      write_quantiles(quants, panel.country_code, q, "backcast", v.backcasts, false);
      write_diagnostics(diag, v.target_year, v.diagnostics, first);
      exhaustions += v.rejection_exhaustions;
      vs.push_back(v);
    }
    by_q[q] = nowcast_set(vs);
    double sum = 0.0;
    const auto ys = score_density_set(panel, by_q[q], q);
    for (const auto& s : ys) sum += s.wcrps;
    avg[q] = ys.empty() ? 0.0 : sum / static_cast<double>(ys.size());
  }

  int selected = qs.front();
  for (int q : qs)
    if (avg[q] < avg[selected]) selected = q;

  evaluate_outputs(rc, panel, years, by_q, selected);
  write_quarterly(rc, panel, selected);

  json manifest;
  manifest["tool"] = "regionow";
  manifest["version"] = REGIONOW_VERSION;
  manifest["command"] = "nowcast";
  manifest["country"] = panel.country_code;
  manifest["data_source"] = data_source(rc);
  manifest["q_mode"] = mode;
  manifest["q_evaluated"] = qs;
  manifest["selected_q"] = selected;
  manifest["config"] = manifest_config(rc, years);
  manifest["rejection_exhaustions"] = exhaustions;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  open_out(fs::path(rc.out) / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << "selected Q_f=" << selected << " over " << qs.size() << " candidate(s), " << years.size()
            << " target year(s)\n";
  return 0;
}

json read_manifest(const RunConfig& rc) {
  const fs::path path = fs::path(rc.out) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw UsageError("no completed fit in " + rc.out + " (manifest.json missing); run 'nowcast' first");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("unreadable manifest " + path.string() + ": " + e.what());
  }
}

/// Rebuilds the run configuration a manifest was written with, keeping the
/// output directory and worker count of the current invocation.
RunConfig config_from_manifest(const json& m, const RunConfig& current) {
  RunConfig rc = current;
  try {
    const auto& src = m.at("data_source");
    if (src.at("type") == "scenario") {
      rc.scenario = src.at("name").get<std::string>();
      rc.scenario_seed = src.at("seed").get<std::uint64_t>();
      rc.annual_path.clear();
      rc.quarterly_path.clear();
    } else {
      rc.scenario.clear();
      rc.annual_path = src.at("annual").get<std::string>();
      rc.quarterly_path = src.at("quarterly").get<std::string>();
    }
    rc.country = m.at("country").get<std::string>();
    const auto& c = m.at("config");
    rc.draws = c.at("draws").get<int>();
    rc.burn = c.at("burn").get<int>();
    rc.seed = c.at("seed").get<std::uint64_t>();
    rc.weight_last_year = c.at("weight_last_year").get<int>();
    rc.benchmark_draws = c.at("benchmark_draws").get<int>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("incomplete manifest: ") + e.what());
  }
  return rc;
}

int cmd_quarterly(const RunConfig& current) {
  const json m = read_manifest(current);
  const RunConfig rc = config_from_manifest(m, current);
  const auto lp = load_panel(rc);
  write_quarterly(rc, lp.panel, m.at("selected_q").get<int>());
  std::cout << "wrote quarterly.csv for Q_f=" << m.at("selected_q").get<int>() << "\n";
  return 0;
}

/// Reads samples_qf{Q}.csv back into density sets.
DensitySet read_samples(const fs::path& path, const CountryPanel& panel) {
  std::ifstream in(path);
  if (!in) throw UsageError("missing " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "country,region,target_year,draw_index,value") throw ParseError(path.string(), 1, "unexpected header");
  std::map<int, std::map<std::string, std::vector<double>>> acc;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 5) throw ParseError(path.string(), lineno, "expected 5 fields");
    const int year = detail::parse_int(f[2], path.string(), lineno, "target_year");
    acc[year][std::string(f[1])].push_back(detail::parse_double(f[4], path.string(), lineno, "value"));
  }
  DensitySet set;
  for (auto& [year, regions] : acc)
    for (const auto& id : panel.region_ids) {
      auto it = regions.find(id);
      if (it == regions.end()) throw LookupError("no samples for " + id + " in " + std::to_string(year));
      set[year].push_back(PredictiveDensity::from_samples(id, year, std::move(it->second)));
    }
  return set;
}

int cmd_evaluate(const RunConfig& current) {
  const json m = read_manifest(current);
  const RunConfig rc = config_from_manifest(m, current);
  const auto lp = load_panel(rc);
  const auto years = m.at("config").at("years").get<std::vector<int>>();
  std::map<int, DensitySet> by_q;
  for (int q : m.at("q_evaluated").get<std::vector<int>>())
    by_q[q] = read_samples(fs::path(rc.out) / samples_name(q), lp.panel);
  evaluate_outputs(rc, lp.panel, years, by_q, m.at("selected_q").get<int>());
  std::cout << "wrote score tables for " << by_q.size() << " model(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional growth nowcasting with a mixed-frequency Bayesian factor model"};
  app.set_version_flag("--version", REGIONOW_VERSION);
  app.set_config("--config", "", "Declarative config file (TOML/INI); command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig rc;
  auto env = [](CLI::Option* o, const char* name) { return o->envname(std::string("REGIONOW_") + name); };
  env(app.add_option("--annual", rc.annual_path, "Annual regional levels CSV (country,region,year,value)"), "ANNUAL");
  env(app.add_option("--quarterly", rc.quarterly_path, "Quarterly national levels CSV (country,year,quarter,value)"),
      "QUARTERLY");
  env(app.add_option("--scenario", rc.scenario, "Use a built-in synthetic scenario instead of CSV input (s1)"),
      "SCENARIO");
  env(app.add_option("--scenario-seed", rc.scenario_seed, "Simulation seed for --scenario")->capture_default_str(),
      "SCENARIO_SEED");
  env(app.add_option("--country", rc.country, "Country code"), "COUNTRY");
  auto* qf = env(app.add_option("--qf", rc.qf, "Explicit number of latent factors")->check(CLI::Range(1, 100)), "QF");
  auto* grid = env(app.add_flag("--grid", rc.grid, "Select the number of latent factors by grid search"), "GRID");
  auto* rule = env(app.add_flag("--rule", rc.rule, "Use the ceil(log N) rule of thumb"), "RULE");
  qf->excludes(grid)->excludes(rule);
  grid->excludes(rule);
  env(app.add_option("--grid-max", rc.grid_max, "Largest factor count in the grid")->capture_default_str()->check(CLI::PositiveNumber),
      "GRID_MAX");
  env(app.add_option("--log-base", rc.log_base, "Logarithm base of the rule of thumb")->capture_default_str(), "LOG_BASE");
  env(app.add_option("--years", rc.years, "Hold-out target years, e.g. 2018-2021 or 2018,2020"), "YEARS");
  env(app.add_option("--draws", rc.draws, "Retained MCMC draws")->capture_default_str()->check(CLI::NonNegativeNumber),
      "DRAWS");
  env(app.add_option("--burn", rc.burn, "Burn-in sweeps")->capture_default_str()->check(CLI::NonNegativeNumber), "BURN");
  env(app.add_option("--seed", rc.seed, "Master RNG seed")->capture_default_str(), "SEED");
  env(app.add_option("--out", rc.out, "Output directory")->capture_default_str(), "OUT");
  env(app.add_option("--workers", rc.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber),
      "WORKERS");
  env(app.add_option("--weight-last-year", rc.weight_last_year,
                     "Last year of the GVA-share window for weights (default: full sample)"),
      "WEIGHT_LAST_YEAR");
  env(app.add_option("--benchmark-draws", rc.benchmark_draws, "Samples per benchmark density (default: --draws)"),
      "BENCHMARK_DRAWS");

  auto* ingest = app.add_subcommand("ingest", "Parse input CSVs and write a panel summary");
  auto* simulate_cmd = app.add_subcommand("simulate", "Write a synthetic scenario as input CSVs plus ground truth");
  auto* nowcast = app.add_subcommand("nowcast", "Expanding-window nowcasts, scores, quarterly series, manifest");
  auto* quarterly = app.add_subcommand("quarterly", "Re-fit the manifest's model on the full sample; write quarterly.csv");
  auto* evaluate = app.add_subcommand("evaluate", "Score the samples recorded in a manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ingest) return cmd_ingest(rc);
    if (*simulate_cmd) return cmd_simulate(rc);
    if (*nowcast) return cmd_nowcast(rc);
    if (*quarterly) return cmd_quarterly(rc);
    if (*evaluate) return cmd_evaluate(rc);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
