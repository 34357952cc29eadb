#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamshock/cohort.hpp"
#include "teamshock/config.hpp"
#include "teamshock/corpus.hpp"
#include "teamshock/csv.hpp"
#include "teamshock/digest.hpp"
#include "teamshock/effects.hpp"
#include "teamshock/features.hpp"
#include "teamshock/heterogeneity.hpp"
#include "teamshock/model_io.hpp"
#include "teamshock/model_selection.hpp"
#include "teamshock/report.hpp"
#include "teamshock/svg.hpp"
#include "teamshock/timeseries.hpp"
#include "teamshock/version.hpp"

namespace teamshock {

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

inline constexpr std::array<std::string_view, 10> kStages{"ingest",   "aggregate", "forecast", "select", "features",
                                                          "train",    "predict",   "effects",  "regress", "report"};
inline constexpr std::array<std::string_view, 2> kOutcomes{"productivity", "team_size"};

/// Registry rows keyed by repo id; incomplete rows keep NaN entries.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<FeatureVector> rows;
};

inline void write_feature_table(std::ostream& out, const FeatureTable& t) {
  std::vector<std::string> header{"repo_id"};
  for (const auto& f : kFeatureRegistry) header.emplace_back(f.name);
  csv::write_row(out, header);
  for (std::size_t r = 0; r < t.ids.size(); ++r) {
    std::vector<std::string> row{t.ids[r]};
    for (std::size_t i = 0; i < kFeatureCount; ++i) row.push_back(t.rows[r].missing[i] ? "" : csv::num(t.rows[r][i]));
    csv::write_row(out, row);
  }
}

inline FeatureTable read_feature_table(std::istream& in, const std::string& what = "features") {
  const auto t = csv::read(in, what);
  if (t.header.size() != kFeatureCount + 1 || t.header[0] != "repo_id")
    throw std::runtime_error(what + ": unexpected header");
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (t.header[i + 1] != kFeatureRegistry[i].name)
      throw std::runtime_error(what + ": column " + t.header[i + 1] + " is not registry feature " +
                               std::string(kFeatureRegistry[i].name));
  FeatureTable ft;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw std::runtime_error(what + ": ragged row " + std::to_string(t.line_numbers[r]));
    FeatureVector fv;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      if (!row[i + 1].empty()) fv.set(i, std::stod(row[i + 1]));
    ft.ids.push_back(row[0]);
    ft.rows.push_back(fv);
  }
  return ft;
}

/// Complete rows only, as raw values or regression design values.
struct CompleteRows {
  std::vector<std::string> ids;
  Matrix X;
  std::size_t dropped = 0;
};

inline CompleteRows complete_rows(const FeatureTable& t, bool design) {
  CompleteRows c;
  c.X = Matrix(0, kFeatureCount);
  for (std::size_t r = 0; r < t.ids.size(); ++r) {
    if (!t.rows[r].complete()) {
      ++c.dropped;
      continue;
    }
    std::vector<double> v(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i) v[i] = design ? t.rows[r].design_value(i) : t.rows[r][i];
    c.X.push_row(v);
    c.ids.push_back(t.ids[r]);
  }
  return c;
}

inline std::vector<std::string> registry_names() {
  std::vector<std::string> n;
  for (const auto& f : kFeatureRegistry) n.emplace_back(f.name);
  return n;
}

/// Runs the stages against one output directory. Each stage reads what
/// earlier stages wrote there; the corpus is loaded once per instance.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::ostream* log = nullptr) : cfg_(std::move(cfg)), log_(log) {}

  /// Runs on an already loaded corpus; the input paths are ignored.
  Pipeline(PipelineConfig cfg, Corpus corpus, const std::vector<ActorProfile>& profiles,
           const std::vector<ActorLanguage>& languages, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), log_(log), corpus_(std::make_unique<Corpus>(std::move(corpus))), in_memory_(true) {
    cfg_.events.clear();
    cfg_.profiles.clear();
    cfg_.languages.clear();
    scan_.records = scan_.accepted = corpus_->size();
    n_profiles_ = profiles.size();
    n_languages_ = languages.size();
    directory_ = std::make_unique<ActorDirectory>(*corpus_, profiles, languages);
  }

  const PipelineConfig& config() const noexcept { return cfg_; }
  const std::filesystem::path& output_dir() const noexcept { return cfg_.output_dir; }

  /// Input files must exist before any stage starts.
  void validate_inputs() const {
    if (in_memory_) return;
    if (cfg_.events.empty()) throw ConfigError("events: no event log given");
    for (const auto& p : {cfg_.events, cfg_.profiles, cfg_.languages})
      if (!p.empty() && !std::filesystem::is_regular_file(p)) throw ConfigError("input file not found: " + p.string());
  }

  void run_stage(std::string_view name) {
    if (std::find(kStages.begin(), kStages.end(), name) == kStages.end())
      throw ConfigError("unknown stage '" + std::string(name) + "'");
    validate_inputs();
    load_manifest();
    current_.clear();
    try {
      std::filesystem::create_directories(cfg_.output_dir);
      if (name == "ingest") ingest();
      else if (name == "aggregate") aggregate();
      else if (name == "forecast") forecast();
      else if (name == "select") select();
      else if (name == "features") features();
      else if (name == "train") train();
      else if (name == "predict") predict();
      else if (name == "effects") effects();
      else if (name == "regress") regress();
      else report();
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(std::string(name), e.what());
    }
    record_stage(std::string(name));
  }

  void run_all() {
    validate_inputs();
    std::filesystem::create_directories(cfg_.output_dir);
    std::filesystem::remove(cfg_.output_dir / "manifest.json");
    manifest_loaded_ = false;
    for (auto s : kStages) run_stage(s);
  }

 private:
  PipelineConfig cfg_;
  std::ostream* log_;
  std::unique_ptr<Corpus> corpus_;
  std::unique_ptr<ActorDirectory> directory_;
  std::unique_ptr<CorpusIndex> index_;
  ScanReport scan_;
  std::size_t n_profiles_ = 0, n_languages_ = 0;
  nlohmann::ordered_json manifest_;
  bool manifest_loaded_ = false;
  bool in_memory_ = false;
  std::vector<std::string> current_;

  using OutcomeKey = std::tuple<std::string, std::string, int>;  // set, outcome, month
  using OutcomeMap = std::map<OutcomeKey, std::map<std::string, double>>;

  void note(const std::string& stage, const std::string& msg) const {
    if (log_) *log_ << "[" << stage << "] " << msg << '\n';
  }

  void warn(const std::string& stage, const std::string& msg) const {
    (log_ ? *log_ : std::cerr) << "[" << stage << "] warning: " << msg << '\n';
  }

  std::filesystem::path out_path(const std::string& rel) const { return cfg_.output_dir / rel; }

  std::ofstream open_out(const std::string& rel) {
    const auto p = out_path(rel);
    std::filesystem::create_directories(p.parent_path());
    std::ofstream o(p, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write " + p.string());
    current_.push_back(rel);
    return o;
  }

  void write_text(const std::string& rel, const std::string& text) {
    auto o = open_out(rel);
    o << text;
  }

  csv::Table read_table(const std::string& rel, const std::string& produced_by) const {
    std::ifstream in(out_path(rel), std::ios::binary);
    if (!in) throw std::runtime_error("missing " + rel + " (run the " + produced_by + " stage first)");
    return csv::read(in, rel);
  }

  static std::size_t col(const csv::Table& t, std::string_view name, const std::string& what) {
    const int c = t.column(name);
    if (c < 0) throw std::runtime_error(what + ": missing column " + std::string(name));
    return static_cast<std::size_t>(c);
  }

  static double to_num(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  }

  // ---- inputs -----------------------------------------------------------

  void load_inputs() {
    if (corpus_) return;
    std::ifstream ev(cfg_.events, std::ios::binary);
    if (!ev) throw std::runtime_error("cannot read " + cfg_.events.string());
    corpus_ = std::make_unique<Corpus>(load_corpus(ev, &scan_));
    std::vector<ActorProfile> profiles;
    std::vector<ActorLanguage> languages;
    if (!cfg_.profiles.empty()) {
      std::ifstream in(cfg_.profiles, std::ios::binary);
      profiles = read_profiles(in);
    }
    if (!cfg_.languages.empty()) {
      std::ifstream in(cfg_.languages, std::ios::binary);
      languages = read_languages(in);
    }
    n_profiles_ = profiles.size();
    n_languages_ = languages.size();
    directory_ = std::make_unique<ActorDirectory>(*corpus_, profiles, languages);
  }

  const Corpus& corpus() {
    load_inputs();
    return *corpus_;
  }

  const CorpusIndex& index() {
    if (!index_) index_ = std::make_unique<CorpusIndex>(corpus());
    return *index_;
  }

  // ---- manifest ---------------------------------------------------------

  void load_manifest() {
    if (manifest_loaded_) return;
    manifest_loaded_ = true;
    manifest_ = nlohmann::ordered_json::object();
    std::ifstream in(out_path("manifest.json"), std::ios::binary);
    if (!in) return;
    try {
      manifest_ = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception&) {
      manifest_ = nlohmann::ordered_json::object();
    }
  }

  void record_stage(const std::string& stage) {
    nlohmann::ordered_json m;
    m["tool"] = "teamshock";
    m["version"] = kVersion;
    m["model_format"] = kModelFormatVersion;
    m["seed"] = cfg_.seed;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& k : kConfigKeys)
      if (k.name != "output_dir") config[std::string(k.name)] = cfg_.raw.get(k.name);
    m["config"] = std::move(config);
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& [role, p] : {std::pair<std::string, std::filesystem::path>{"events", cfg_.events},
                                  {"profiles", cfg_.profiles},
                                  {"languages", cfg_.languages}})
      if (!p.empty()) inputs.push_back({{"role", role}, {"path", p.generic_string()}, {"sha256", sha256_file(p)}});
    m["inputs"] = std::move(inputs);
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    std::vector<std::string> outs = current_;
    std::sort(outs.begin(), outs.end());
    outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
    for (auto s : kStages) {
      const std::string name(s);
      if (name == stage) {
        auto files = nlohmann::ordered_json::array();
        for (const auto& rel : outs) files.push_back({{"path", rel}, {"sha256", sha256_file(out_path(rel))}});
        stages[name] = std::move(files);
      } else if (manifest_.contains("stages") && manifest_["stages"].contains(name)) {
        stages[name] = manifest_["stages"][name];
      }
    }
    m["stages"] = std::move(stages);
    manifest_ = m;
    std::ofstream o(out_path("manifest.json"), std::ios::binary);
    if (!o) throw StageError(stage, "cannot write manifest.json");
    o << manifest_.dump(2) << '\n';
  }

  // ---- stages -----------------------------------------------------------

  void ingest() {
    const auto& c = corpus();
    std::map<std::string, std::size_t> by_type;
    Timestamp first = 0, last = 0;
    bool any = false;
    for (const auto& e : c.events()) {
      ++by_type[std::string(event_type_token(e.type))];
      if (!any || e.ts < first) first = e.ts;
      if (!any || e.ts > last) last = e.ts;
      any = true;
    }
    nlohmann::ordered_json j;
    j["records"] = scan_.records;
    j["accepted"] = scan_.accepted;
    j["skipped"] = scan_.skipped;
    j["unknown_types"] = scan_.unknown_types;
    j["errors"] = scan_.errors;
    j["repositories"] = c.repos().size();
    j["actors"] = c.actors().size();
    j["profiles"] = n_profiles_;
    j["languages"] = n_languages_;
    j["first_month"] = any ? month_of(first).str() : "";
    j["last_month"] = any ? month_of(last).str() : "";
    j["events_by_type"] = by_type;
    auto o = open_out("ingest.json");
    o << j.dump(2) << '\n';
    note("ingest", std::to_string(scan_.accepted) + " events, " + std::to_string(scan_.skipped) + " malformed records skipped");
    if (scan_.accepted == 0) throw std::runtime_error("no valid events in " + cfg_.events.string());
  }

  void aggregate() {
    const auto& c = corpus();
    if (c.size() == 0) throw std::runtime_error("empty corpus");
    Timestamp last_ts = c.events().front().ts;
    for (const auto& e : c.events()) last_ts = std::max(last_ts, e.ts);
    YearMonth last = std::min(month_of(last_ts), cfg_.shock_month + (cfg_.forecast_horizon - 1));
    if (last < cfg_.shock_month - 1) last = cfg_.shock_month - 1;
    const auto series = aggregate_monthly_all(c, cfg_.series_start, last);
    {
      auto o = open_out("series.csv");
      write_series_csv(o, series);
    }
    for (const auto& s : series)
      write_text("series_" + std::string(to_string(s.metric)) + ".svg",
                 render_series_svg(s, std::string(to_string(s.metric))));
    note("aggregate", std::to_string(series.front().values.size()) + " months from " + cfg_.series_start.str());
  }

  std::vector<MonthlySeries> read_series() const {
    const auto t = read_table("series.csv", "aggregate");
    if (t.header.empty() || t.header[0] != "month" || t.rows.empty()) throw std::runtime_error("series.csv: malformed");
    std::vector<MonthlySeries> out;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      MonthlySeries s;
      s.metric = metric_from_string(t.header[c]);
      s.start = YearMonth::parse(t.rows.front()[0]);
      for (const auto& r : t.rows) s.values.push_back(to_num(r.at(c)));
      out.push_back(std::move(s));
    }
    return out;
  }

  void forecast() {
    const auto series = read_series();
    ForecastOptions opt;
    opt.horizon = cfg_.forecast_horizon;
    opt.stl = cfg_.stl;
    for (const auto& s : series) {
      const int n_hist = cfg_.shock_month - s.start;
      if (n_hist < 2 * opt.stl.period || static_cast<std::size_t>(n_hist) > s.values.size())
        throw std::runtime_error("series.csv does not cover two years before the shock month");
      MonthlySeries hist{s.metric, s.start, std::vector<double>(s.values.begin(), s.values.begin() + n_hist)};
      const auto fc = forecast_with_intervals(hist, opt);
      const std::vector<double> after(s.values.begin() + n_hist, s.values.end());
      const auto& b80 = fc.band(0.80);
      const auto& b95 = fc.band(0.95);
      const std::string name(to_string(s.metric));
      {
        auto o = open_out("forecast_" + name + ".csv");
        csv::write_row(o, "month", "point", "lo80", "hi80", "lo95", "hi95", "observed", "gap", "flag");
        for (int h = 0; h < fc.horizon; ++h) {
          const auto k = static_cast<std::size_t>(h);
          const std::string month = (fc.start + h).str();
          if (k < after.size()) {
            const double y = after[k];
            const char* flag = (y < b95.lower[k] || y > b95.upper[k]) ? "outside95"
                               : (y < b80.lower[k] || y > b80.upper[k]) ? "outside80"
                                                                          : "inside";
            csv::write_row(o, month, fc.point[k], b80.lower[k], b80.upper[k], b95.lower[k], b95.upper[k], y,
                           y - fc.point[k], std::string(flag));
          } else {
            csv::write_row(o, month, fc.point[k], b80.lower[k], b80.upper[k], b95.lower[k], b95.upper[k],
                           std::string(), std::string(), std::string());
          }
        }
      }
      write_text("forecast_" + name + ".svg", render_forecast_svg(hist, fc, after, name));
    }
    note("forecast", std::to_string(series.size()) + " metrics forecast " + std::to_string(cfg_.forecast_horizon) +
                         " months from " + cfg_.shock_month.str());
  }

  void select() {
    const auto& idx = index();
    for (const auto& [set, year] : {std::pair<std::string, int>{"reference", cfg_.reference_year}, {"target", cfg_.target_year}}) {
      auto crit = cfg_.selection;
      crit.year = year;
      auto teams = select_team_indices(idx, crit);
      std::vector<std::string> names;
      for (auto r : teams) names.push_back(corpus().repos().name(r));
      std::sort(names.begin(), names.end());
      auto o = open_out("teams_" + set + ".csv");
      csv::write_row(o, "repo_id");
      for (const auto& n : names) csv::write_row(o, n);
      note("select", std::to_string(names.size()) + " " + set + " teams (" + std::to_string(year) + ")");
    }
  }

  std::vector<std::string> read_teams(const std::string& set) const {
    const auto t = read_table("teams_" + set + ".csv", "select");
    const auto c = col(t, "repo_id", "teams_" + set + ".csv");
    std::vector<std::string> ids;
    for (const auto& r : t.rows) ids.push_back(r.at(c));
    return ids;
  }

  /// Reference outcomes fall the same number of months after the reference
  /// year as target outcomes do after the target year.
  YearMonth outcome_month(const std::string& set, int i) const {
    const int shift = 12 * (cfg_.target_year - cfg_.reference_year);
    const YearMonth target = cfg_.shock_month + (i - 1);
    if (set == "target") return target;
    if (set == "reference") return target - shift;
    return target - shift - 12;  // reference_prior
  }

  void features() {
    const auto& idx = index();
    const auto& c = corpus();
    FeatureOptions fopt;
    fopt.observation_start = cfg_.series_start;
    {
      auto schema = open_out("feature_schema.csv");
      csv::write_row(schema, "name", "label", "unit", "transform", "design");
      for (const auto& f : kFeatureRegistry)
        csv::write_row(schema, std::string(f.name), std::string(f.label), std::string(f.unit), std::string(f.transform),
                       std::string(f.design == DesignTransform::log1p ? "log1p" : "identity"));
    }
    auto outcomes = open_out("outcomes.csv");
    csv::write_row(outcomes, "set", "repo_id", "outcome", "month", "value");
    for (const auto& [set, year] : {std::pair<std::string, int>{"reference", cfg_.reference_year}, {"target", cfg_.target_year}}) {
      const auto ids = read_teams(set);
      std::vector<RepoIndex> repos;
      for (const auto& id : ids) {
        auto r = c.repos().find(id);
        if (!r) throw std::runtime_error("teams_" + set + ".csv lists unknown repository " + id);
        repos.push_back(*r);
      }
      const QuarterView view(idx, Quarter{year, 4});
      FeatureTable ft;
      std::size_t incomplete = 0;
      for (std::size_t k = 0; k < repos.size(); ++k) {
        ft.ids.push_back(ids[k]);
        ft.rows.push_back(extract_features(idx, view, *directory_, repos[k], fopt));
        incomplete += !ft.rows.back().complete();
      }
      {
        auto o = open_out("features_" + set + ".csv");
        write_feature_table(o, ft);
      }
      std::vector<std::string> sets{set};
      if (set == "reference") sets.push_back("reference_prior");
      for (const auto& s : sets) {
        const YearMonth first = outcome_month(s, cfg_.months.front()), last = outcome_month(s, cfg_.months.back());
        const auto mo = monthly_outcomes(idx, repos, first, last);
        for (std::size_t k = 0; k < repos.size(); ++k)
          for (int i : cfg_.months) {
            const YearMonth ym = outcome_month(s, i);
            if (s == "reference_prior" && idx.created_day(repos[k]) * kSecondsPerDay >= month_start(ym + 1)) continue;
            const auto& v = mo[k][static_cast<std::size_t>(ym - first)];
            csv::write_row(outcomes, s, ids[k], std::string("productivity"), i, std::log1p(v.pushes));
            csv::write_row(outcomes, s, ids[k], std::string("team_size"), i, std::log1p(v.members));
          }
      }
      note("features", set + ": " + std::to_string(ft.ids.size()) + " teams, " + std::to_string(incomplete) +
                           " with missing features");
    }
  }

  OutcomeMap read_outcomes() const {
    const auto t = read_table("outcomes.csv", "features");
    const auto cs = col(t, "set", "outcomes.csv"), cr = col(t, "repo_id", "outcomes.csv"),
               co = col(t, "outcome", "outcomes.csv"), cm = col(t, "month", "outcomes.csv"),
               cv = col(t, "value", "outcomes.csv");
    OutcomeMap m;
    for (const auto& r : t.rows) m[{r.at(cs), r.at(co), std::stoi(r.at(cm))}][r.at(cr)] = to_num(r.at(cv));
    return m;
  }

  FeatureTable read_features(const std::string& set) const {
    const std::string rel = "features_" + set + ".csv";
    std::ifstream in(out_path(rel), std::ios::binary);
    if (!in) throw std::runtime_error("missing " + rel + " (run the features stage first)");
    return read_feature_table(in, rel);
  }

  static std::string model_file(ModelKind k, const std::string& outcome, int month) {
    return "models/" + to_string(k) + "_" + outcome + "_m" + std::to_string(month) + ".json";
  }

  void train() {
    const auto ft = read_features("reference");
    const auto rows = complete_rows(ft, false);
    const auto names = registry_names();
    const auto outcomes = read_outcomes();
    const std::size_t n = rows.ids.size();
    if (n < 10) throw std::runtime_error("only " + std::to_string(n) + " reference teams with complete features");
    const auto split = train_test_split(n, cfg_.test_fraction, derive_seed(cfg_.seed, "split"));
    if (split.test.empty() || split.train.size() < static_cast<std::size_t>(cfg_.cv_folds))
      throw std::runtime_error("too few reference teams for the train/test split");
    {
      auto o = open_out("split.csv");
      csv::write_row(o, "repo_id", "subset");
      std::vector<std::string> subset(n, "train");
      for (auto i : split.test) subset[i] = "test";
      for (std::size_t i = 0; i < n; ++i) csv::write_row(o, rows.ids[i], subset[i]);
    }
    const Matrix Xtr = rows.X.select_rows(split.train), Xte = rows.X.select_rows(split.test);
    auto eval = open_out("eval.csv");
    csv::write_row(eval, "model", "outcome", "month", "r2", "mse", "n", "excluded");
    auto tuning = open_out("tuning.csv");
    csv::write_row(tuning, "model", "outcome", "month", "spec", "cv_mse", "selected");
    auto resid = open_out("test_residuals.csv");
    csv::write_row(resid, "model", "outcome", "month", "repo_id", "Y", "Y_hat", "residual");
    for (std::size_t oi = 0; oi < kOutcomes.size(); ++oi) {
      const std::string outcome(kOutcomes[oi]);
      for (int m : cfg_.months) {
        const auto& ref = outcomes.at({"reference", outcome, m});
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
          auto it = ref.find(rows.ids[i]);
          if (it == ref.end()) throw std::runtime_error("no reference outcome for " + rows.ids[i]);
          y[i] = it->second;
        }
        const auto ytr = teamshock::select(std::span<const double>(y), split.train);
        const auto yte = teamshock::select(std::span<const double>(y), split.test);
        for (auto kind : cfg_.models) {
          const auto& grid = kind == ModelKind::gbdt ? cfg_.gbdt_grid : cfg_.rf_grid;
          std::size_t best = 0;
          if (grid.size() > 1) {
            const auto tune = kfold_tune(Xtr, ytr, grid, cfg_.cv_folds,
                                         derive_seed(cfg_.seed, "tune", oi, static_cast<std::uint64_t>(m)));
            best = tune.best;
            for (std::size_t g = 0; g < grid.size(); ++g)
              csv::write_row(tuning, to_string(kind), outcome, m, grid[g].label(), tune.cv_mse[g], g == best ? 1 : 0);
          } else {
            csv::write_row(tuning, to_string(kind), outcome, m, grid[0].label(), std::string(), 1);
          }
          const auto model = fit_model(grid[best], Xtr, ytr,
                                       derive_seed(cfg_.seed, "fit", oi * 16 + static_cast<std::uint64_t>(m),
                                                   static_cast<std::uint64_t>(kind)),
                                       names);
          const auto pred = model.predict(Xte);
          auto r = evaluate(pred, yte);
          csv::write_row(eval, to_string(kind), outcome, m, r.r2 ? csv::num(*r.r2) : std::string(), r.mse, r.n,
                         r.excluded);
          for (std::size_t k = 0; k < split.test.size(); ++k)
            csv::write_row(resid, to_string(kind), outcome, m, rows.ids[split.test[k]], yte[k], pred[k], yte[k] - pred[k]);
          auto mo = open_out(model_file(kind, outcome, m));
          write_model(mo, {model, outcome, m, grid[best].label()});
          note("train", to_string(kind) + " " + outcome + " month " + std::to_string(m) +
                            ": test R2 " + (r.r2 ? fixed(*r.r2) : std::string("n/a")) + ", MSE " + fixed(r.mse));
        }
        const auto& prior_map = outcomes.count({"reference_prior", outcome, m})
                                    ? outcomes.at({"reference_prior", outcome, m})
                                    : std::map<std::string, double>{};
        std::vector<std::optional<double>> prior;
        for (auto i : split.test) {
          auto it = prior_map.find(rows.ids[i]);
          prior.push_back(it == prior_map.end() ? std::nullopt : std::optional<double>(it->second));
        }
        try {
          const auto r = evaluate_seasonal_naive(prior, yte);
          csv::write_row(eval, std::string("seasonal_naive"), outcome, m, r.r2 ? csv::num(*r.r2) : std::string(), r.mse,
                         r.n, r.excluded);
        } catch (const std::invalid_argument&) {
          csv::write_row(eval, std::string("seasonal_naive"), outcome, m, std::string(), std::string(), 0, prior.size());
        }
      }
    }
    if (rows.dropped) note("train", std::to_string(rows.dropped) + " reference teams dropped for missing features");
  }

  void predict() {
    const auto ft = read_features("target");
    const auto rows = complete_rows(ft, false);
    const auto names = registry_names();
    auto o = open_out("predictions.csv");
    csv::write_row(o, "repo_id", "outcome", "month", "Y_hat");
    for (auto outcome_sv : kOutcomes) {
      const std::string outcome(outcome_sv);
      for (int m : cfg_.months) {
        const auto rel = model_file(cfg_.predictor, outcome, m);
        std::ifstream in(out_path(rel), std::ios::binary);
        if (!in) throw std::runtime_error("missing " + rel + " (run the train stage first)");
        const auto mf = read_model(in);
        const auto pred = mf.model.predict(rows.X, names);
        for (std::size_t i = 0; i < rows.ids.size(); ++i) csv::write_row(o, rows.ids[i], outcome, m, pred[i]);
      }
    }
    note("predict", std::to_string(rows.ids.size()) + " target teams predicted with " + to_string(cfg_.predictor) +
                        (rows.dropped ? ", " + std::to_string(rows.dropped) + " dropped for missing features" : ""));
  }

  struct Keyed {
    std::vector<std::string> ids;
    std::vector<double> a, b;
  };

  /// (outcome, month) -> rows of two numeric columns.
  std::map<std::pair<std::string, int>, Keyed> read_keyed(const std::string& rel, const std::string& producer,
                                                          const std::string& ca, const std::string& cb,
                                                          const std::string& model_filter = "") const {
    const auto t = read_table(rel, producer);
    const auto co = col(t, "outcome", rel), cm = col(t, "month", rel), cr = col(t, "repo_id", rel), ia = col(t, ca, rel);
    const std::size_t ib = cb.empty() ? ia : col(t, cb, rel);
    const int cmodel = t.column("model");
    std::map<std::pair<std::string, int>, Keyed> out;
    for (const auto& r : t.rows) {
      if (!model_filter.empty() && cmodel >= 0 && r.at(static_cast<std::size_t>(cmodel)) != model_filter) continue;
      auto& k = out[{r.at(co), std::stoi(r.at(cm))}];
      k.ids.push_back(r.at(cr));
      k.a.push_back(to_num(r.at(ia)));
      k.b.push_back(to_num(r.at(ib)));
    }
    return out;
  }

  void effects() {
    const auto preds = read_keyed("predictions.csv", "predict", "Y_hat", "");
    const auto resid = read_keyed("test_residuals.csv", "train", "Y", "Y_hat", to_string(cfg_.predictor));
    const auto outcomes = read_outcomes();
    auto ite = open_out("ite.csv");
    csv::write_row(ite, "repo_id", "month", "outcome", "Y", "Y_hat", "ite");
    auto conf = open_out("conformal.csv");
    csv::write_row(conf, "outcome", "month", "alpha", "n", "k", "d");
    auto ate = open_out("ate.csv");
    csv::write_row(ate, "outcome", "month", "n", "mean_ite", "sd", "se", "median", "share_beyond_d");
    auto exch = open_out("exchangeability.csv");
    csv::write_row(exch, "outcome", "month", "statistic", "p_value", "n_test", "n_target");
    nlohmann::ordered_json dist = nlohmann::ordered_json::array();
    std::vector<DistributionReport> reports;
    for (auto outcome_sv : kOutcomes) {
      const std::string outcome(outcome_sv);
      std::vector<DistributionReport> mine;
      for (int m : cfg_.months) {
        auto pit = preds.find({outcome, m});
        auto rit = resid.find({outcome, m});
        if (pit == preds.end() || pit->second.ids.empty()) throw std::runtime_error("no predictions for " + outcome + " month " + std::to_string(m));
        if (rit == resid.end()) throw std::runtime_error("no test residuals for " + outcome + " month " + std::to_string(m));
        const auto& observed = outcomes.at({"target", outcome, m});
        const auto& p = pit->second;
        std::vector<double> y;
        for (const auto& id : p.ids) {
          auto it = observed.find(id);
          if (it == observed.end()) throw std::runtime_error("no observed target outcome for " + id);
          y.push_back(it->second);
        }
        const auto recs = compute_ite(p.ids, y, p.ids, p.a, m, outcome);
        write_ite_csv_rows(ite, recs);
        std::vector<double> effects, residuals;
        for (const auto& r : recs) effects.push_back(r.ite);
        const auto& tr = rit->second;
        for (std::size_t i = 0; i < tr.a.size(); ++i) residuals.push_back(tr.a[i] - tr.b[i]);
        const auto ci = conformal_interval(residuals, cfg_.alpha);
        if (ci.unbounded())
          warn("effects", outcome + " month " + std::to_string(m) + ": " + std::to_string(ci.n) +
                              " test residuals are too few for alpha " + fixed(ci.alpha) + "; conformal d is unbounded");
        csv::write_row(conf, outcome, m, ci.alpha, ci.n, ci.k, ci.d);
        const auto s = stats::summarize(effects);
        const auto beyond = std::count_if(effects.begin(), effects.end(), [&](double v) { return std::abs(v) > ci.d; });
        csv::write_row(ate, outcome, m, s.n, s.mean, s.sd, s.se, s.median,
                       static_cast<double>(beyond) / static_cast<double>(effects.size()));
        auto rep = residual_distribution_report(tr.a, tr.b, effects, m, outcome);
        csv::write_row(exch, outcome, m, rep.ks.statistic, rep.ks.p_value, rep.ks.n_a, rep.ks.n_b);
        dist.push_back(to_json(rep));
        note("effects", outcome + " month " + std::to_string(m) + ": mean ITE " + fixed(s.mean) + ", d " +
                            (ci.unbounded() ? std::string("inf") : fixed(ci.d)) + ", KS p " + sci(rep.ks.p_value));
        mine.push_back(std::move(rep));
      }
      write_text("effects_" + outcome + ".svg", render_distribution_svg(mine, outcome));
      for (auto& r : mine) reports.push_back(std::move(r));
    }
    {
      auto o = open_out("distributions.json");
      o << dist.dump(2) << '\n';
    }
    auto box = open_out("box.csv");
    write_box_csv(box, reports);
    feature_exchangeability();
  }

  /// KS between reference and target marginals of every registry feature.
  void feature_exchangeability() {
    const auto ref = complete_rows(read_features("reference"), false);
    const auto tgt = complete_rows(read_features("target"), false);
    auto o = open_out("feature_exchangeability.csv");
    csv::write_row(o, "feature", "statistic", "p_value", "n_reference", "n_target");
    if (ref.ids.empty() || tgt.ids.empty()) return;
    std::size_t shifted = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const auto r = ks_two_sample(ref.X.column(j), tgt.X.column(j));
      csv::write_row(o, std::string(kFeatureRegistry[j].name), r.statistic, r.p_value, r.n_a, r.n_b);
      if (r.p_value < 0.01) ++shifted;
    }
    note("effects", std::to_string(shifted) + " of " + std::to_string(kFeatureCount) +
                        " feature marginals differ between reference and target at p < 0.01");
  }

  static void write_ite_csv_rows(std::ostream& out, std::span<const ITERecord> rows) {
    for (const auto& r : rows) csv::write_row(out, r.repo_id, r.month, r.outcome, r.observed, r.predicted, r.ite);
  }

  void regress() {
    const auto ft = read_features("target");
    const auto rows = complete_rows(ft, true);
    const auto all_names = registry_names();
    if (rows.ids.size() < 3) throw std::runtime_error("too few target teams with complete features");
    const auto full = spearman_matrix(rows.X, all_names);
    std::vector<std::size_t> keep;
    std::vector<std::string> dropped;
    for (std::size_t j = 0; j < kFeatureCount; ++j) (full.constant[j] ? dropped.push_back(all_names[j]) : keep.push_back(j));
    if (!dropped.empty()) {
      std::string msg = "constant features dropped before clustering:";
      for (const auto& d : dropped) msg += " " + d;
      note("regress", msg);
    }
    if (keep.empty()) throw std::runtime_error("every feature is constant over the target teams");
    Matrix Xk(rows.X.rows, keep.size());
    std::vector<std::string> kept_names;
    for (std::size_t c = 0; c < keep.size(); ++c) {
      kept_names.push_back(all_names[keep[c]]);
      for (std::size_t i = 0; i < rows.X.rows; ++i) Xk(i, c) = rows.X(i, keep[c]);
    }
    const auto corr = spearman_matrix(Xk, kept_names);
    {
      auto o = open_out("spearman.csv");
      std::vector<std::string> header{"feature"};
      header.insert(header.end(), kept_names.begin(), kept_names.end());
      csv::write_row(o, header);
      for (std::size_t i = 0; i < corr.size(); ++i) {
        std::vector<std::string> r{kept_names[i]};
        for (std::size_t j = 0; j < corr.size(); ++j) r.push_back(csv::num(corr(i, j)));
        csv::write_row(o, r);
      }
    }
    const auto sel = cluster_features(corr, cfg_.cluster_threshold, cfg_.representative_rule);
    {
      auto o = open_out("clusters.csv");
      csv::write_row(o, "cluster", "feature", "representative");
      for (std::size_t c = 0; c < sel.clusters.size(); ++c)
        for (auto f : sel.clusters[c]) csv::write_row(o, c + 1, kept_names[f], f == sel.representatives[c] ? 1 : 0);
      for (const auto& d : dropped) csv::write_row(o, std::string(), d, std::string("constant"));
    }
    std::vector<std::string> survivors;
    Matrix Xs(rows.X.rows, sel.representatives.size());
    for (std::size_t c = 0; c < sel.representatives.size(); ++c) {
      survivors.push_back(kept_names[sel.representatives[c]]);
      for (std::size_t i = 0; i < rows.X.rows; ++i) Xs(i, c) = Xk(i, sel.representatives[c]);
    }
    note("regress", std::to_string(keep.size()) + " features -> " + std::to_string(survivors.size()) + " clusters");
    {
      const auto v = vif(Xs);
      auto o = open_out("vif.csv");
      csv::write_row(o, "feature", "vif", "above_limit");
      std::size_t high = 0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        csv::write_row(o, survivors[j], v[j], v[j] > cfg_.vif_limit ? 1 : 0);
        high += v[j] > cfg_.vif_limit;
      }
      if (high) note("regress", std::to_string(high) + " surviving features exceed the VIF limit");
    }
    const Matrix Xi = with_intercept(Xs);
    std::vector<std::string> coef_names{"intercept"};
    coef_names.insert(coef_names.end(), survivors.begin(), survivors.end());
    const auto ite = read_keyed("ite.csv", "effects", "Y", "Y_hat");
    const auto resid = read_keyed("test_residuals.csv", "train", "Y", "Y_hat", to_string(cfg_.predictor));
    std::map<std::pair<std::string, int>, double> dmap;
    {
      const auto t = read_table("conformal.csv", "effects");
      const auto co = col(t, "outcome", "conformal.csv"), cm = col(t, "month", "conformal.csv"), cd = col(t, "d", "conformal.csv");
      for (const auto& r : t.rows) dmap[{r.at(co), std::stoi(r.at(cm))}] = to_num(r.at(cd));
    }
    auto boot = open_out("bootstrap.csv");
    csv::write_row(boot, "outcome", "month", "feature", "median", "lower", "upper", "significant", "iterations", "level",
                   "d", "pool_size", "n");
    auto cons = open_out("consistency.csv");
    {
      std::vector<std::string> h{"outcome", "feature"};
      for (int m : cfg_.months) h.push_back("month" + std::to_string(m));
      h.push_back("flag");
      csv::write_row(cons, h);
    }
    for (std::size_t oi = 0; oi < kOutcomes.size(); ++oi) {
      const std::string outcome(kOutcomes[oi]);
      std::map<int, BootstrapReport> by_month;
      for (int m : cfg_.months) {
        auto it = ite.find({outcome, m});
        auto rt = resid.find({outcome, m});
        auto dt = dmap.find({outcome, m});
        if (it == ite.end() || rt == resid.end() || dt == dmap.end())
          throw std::runtime_error("missing effects for " + outcome + " month " + std::to_string(m));
        std::map<std::string, std::pair<double, double>> by_id;
        for (std::size_t i = 0; i < it->second.ids.size(); ++i) by_id[it->second.ids[i]] = {it->second.a[i], it->second.b[i]};
        std::vector<double> y, yhat;
        for (const auto& id : rows.ids) {
          auto f = by_id.find(id);
          if (f == by_id.end()) throw std::runtime_error("ite.csv has no row for " + id);
          y.push_back(f->second.first);
          yhat.push_back(f->second.second);
        }
        std::vector<double> pool;
        for (std::size_t i = 0; i < rt->second.a.size(); ++i) pool.push_back(rt->second.a[i] - rt->second.b[i]);
        auto rep = bootstrap_regress(Xi, y, yhat, pool, dt->second, cfg_.bootstrap,
                                     derive_seed(cfg_.seed, "bootstrap", oi, static_cast<std::uint64_t>(m)), coef_names);
        for (const auto& c : rep.coefficients)
          csv::write_row(boot, outcome, m, c.name, c.median, c.lower, c.upper, c.significant ? 1 : 0, rep.iterations,
                         rep.level, rep.d, rep.pool_size, rep.n);
        by_month.emplace(m, std::move(rep));
      }
      const auto table = multi_month_report(by_month, cfg_.months, outcome);
      for (const auto& r : table.rows) {
        std::vector<std::string> line{outcome, r.feature};
        for (std::size_t k = 0; k < r.medians.size(); ++k)
          line.push_back(r.medians[k] ? csv::num(*r.medians[k]) + (r.significant[k] ? "*" : "") : "");
        line.push_back(r.flag);
        csv::write_row(cons, line);
      }
    }
  }

  std::map<std::string, std::map<int, BootstrapReport>> read_bootstrap() const {
    const auto t = read_table("bootstrap.csv", "regress");
    const std::string w = "bootstrap.csv";
    const auto co = col(t, "outcome", w), cm = col(t, "month", w), cf = col(t, "feature", w), cmed = col(t, "median", w),
               clo = col(t, "lower", w), chi = col(t, "upper", w), cs = col(t, "significant", w);
    std::map<std::string, std::map<int, BootstrapReport>> out;
    for (const auto& r : t.rows) {
      auto& rep = out[r.at(co)][std::stoi(r.at(cm))];
      rep.coefficients.push_back({r.at(cf), to_num(r.at(cmed)), to_num(r.at(clo)), to_num(r.at(chi)), r.at(cs) == "1"});
    }
    return out;
  }

  void report() {
    const auto fmt = cfg_.report_format;
    const std::string ext = fmt == TableFormat::csv ? "csv" : fmt == TableFormat::json ? "json" : "txt";
    std::vector<EvalReport> evals;
    {
      const auto t = read_table("eval.csv", "train");
      const std::string w = "eval.csv";
      const auto cmod = col(t, "model", w), co = col(t, "outcome", w), cm = col(t, "month", w), cr = col(t, "r2", w),
                 cmse = col(t, "mse", w), cn = col(t, "n", w), cx = col(t, "excluded", w);
      for (const auto& r : t.rows) {
        EvalReport e;
        e.model = r.at(cmod);
        e.outcome = r.at(co);
        e.month = std::stoi(r.at(cm));
        if (!r.at(cr).empty()) e.r2 = to_num(r.at(cr));
        e.mse = r.at(cmse).empty() ? std::nan("") : to_num(r.at(cmse));
        e.n = std::stoul(r.at(cn));
        e.excluded = std::stoul(r.at(cx));
        evals.push_back(e);
      }
    }
    {
      auto o = open_out("tables/model_accuracy." + ext);
      render_table(o, eval_grid(evals, "Counterfactual model accuracy on held-out reference teams"), fmt);
    }
    const auto boot = read_bootstrap();
    for (const auto& [outcome, by_month] : boot) {
      for (const auto& [m, rep] : by_month) {
        auto o = open_out("tables/coefficients_" + outcome + "_m" + std::to_string(m) + "." + ext);
        render_table(o, bootstrap_table(rep, outcome + ", month " + std::to_string(m) + ": median and 95% CI"), fmt);
      }
      auto o = open_out("tables/consistency_" + outcome + "." + ext);
      render_table(o, consistency_table(multi_month_report(by_month, cfg_.months, outcome), outcome + ": consistency across months"), fmt);
    }

    std::ostringstream s;
    s << "teamshock " << kVersion << ", seed " << cfg_.seed << "\n\n";
    s << "reference teams (" << cfg_.reference_year << "): " << read_teams("reference").size() << "\n";
    s << "target teams (" << cfg_.target_year << "): " << read_teams("target").size() << "\n";
    for (const auto& set : {"reference", "target"}) {
      const auto rows = complete_rows(read_features(set), false);
      s << set << " teams with complete features: " << rows.ids.size() << " (" << rows.dropped << " dropped)\n";
    }
    s << "\n";
    render_table(s, eval_grid(evals, "Model accuracy"), TableFormat::text);
    s << "\n";
    {
      const auto ate = read_table("ate.csv", "effects");
      const auto conf = read_table("conformal.csv", "effects");
      const auto ks = read_table("exchangeability.csv", "effects");
      ReportTable t;
      t.title = "Effects of the shock (ITE = observed - counterfactual)";
      t.columns = {"outcome", "month", "n", "mean_ite", "se", "median", "conformal_d", "share_beyond_d", "ks_stat", "ks_p"};
      for (std::size_t i = 0; i < ate.rows.size(); ++i) {
        const auto& a = ate.rows[i];
        const auto& c = conf.rows.at(i);
        const auto& k = ks.rows.at(i);
        t.rows.push_back({a[0], a[1], a[2], fixed(to_num(a[3])), fixed(to_num(a[5])), fixed(to_num(a[6])),
                          c[5] == "inf" ? "inf" : fixed(to_num(c[5])), fixed(to_num(a[7])), fixed(to_num(k[2])),
                          sci(to_num(k[3]))});
      }
      render_table(s, t, TableFormat::text);
    }
    {
      const auto fx = read_table("feature_exchangeability.csv", "effects");
      const auto cp = col(fx, "p_value", "feature_exchangeability.csv");
      std::vector<std::string> shifted;
      for (const auto& r : fx.rows)
        if (to_num(r.at(cp)) < 0.01) shifted.push_back(r.at(0));
      s << "\nfeature marginals differing between reference and target (KS p < 0.01): " << shifted.size() << " of "
        << fx.rows.size();
      for (std::size_t i = 0; i < shifted.size(); ++i) s << (i ? ", " : ": ") << shifted[i];
      s << "\n";
    }
    s << "\n";
    for (const auto& [outcome, by_month] : boot) {
      const auto table = multi_month_report(by_month, cfg_.months, outcome);
      s << outcome << ": features significant in every month:";
      bool any = false;
      for (const auto& r : table.rows)
        if (r.feature != "intercept" && (r.flag == "stable+" || r.flag == "stable-")) {
          s << " " << r.feature << " (" << r.flag << ")";
          any = true;
        }
      s << (any ? "" : " none") << "\n";
    }
    write_text("summary.txt", s.str());
    note("report", "tables written as " + ext);
  }
};

}  // namespace teamshock
