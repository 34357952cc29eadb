#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "teamshock/calendar.hpp"
#include "teamshock/features.hpp"
#include "teamshock/heterogeneity.hpp"
#include "teamshock/model_selection.hpp"
#include "teamshock/report.hpp"
#include "teamshock/synthetic.hpp"
#include "teamshock/timeseries.hpp"

namespace teamshock {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

// clang-format off
inline constexpr std::array<ConfigKey, 52> kConfigKeys{{
    {"events", "", "event log (NDJSON)"},
    {"profiles", "", "actor profiles CSV"},
    {"languages", "", "actor languages CSV"},
    {"output_dir", "out", "directory for all stage outputs"},
    {"seed", "42", "master seed"},
    {"reference_year", "2018", "year whose teams train the counterfactual models"},
    {"target_year", "2019", "year whose teams receive the shock"},
    {"shock_month", "2020-01", "first shocked month (YYYY-MM)"},
    {"series_start", "2017-01", "first month of the platform series and observation window"},
    {"months", "1,2,3,4,5,6", "months after the shock to analyse (subset of 1..12)"},
    {"min_active_members", "3", "members with a contribution required in every quarter"},
    {"require_push", "true", "require a push on record by year end"},
    {"forecast_horizon", "12", "months forecast after the shock boundary"},
    {"stl_trend_window", "23", "loess trend window of the decomposition"},
    {"stl_robust_iterations", "1", "robustness iterations of the decomposition"},
    {"test_fraction", "0.2", "share of reference teams held out for testing"},
    {"cv_folds", "5", "folds for hyperparameter tuning"},
    {"models", "gbdt,rf", "models trained and evaluated"},
    {"predictor", "gbdt", "model used for counterfactual predictions"},
    {"split_mode", "exact", "tree split search: exact or histogram"},
    {"gbdt_trees", "100,300", "GBDT grid: number of trees"},
    {"gbdt_learning_rate", "0.05,0.1", "GBDT grid: learning rate"},
    {"gbdt_max_depth", "3,5,7", "GBDT grid: maximum depth"},
    {"gbdt_min_samples_leaf", "5,20", "GBDT grid: minimum rows per leaf"},
    {"rf_trees", "200", "RF grid: number of trees"},
    {"rf_max_depth", "none,10", "RF grid: maximum depth (none = unlimited)"},
    {"rf_max_features", "all,sqrt", "RF grid: features per split (all, sqrt or a count)"},
    {"rf_min_samples_leaf", "5", "RF grid: minimum rows per leaf"},
    {"alpha", "0.05", "conformal miscoverage level"},
    {"cluster_threshold", "0.7", "|rho| above which features share a cluster"},
    {"representative_rule", "central", "cluster representative: central or first"},
    {"vif_limit", "10", "VIF above which a survivor is flagged"},
    {"bootstrap_iterations", "1000", "bootstrap iterations per regression"},
    {"bootstrap_level", "0.95", "percentile interval level"},
    {"bootstrap_shared_noise", "false", "one noise draw per iteration instead of per team"},
    {"report_format", "text", "table format of the report stage: text, csv or json"},
    {"synth_repos", "2000", "synthetic: teams alive at any one time"},
    {"synth_transient", "250", "synthetic: short-lived repositories per month"},
    {"synth_first", "2017-01", "synthetic: first month"},
    {"synth_last", "2020-12", "synthetic: last month"},
    {"synth_shock_month", "2020-01", "synthetic: first shocked month"},
    {"synth_ate_productivity", "-0.3", "synthetic: effect on log1p pushes"},
    {"synth_ate_size", "-0.2", "synthetic: effect on log1p active members"},
    {"synth_productivity_lag", "0", "synthetic: months before the productivity effect starts"},
    {"synth_size_lag", "3", "synthetic: months before the size effect starts"},
    {"synth_platform_shift", "0.25", "synthetic: log shift in new short-lived repositories"},
    {"synth_noise", "0.35", "synthetic: month-level log-rate noise"},
    {"synth_rate_sd", "0.8", "synthetic: cross-sectional log-rate spread"},
    {"synth_seasonal_amplitude", "0.15", "synthetic: seasonal amplitude"},
    {"synth_trend", "0.01", "synthetic: monthly log growth of short-lived repositories"},
    {"synth_planted", "", "synthetic: planted coefficients, feature:value pairs separated by commas"},
    {"synth_output", "synthetic", "synthetic: output directory"},
}};
// clang-format on

inline bool is_config_key(std::string_view k) {
  return std::any_of(kConfigKeys.begin(), kConfigKeys.end(), [&](const ConfigKey& c) { return c.name == k; });
}

/// Raw key=value settings with defaults filled in.
class Config {
 public:
  Config() {
    for (const auto& k : kConfigKeys) values_[std::string(k.name)] = std::string(k.default_value);
  }

  void set(std::string_view key, std::string_view value) {
    if (!is_config_key(key)) throw ConfigError("unknown config key '" + std::string(key) + "'");
    values_[std::string(key)] = std::string(value);
  }

  const std::string& get(std::string_view key) const {
    auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    return it->second;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Lines of `key = value`; `#` starts a comment.
  void load(std::istream& in, const std::string& what = "config") {
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(what + ":" + std::to_string(no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (!is_config_key(key)) throw ConfigError(what + ":" + std::to_string(no) + ": unknown key '" + key + "'");
      values_[key] = value;
    }
  }

  void load_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read config file " + p.string());
    load(in, p.string());
  }

  void write(std::ostream& out) const {
    for (const auto& k : kConfigKeys) out << k.name << " = " << get(k.name) << '\n';
  }

 private:
  std::map<std::string, std::string> values_;
};

namespace detail::cfg {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    auto e = s.find(',', b);
    if (e == std::string_view::npos) e = s.size();
    std::string item(s.substr(b, e - b));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
    b = e + 1;
  }
  return out;
}

inline long long to_int(std::string_view key, std::string_view v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return x;
}

inline double to_double(std::string_view key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(x))
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  return x;
}

inline bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

inline YearMonth to_month(std::string_view key, std::string_view v) {
  try {
    return YearMonth::parse(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": expected YYYY-MM, got '" + std::string(v) + "'");
  }
}

template <typename T, typename F>
std::vector<T> list(std::string_view key, std::string_view v, F conv) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(conv(key, item));
  if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
  return out;
}

}  // namespace detail::cfg

struct PipelineConfig {
  std::filesystem::path events, profiles, languages, output_dir;
  std::uint64_t seed = 42;
  int reference_year = 2018;
  int target_year = 2019;
  YearMonth shock_month{2020, 1};
  YearMonth series_start{2017, 1};
  std::vector<int> months{1, 2, 3, 4, 5, 6};
  SelectionCriteria selection;
  int forecast_horizon = 12;
  StlOptions stl;
  double test_fraction = 0.2;
  int cv_folds = 5;
  std::vector<ModelKind> models{ModelKind::gbdt, ModelKind::rf};
  ModelKind predictor = ModelKind::gbdt;
  std::vector<ModelSpec> gbdt_grid;
  std::vector<ModelSpec> rf_grid;
  double alpha = 0.05;
  double cluster_threshold = 0.7;
  RepresentativeRule representative_rule = RepresentativeRule::central;
  double vif_limit = 10.0;
  BootstrapOptions bootstrap;
  TableFormat report_format = TableFormat::text;
  SyntheticSpec synthetic;
  std::filesystem::path synthetic_output;
  Config raw;
};

/// Typed view of the settings; throws ConfigError on any invalid value.
inline PipelineConfig parse_config(const Config& c) {
  using namespace detail::cfg;
  PipelineConfig p;
  p.raw = c;
  auto str = [&](std::string_view k) { return c.get(k); };
  auto integer = [&](std::string_view k) { return to_int(k, str(k)); };
  auto real = [&](std::string_view k) { return to_double(k, str(k)); };
  p.events = str("events");
  p.profiles = str("profiles");
  p.languages = str("languages");
  p.output_dir = str("output_dir");
  if (p.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  {
    const auto s = integer("seed");
    if (s < 0) throw ConfigError("seed: must be non-negative");
    p.seed = static_cast<std::uint64_t>(s);
  }
  p.reference_year = static_cast<int>(integer("reference_year"));
  p.target_year = static_cast<int>(integer("target_year"));
  if (p.target_year <= p.reference_year) throw ConfigError("target_year must be greater than reference_year");
  p.shock_month = to_month("shock_month", str("shock_month"));
  p.series_start = to_month("series_start", str("series_start"));
  if (!(YearMonth{p.target_year, 12} < p.shock_month))
    throw ConfigError("shock_month must come after the end of target_year");
  p.months = list<int>("months", str("months"), [](std::string_view k, std::string_view v) { return static_cast<int>(to_int(k, v)); });
  for (int m : p.months)
    if (m < 1 || m > 12) throw ConfigError("months: every month must be in 1..12");
  std::sort(p.months.begin(), p.months.end());
  if (std::adjacent_find(p.months.begin(), p.months.end()) != p.months.end()) throw ConfigError("months: duplicate month");
  p.selection.year = p.reference_year;
  p.selection.min_active_members_per_quarter = static_cast<int>(integer("min_active_members"));
  if (p.selection.min_active_members_per_quarter < 1) throw ConfigError("min_active_members must be >= 1");
  p.selection.require_push_by_year_end = to_bool("require_push", str("require_push"));
  p.forecast_horizon = static_cast<int>(integer("forecast_horizon"));
  if (p.forecast_horizon < 1) throw ConfigError("forecast_horizon must be >= 1");
  p.stl.trend_window = static_cast<int>(integer("stl_trend_window"));
  p.stl.robust_iterations = static_cast<int>(integer("stl_robust_iterations"));
  if (p.stl.trend_window < 3 || p.stl.robust_iterations < 0) throw ConfigError("stl settings out of range");
  if (p.shock_month - p.series_start < 2 * p.stl.period)
    throw ConfigError("series_start must leave at least 24 months before shock_month");
  p.test_fraction = real("test_fraction");
  if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
  p.cv_folds = static_cast<int>(integer("cv_folds"));
  if (p.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  try {
    p.models = list<ModelKind>("models", str("models"), [](std::string_view, std::string_view v) { return model_kind_from_string(v); });
    p.predictor = model_kind_from_string(str("predictor"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (std::find(p.models.begin(), p.models.end(), p.predictor) == p.models.end())
    throw ConfigError("predictor must be one of the trained models");
  SplitMode mode;
  if (str("split_mode") == "exact") mode = SplitMode::exact;
  else if (str("split_mode") == "histogram") mode = SplitMode::histogram;
  else throw ConfigError("split_mode: expected exact or histogram");
  auto ints = [&](std::string_view k) {
    return list<int>(k, str(k), [](std::string_view kk, std::string_view v) { return static_cast<int>(to_int(kk, v)); });
  };
  auto reals = [&](std::string_view k) { return list<double>(k, str(k), to_double); };
  for (int trees : ints("gbdt_trees"))
    for (double lr : reals("gbdt_learning_rate"))
      for (int depth : ints("gbdt_max_depth"))
        for (int leaf : ints("gbdt_min_samples_leaf")) {
          if (trees < 1 || !(lr > 0.0 && lr <= 1.0) || depth < 1 || leaf < 1) throw ConfigError("gbdt grid value out of range");
          ModelSpec s;
          s.kind = ModelKind::gbdt;
          s.gbdt = {trees, lr, depth, leaf, mode};
          p.gbdt_grid.push_back(s);
        }
  const auto depths = list<int>("rf_max_depth", str("rf_max_depth"), [](std::string_view k, std::string_view v) {
    return v == "none" ? -1 : static_cast<int>(to_int(k, v));
  });
  const auto feats = list<int>("rf_max_features", str("rf_max_features"), [](std::string_view k, std::string_view v) {
    if (v == "all") return 0;
    if (v == "sqrt") return -1;
    const auto x = to_int(k, v);
    if (x < 1) throw ConfigError("rf_max_features: expected all, sqrt or a positive count");
    return static_cast<int>(x);
  });
  for (int trees : ints("rf_trees"))
    for (int depth : depths)
      for (int f : feats)
        for (int leaf : ints("rf_min_samples_leaf")) {
          if (trees < 1 || leaf < 1 || depth == 0 || depth < -1) throw ConfigError("rf grid value out of range");
          ModelSpec s;
          s.kind = ModelKind::rf;
          s.rf = {trees, depth, leaf, f, true, mode};
          p.rf_grid.push_back(s);
        }
  p.alpha = real("alpha");
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  p.cluster_threshold = real("cluster_threshold");
  if (!(p.cluster_threshold > 0.0 && p.cluster_threshold < 1.0)) throw ConfigError("cluster_threshold must be in (0, 1)");
  try {
    p.representative_rule = representative_rule_from_string(str("representative_rule"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  p.vif_limit = real("vif_limit");
  p.bootstrap.iterations = static_cast<int>(integer("bootstrap_iterations"));
  if (p.bootstrap.iterations < 1) throw ConfigError("bootstrap_iterations must be >= 1");
  p.bootstrap.level = real("bootstrap_level");
  if (!(p.bootstrap.level > 0.0 && p.bootstrap.level < 1.0)) throw ConfigError("bootstrap_level must be in (0, 1)");
  p.bootstrap.shared_noise = to_bool("bootstrap_shared_noise", str("bootstrap_shared_noise"));
  try {
    p.report_format = table_format_from_string(str("report_format"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  auto& s = p.synthetic;
  s.n_repos = static_cast<int>(integer("synth_repos"));
  s.transient_per_month = static_cast<int>(integer("synth_transient"));
  s.first = to_month("synth_first", str("synth_first"));
  s.last = to_month("synth_last", str("synth_last"));
  s.shock.start = to_month("synth_shock_month", str("synth_shock_month"));
  s.shock.ate_log_productivity = real("synth_ate_productivity");
  s.shock.ate_log_size = real("synth_ate_size");
  s.shock.productivity_lag = static_cast<int>(integer("synth_productivity_lag"));
  s.shock.size_lag = static_cast<int>(integer("synth_size_lag"));
  s.shock.platform_log_shift = real("synth_platform_shift");
  s.noise_scale = real("synth_noise");
  s.rate_sd = real("synth_rate_sd");
  s.seasonal_amplitude = real("synth_seasonal_amplitude");
  s.trend_slope = real("synth_trend");
  for (const auto& item : split_list(str("synth_planted"))) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("synth_planted: expected feature:value, got '" + item + "'");
    s.planted[item.substr(0, colon)] = to_double("synth_planted", item.substr(colon + 1));
  }
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  p.synthetic_output = str("synth_output");
  return p;
}

}  // namespace teamshock
