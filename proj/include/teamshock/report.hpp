#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamshock/csv.hpp"
#include "teamshock/features.hpp"
#include "teamshock/heterogeneity.hpp"
#include "teamshock/model_selection.hpp"

namespace teamshock {

enum class TableFormat { csv, json, text };

inline TableFormat table_format_from_string(std::string_view s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  if (s == "text") return TableFormat::text;
  throw std::invalid_argument("unknown table format '" + std::string(s) + "'");
}

/// A rendered-ready table: every cell is already text.
struct ReportTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Two significant digits, e.g. -1.2E-02.
inline std::string sci(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1E", v);
  return buf;
}

inline std::string fixed(double v, int digits = 3) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void render_table(std::ostream& out, const ReportTable& t, TableFormat format) {
  switch (format) {
    case TableFormat::csv:
      csv::write_row(out, t.columns);
      for (const auto& r : t.rows) csv::write_row(out, r);
      return;
    case TableFormat::json: {
      nlohmann::ordered_json j;
      j["title"] = t.title;
      j["columns"] = t.columns;
      auto rows = nlohmann::ordered_json::array();
      for (const auto& r : t.rows) {
        nlohmann::ordered_json o;
        for (std::size_t c = 0; c < t.columns.size(); ++c) o[t.columns[c]] = c < r.size() ? r[c] : "";
        rows.push_back(std::move(o));
      }
      j["rows"] = std::move(rows);
      out << j.dump(2) << '\n';
      return;
    }
    case TableFormat::text: {
      std::vector<std::size_t> w(t.columns.size());
      for (std::size_t c = 0; c < t.columns.size(); ++c) w[c] = t.columns[c].size();
      for (const auto& r : t.rows)
        for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
      auto line = [&](const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t c = 0; c < w.size(); ++c) {
          const std::string cell = c < cells.size() ? cells[c] : "";
          s += cell;
          if (c + 1 < w.size()) s += std::string(w[c] - cell.size() + 2, ' ');
        }
        while (!s.empty() && s.back() == ' ') s.pop_back();
        out << s << '\n';
      };
      if (!t.title.empty()) out << t.title << '\n';
      line(t.columns);
      std::size_t total = 0;
      for (auto x : w) total += x + 2;
      out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
      for (const auto& r : t.rows) line(r);
      return;
    }
  }
}

inline std::string registry_label(const std::string& name) {
  if (auto i = feature_index(name)) return std::string(kFeatureRegistry[*i].label);
  if (name == "intercept") return "Intercept";
  return name;
}

/// Median and 95% CI per coefficient; significant medians carry "*".
inline ReportTable bootstrap_table(const BootstrapReport& r, const std::string& title = "") {
  ReportTable t;
  t.title = title;
  t.columns = {"feature", "label", "median", "ci_lower", "ci_upper", "median_ci"};
  for (const auto& c : r.coefficients) {
    const std::string star = c.significant ? "*" : "";
    t.rows.push_back({c.name, registry_label(c.name), sci(c.median) + star, sci(c.lower), sci(c.upper),
                      sci(c.median) + star + " [" + sci(c.lower) + ", " + sci(c.upper) + "]"});
  }
  return t;
}

/// Model x outcome rows, one R2 and one MSE column per month.
inline ReportTable eval_grid(const std::vector<EvalReport>& reports, const std::string& title = "") {
  std::vector<int> months;
  std::vector<std::pair<std::string, std::string>> keys;  // (outcome, model) in first-seen order
  for (const auto& r : reports) {
    if (std::find(months.begin(), months.end(), r.month) == months.end()) months.push_back(r.month);
    const auto k = std::make_pair(r.outcome, r.model);
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::sort(months.begin(), months.end());
  ReportTable t;
  t.title = title;
  t.columns = {"outcome", "model"};
  for (int m : months) {
    t.columns.push_back("month" + std::to_string(m) + "_r2");
    t.columns.push_back("month" + std::to_string(m) + "_mse");
  }
  for (const auto& [outcome, model] : keys) {
    std::vector<std::string> row{outcome, model};
    for (int m : months) {
      auto it = std::find_if(reports.begin(), reports.end(),
                             [&](const EvalReport& r) { return r.outcome == outcome && r.model == model && r.month == m; });
      if (it == reports.end()) {
        row.insert(row.end(), {"", ""});
      } else {
        row.push_back(it->r2 ? fixed(*it->r2) : "");
        row.push_back(fixed(it->mse));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline ReportTable consistency_table(const ConsistencyTable& c, const std::string& title = "") {
  ReportTable t;
  t.title = title;
  t.columns = {"feature", "label"};
  for (int m : c.months) t.columns.push_back("month" + std::to_string(m));
  t.columns.push_back("flag");
  for (const auto& r : c.rows) {
    std::vector<std::string> row{r.feature, registry_label(r.feature)};
    for (std::size_t k = 0; k < r.medians.size(); ++k)
      row.push_back(r.medians[k] ? sci(*r.medians[k]) + (r.significant[k] ? "*" : "") : "");
    row.push_back(r.flag);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace teamshock
