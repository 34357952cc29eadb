#pragma once

#include <array>
#include <bitset>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teamshock {

/// Transform applied when a registry entry becomes a regression design column.
enum class DesignTransform { identity, log1p };

struct FeatureSpec {
  std::string_view name;   // canonical registry / CSV header name
  std::string_view label;  // row label in regression tables
  std::string_view unit;
  std::string_view transform;  // how the stored value was derived
  DesignTransform design = DesignTransform::identity;
};

// clang-format off
inline constexpr std::array<FeatureSpec, 39> kFeatureRegistry{{
    {"n_members", "log(members+1)", "count", "members with a contribution in the quarter", DesignTransform::log1p},
    {"n_dedicated_members", "log(dedicated members+1)", "count", "members contributing to no other repository in the quarter", DesignTransform::log1p},
    {"avg_contributed_repos", "Avg. contributed repositories", "count", "mean distinct repositories per member in the quarter"},
    {"platform_tenure_max", "Max. of platform tenures", "days", "days since account creation"},
    {"platform_tenure_median", "Med. of platform tenures", "days", "days since account creation"},
    {"platform_tenure_sd", "SD of platform tenures", "days", "sample standard deviation"},
    {"platform_tenure_cv", "CV of platform tenures", "ratio", "sample sd / mean"},
    {"coding_tenure_max", "Max. of coding tenures", "days", "days since first push anywhere"},
    {"coding_tenure_median", "Med. of coding tenures", "days", "days since first push anywhere"},
    {"coding_tenure_sd", "SD of coding tenures", "days", "sample standard deviation"},
    {"coding_tenure_cv", "CV of coding tenures", "ratio", "sample sd / mean"},
    {"team_tenure_max", "Max. of team tenures", "days", "days since first contribution to the repository"},
    {"team_tenure_median", "Med. of team tenures", "days", "days since first contribution to the repository"},
    {"team_tenure_sd", "SD of team tenures", "days", "sample standard deviation"},
    {"team_tenure_cv", "CV of team tenures", "ratio", "sample sd / mean"},
    {"followers_log1p_max", "Max. of log(followers+1)", "log count", "log1p(followers)"},
    {"followers_log1p_median", "Med. of log(followers+1)", "log count", "log1p(followers)"},
    {"followers_log1p_sd", "SD of log(followers+1)", "log count", "sample standard deviation of log1p(followers)"},
    {"followers_log1p_cv", "CV of log(followers+1)", "ratio", "sample sd / mean of log1p(followers)"},
    {"n_countries", "Unique countries", "count", "distinct disclosed countries"},
    {"country_entropy", "Entropy of countries", "nats", "Shannon entropy over disclosed countries"},
    {"n_languages", "Unique program. lang.", "count", "distinct primary languages"},
    {"language_entropy", "Entropy of program. lang.", "nats", "Shannon entropy over primary languages"},
    {"hour_entropy", "Entropy of working hours", "nats", "entropy of the 24-hour active-day vector"},
    {"off_segment_len_16", "Len. off segment (TH=16)", "hours", "longest circular run of hours active on < 16 days"},
    {"off_segment_len_32", "Len. off segment (TH=32)", "hours", "longest circular run of hours active on < 32 days"},
    {"off_segment_len_64", "Len. off segment (TH=64)", "hours", "longest circular run of hours active on < 64 days"},
    {"weekday_entropy", "Entropy of working days", "nats", "entropy of active days per weekday"},
    {"n_comments_log1p", "log(comments+1)", "log count", "log1p(issue, pull request and commit comments)"},
    {"emoji_post_proportion", "Prop. emoji posts", "ratio", "comment posts with an emoji / comment posts with a body"},
    {"repo_age_days", "Days since created", "days", "days from creation to the last day of the year"},
    {"q4_pushes_log1p", "log(pushes+1)", "log count", "log1p(pushes in the quarter)"},
    {"q4_pull_requests_log1p", "log(pull requests+1)", "log count", "log1p(opened pull requests in the quarter)"},
    {"q4_issues_log1p", "log(issues+1)", "log count", "log1p(issue events in the quarter)"},
    {"avg_monthly_pushes_log", "Avg. monthly push, log scale", "log count", "ln(1 + pushes by year end / observed months)"},
    {"all_watches_log1p", "log(all watches+1)", "log count", "log1p(watches by year end)"},
    {"all_forks_log1p", "log(all forks+1)", "log count", "log1p(forks by year end)"},
    {"q4_watches_log1p", "log(recent watches+1)", "log count", "log1p(watches in the quarter)"},
    {"q4_forks_log1p", "log(recent forks+1)", "log count", "log1p(forks in the quarter)"},
}};
// clang-format on

inline constexpr std::size_t kFeatureCount = kFeatureRegistry.size();

constexpr std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (kFeatureRegistry[i].name == name) return i;
  return std::nullopt;
}

inline std::size_t require_feature(std::string_view name) {
  if (auto i = feature_index(name)) return *i;
  throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

/// One team-quarter row of the registry. Missing entries hold NaN and are
/// flagged in the mask; nothing is zero-filled.
struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::bitset<kFeatureCount> missing;

  FeatureVector() { missing.set(); values.fill(std::nan("")); }

  void set(std::size_t i, double v) {
    if (std::isfinite(v)) {
      values[i] = v;
      missing.reset(i);
    } else {
      values[i] = std::nan("");
      missing.set(i);
    }
  }
  void set(std::size_t i, std::optional<double> v) {
    if (v) set(i, *v);
    else { values[i] = std::nan(""); missing.set(i); }
  }
  void set(std::string_view name, double v) { set(require_feature(name), v); }

  double operator[](std::size_t i) const { return values[i]; }
  double get(std::string_view name) const { return values[require_feature(name)]; }
  bool complete() const { return missing.none(); }

  /// Value as used in a regression design row.
  double design_value(std::size_t i) const {
    return kFeatureRegistry[i].design == DesignTransform::log1p ? std::log1p(values[i]) : values[i];
  }
};

}  // namespace teamshock
