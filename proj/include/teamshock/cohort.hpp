#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "teamshock/calendar.hpp"
#include "teamshock/corpus.hpp"
#include "teamshock/emoji.hpp"
#include "teamshock/features.hpp"
#include "teamshock/stats.hpp"

namespace teamshock {

struct SelectionCriteria {
  int year = 2018;
  int min_active_members_per_quarter = 3;
  bool require_push_by_year_end = true;
};

/// Per-hour count of quarter days with at least one member contribution.
using HourActivityVector = std::array<int, 24>;

/// Corpus-wide lookups shared by selection and feature extraction.
class CorpusIndex {
 public:
  explicit CorpusIndex(const Corpus& corpus) : corpus_(&corpus) {
    const auto nr = corpus.repos().size(), na = corpus.actors().size();
    by_repo_.assign(nr, {});
    first_push_day_.assign(na, kNever);
    created_day_.assign(nr, kNever);
    std::vector<std::int64_t> first_any(nr, kNever);
    std::vector<std::int64_t> first_create(nr, kNever);
    const auto events = corpus.events();
    for (std::uint32_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      by_repo_[e.repo].push_back(i);
      const auto d = day_of(e.ts);
      first_any[e.repo] = std::min(first_any[e.repo], d);
      if (e.type == EventType::create) first_create[e.repo] = std::min(first_create[e.repo], d);
      if (e.type == EventType::push) first_push_day_[e.actor] = std::min(first_push_day_[e.actor], d);
      if (e.activity_class() == ActivityClass::contribution) {
        const auto key = pair_key(e.actor, e.repo);
        auto [it, inserted] = first_contribution_day_.emplace(key, d);
        if (!inserted) it->second = std::min(it->second, d);
      }
    }
    for (std::size_t r = 0; r < nr; ++r) {
      created_day_[r] = first_create[r] != kNever ? first_create[r] : first_any[r];
      auto& v = by_repo_[r];
      std::stable_sort(v.begin(), v.end(), [&](std::uint32_t a, std::uint32_t b) { return events[a].ts < events[b].ts; });
    }
  }

  static constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

  const Corpus& corpus() const noexcept { return *corpus_; }
  std::span<const std::uint32_t> repo_events(RepoIndex r) const { return by_repo_[r]; }

  /// Events of `repo` with timestamps in [from, to).
  std::span<const std::uint32_t> repo_events(RepoIndex r, Timestamp from, Timestamp to) const {
    const auto& v = by_repo_[r];
    const auto events = corpus_->events();
    auto lo = std::lower_bound(v.begin(), v.end(), from, [&](std::uint32_t i, Timestamp t) { return events[i].ts < t; });
    auto hi = std::lower_bound(lo, v.end(), to, [&](std::uint32_t i, Timestamp t) { return events[i].ts < t; });
    return {v.data() + (lo - v.begin()), static_cast<std::size_t>(hi - lo)};
  }

  std::int64_t first_push_day(ActorIndex a) const { return first_push_day_[a]; }
  std::int64_t created_day(RepoIndex r) const { return created_day_[r]; }
  std::optional<std::int64_t> first_contribution_day(ActorIndex a, RepoIndex r) const {
    auto it = first_contribution_day_.find(pair_key(a, r));
    if (it == first_contribution_day_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static std::uint64_t pair_key(ActorIndex a, RepoIndex r) { return (std::uint64_t{a} << 32) | r; }

  const Corpus* corpus_;
  std::vector<std::vector<std::uint32_t>> by_repo_;
  std::vector<std::int64_t> first_push_day_;
  std::vector<std::int64_t> created_day_;
  std::unordered_map<std::uint64_t, std::int64_t> first_contribution_day_;
};

inline Timestamp quarter_begin_ts(Quarter q) { return quarter_first_day(q) * kSecondsPerDay; }
inline Timestamp quarter_end_ts(Quarter q) { return (quarter_last_day(q) + 1) * kSecondsPerDay; }

/// Membership within one quarter: who contributed where.
class QuarterView {
 public:
  QuarterView(const CorpusIndex& index, Quarter q) : quarter_(q) {
    const auto from = quarter_begin_ts(q), to = quarter_end_ts(q);
    std::vector<std::pair<ActorIndex, RepoIndex>> pairs;
    for (const auto& e : index.corpus().events())
      if (e.ts >= from && e.ts < to && e.activity_class() == ActivityClass::contribution)
        pairs.emplace_back(e.actor, e.repo);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    for (const auto& [a, r] : pairs) {
      ++repo_count_[a];
      members_[r].push_back(a);
    }
  }

  Quarter quarter() const noexcept { return quarter_; }
  std::span<const ActorIndex> members(RepoIndex r) const {
    auto it = members_.find(r);
    if (it == members_.end()) return {};
    return it->second;
  }
  int repos_of(ActorIndex a) const {
    auto it = repo_count_.find(a);
    return it == repo_count_.end() ? 0 : it->second;
  }

 private:
  Quarter quarter_;
  std::unordered_map<RepoIndex, std::vector<ActorIndex>> members_;  // ascending actor order
  std::unordered_map<ActorIndex, int> repo_count_;
};

/// Repos with at least `min_active_members_per_quarter` contributing members
/// in every quarter of the year and, optionally, a push on record by year end.
inline std::vector<RepoIndex> select_team_indices(const CorpusIndex& index, const SelectionCriteria& c) {
  if (c.min_active_members_per_quarter < 1)
    throw std::invalid_argument("selection: min_active_members_per_quarter must be >= 1");
  const auto& corpus = index.corpus();
  const auto nr = corpus.repos().size();
  const Timestamp year_begin = quarter_begin_ts({c.year, 1});
  const Timestamp year_end = quarter_end_ts({c.year, 4});
  std::vector<std::tuple<RepoIndex, int, ActorIndex>> keys;
  std::vector<char> pushed(nr, 0);
  for (const auto& e : corpus.events()) {
    if (e.type == EventType::push && e.ts < year_end) pushed[e.repo] = 1;
    if (e.ts < year_begin || e.ts >= year_end || e.activity_class() != ActivityClass::contribution) continue;
    keys.emplace_back(e.repo, quarter_of(month_of(e.ts)).q, e.actor);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::array<int, 4>> members(nr, {0, 0, 0, 0});
  for (const auto& [r, q, a] : keys) ++members[r][static_cast<std::size_t>(q - 1)];
  std::vector<RepoIndex> out;
  for (RepoIndex r = 0; r < nr; ++r) {
    const auto& m = members[r];
    const bool active = std::all_of(m.begin(), m.end(), [&](int k) { return k >= c.min_active_members_per_quarter; });
    if (active && (!c.require_push_by_year_end || pushed[r])) out.push_back(r);
  }
  return out;
}

inline std::vector<std::string> select_teams(const Corpus& corpus, const SelectionCriteria& c) {
  const CorpusIndex index(corpus);
  std::vector<std::string> out;
  for (auto r : select_team_indices(index, c)) out.push_back(corpus.repos().name(r));
  std::sort(out.begin(), out.end());
  return out;
}

inline double shannon_entropy(std::span<const double> counts) { return stats::shannon_entropy(counts); }

inline std::optional<double> coefficient_of_variation(std::span<const double> values) {
  return stats::coefficient_of_variation(values);
}

/// Longest circular run of hours whose active-day count is below `threshold`.
/// 24 when every hour is below it, 0 when none is.
inline int off_segment_length(const HourActivityVector& v, int threshold) {
  int below = 0;
  for (int c : v) below += c < threshold;
  if (below == 24) return 24;
  if (below == 0) return 0;
  // Start scanning just after an hour at or above threshold so runs that wrap
  // midnight are counted once.
  int start = 0;
  while (v[static_cast<std::size_t>(start)] < threshold) ++start;
  int best = 0, run = 0;
  for (int k = 1; k <= 24; ++k) {
    if (v[static_cast<std::size_t>((start + k) % 24)] < threshold) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return best;
}

inline HourActivityVector hour_activity(const CorpusIndex& index, RepoIndex repo, Quarter q) {
  const auto events = index.corpus().events();
  std::vector<std::pair<std::int64_t, int>> day_hours;
  for (auto i : index.repo_events(repo, quarter_begin_ts(q), quarter_end_ts(q))) {
    const auto& e = events[i];
    if (e.activity_class() == ActivityClass::contribution) day_hours.emplace_back(day_of(e.ts), hour_of(e.ts));
  }
  std::sort(day_hours.begin(), day_hours.end());
  day_hours.erase(std::unique(day_hours.begin(), day_hours.end()), day_hours.end());
  HourActivityVector v{};
  for (const auto& dh : day_hours) ++v[static_cast<std::size_t>(dh.second)];
  return v;
}

/// Entropy of active days per weekday; empty when the repo had no
/// contribution in the quarter.
inline std::optional<double> weekday_entropy(const CorpusIndex& index, RepoIndex repo, Quarter q) {
  const auto events = index.corpus().events();
  std::vector<std::int64_t> days;
  for (auto i : index.repo_events(repo, quarter_begin_ts(q), quarter_end_ts(q)))
    if (events[i].activity_class() == ActivityClass::contribution) days.push_back(day_of(events[i].ts));
  if (days.empty()) return std::nullopt;
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  std::array<double, 7> counts{};
  for (auto d : days) ++counts[static_cast<std::size_t>(weekday_of(d * kSecondsPerDay))];
  return stats::shannon_entropy(counts);
}

enum class TenureKind { platform, coding, team };

struct DistributionStats {
  std::optional<double> max, median, sd, cv;
};

/// max / median / sd / cv over the defined values. A singleton has sd 0 and
/// cv 0; cv is empty when the mean is not positive.
inline DistributionStats distribution_stats(std::vector<double> values) {
  DistributionStats s;
  if (values.empty()) return s;
  s.max = *std::max_element(values.begin(), values.end());
  s.median = stats::median(values);
  s.sd = stats::sample_sd(values);
  if (values.size() == 1) {
    s.cv = 0.0;
  } else {
    s.cv = stats::coefficient_of_variation(values);
  }
  return s;
}

inline DistributionStats tenure_stats(const CorpusIndex& index, const ActorDirectory& dir,
                                      std::span<const ActorIndex> members, RepoIndex repo, TenureKind kind,
                                      std::int64_t as_of_day) {
  std::vector<double> v;
  for (auto a : members) {
    std::optional<std::int64_t> since;
    switch (kind) {
      case TenureKind::platform:
        if (const auto* p = dir.profile(a)) since = p->account_created_day;
        break;
      case TenureKind::coding:
        if (index.first_push_day(a) != CorpusIndex::kNever) since = index.first_push_day(a);
        break;
      case TenureKind::team:
        since = index.first_contribution_day(a, repo);
        break;
    }
    if (since && *since <= as_of_day) v.push_back(static_cast<double>(as_of_day - *since));
  }
  return distribution_stats(std::move(v));
}

struct FeatureOptions {
  /// First month of the observation window; pushes and months before it are
  /// not counted in avg_monthly_pushes_log.
  YearMonth observation_start{2015, 1};
};

namespace detail {

inline void set_stats(FeatureVector& fv, std::string_view prefix, const DistributionStats& s) {
  const std::string p(prefix);
  fv.set(require_feature(p + "_max"), s.max);
  fv.set(require_feature(p + "_median"), s.median);
  fv.set(require_feature(p + "_sd"), s.sd);
  fv.set(require_feature(p + "_cv"), s.cv);
}

template <typename Label>
void set_diversity(FeatureVector& fv, std::string_view count_name, std::string_view entropy_name,
                   const std::vector<Label>& labels) {
  std::map<Label, double> counts;
  for (const auto& l : labels) counts[l] += 1.0;
  fv.set(require_feature(count_name), static_cast<double>(counts.size()));
  if (counts.empty()) {
    fv.set(require_feature(entropy_name), std::nullopt);
    return;
  }
  std::vector<double> c;
  for (const auto& kv : counts) c.push_back(kv.second);
  fv.set(require_feature(entropy_name), stats::shannon_entropy(c));
}

}  // namespace detail

/// Team properties of `repo` in quarter `view.quarter()`. Tenures are taken
/// as of the quarter's last day; "by year end" counts run to the same day.
inline FeatureVector extract_features(const CorpusIndex& index, const QuarterView& view, const ActorDirectory& dir,
                                      RepoIndex repo, const FeatureOptions& opt = {}) {
  const auto& corpus = index.corpus();
  if (repo >= corpus.repos().size() || index.repo_events(repo).empty())
    throw std::invalid_argument("extract_features: repository has no events");
  const Quarter q = view.quarter();
  const auto as_of = quarter_last_day(q);
  const auto q_from = quarter_begin_ts(q), q_to = quarter_end_ts(q);
  const auto events = corpus.events();
  const auto members = view.members(repo);

  FeatureVector fv;
  fv.set("n_members", static_cast<double>(members.size()));
  {
    double dedicated = 0.0, total_repos = 0.0;
    for (auto a : members) {
      const int k = view.repos_of(a);
      dedicated += k == 1;
      total_repos += k;
    }
    fv.set("n_dedicated_members", dedicated);
    fv.set(require_feature("avg_contributed_repos"),
           members.empty() ? std::nullopt : std::optional<double>(total_repos / static_cast<double>(members.size())));
  }
  detail::set_stats(fv, "platform_tenure", tenure_stats(index, dir, members, repo, TenureKind::platform, as_of));
  detail::set_stats(fv, "coding_tenure", tenure_stats(index, dir, members, repo, TenureKind::coding, as_of));
  detail::set_stats(fv, "team_tenure", tenure_stats(index, dir, members, repo, TenureKind::team, as_of));
  {
    std::vector<double> followers;
    std::vector<std::string> countries, languages;
    for (auto a : members) {
      if (const auto* p = dir.profile(a)) {
        followers.push_back(std::log1p(static_cast<double>(p->follower_count)));
        if (p->country) countries.push_back(*p->country);
      }
      if (const auto* l = dir.language(a); l && *l) languages.push_back(**l);
    }
    detail::set_stats(fv, "followers_log1p", distribution_stats(std::move(followers)));
    detail::set_diversity(fv, "n_countries", "country_entropy", countries);
    detail::set_diversity(fv, "n_languages", "language_entropy", languages);
  }
  {
    const auto hours = hour_activity(index, repo, q);
    std::array<double, 24> h{};
    double total = 0.0;
    for (std::size_t i = 0; i < 24; ++i) total += h[i] = hours[i];
    fv.set(require_feature("hour_entropy"), total > 0 ? std::optional<double>(stats::shannon_entropy(h)) : std::nullopt);
    fv.set("off_segment_len_16", off_segment_length(hours, 16));
    fv.set("off_segment_len_32", off_segment_length(hours, 32));
    fv.set("off_segment_len_64", off_segment_length(hours, 64));
    fv.set(require_feature("weekday_entropy"), weekday_entropy(index, repo, q));
  }
  double comments = 0, with_body = 0, with_emoji = 0, q_push = 0, q_pr = 0, q_issue = 0, q_watch = 0, q_fork = 0;
  for (auto i : index.repo_events(repo, q_from, q_to)) {
    const auto& e = events[i];
    if (is_comment(e.type)) {
      ++comments;
      if (e.body >= 0) {
        ++with_body;
        with_emoji += contains_emoji(corpus.body(e));
      }
    }
    q_push += e.type == EventType::push;
    q_pr += e.type == EventType::pull_request_open;
    q_issue += e.type == EventType::issue;
    q_watch += e.type == EventType::watch;
    q_fork += e.type == EventType::fork;
  }
  fv.set("n_comments_log1p", std::log1p(comments));
  fv.set(require_feature("emoji_post_proportion"),
         with_body > 0 ? std::optional<double>(with_emoji / with_body) : std::nullopt);
  fv.set("repo_age_days", static_cast<double>(as_of - index.created_day(repo)));
  fv.set("q4_pushes_log1p", std::log1p(q_push));
  fv.set("q4_pull_requests_log1p", std::log1p(q_pr));
  fv.set("q4_issues_log1p", std::log1p(q_issue));
  fv.set("q4_watches_log1p", std::log1p(q_watch));
  fv.set("q4_forks_log1p", std::log1p(q_fork));
  {
    const auto created = month_of(index.created_day(repo) * kSecondsPerDay);
    const YearMonth from = std::max(created, opt.observation_start);
    const YearMonth to = q.last_month();
    double pushes = 0, watches = 0, forks = 0;
    const Timestamp window_begin = month_start(from);
    for (auto i : index.repo_events(repo, std::numeric_limits<Timestamp>::min(), q_to)) {
      const auto& e = events[i];
      pushes += e.type == EventType::push && e.ts >= window_begin;
      watches += e.type == EventType::watch;
      forks += e.type == EventType::fork;
    }
    const int months = to - from + 1;
    fv.set(require_feature("avg_monthly_pushes_log"),
           months > 0 ? std::optional<double>(std::log1p(pushes / months)) : std::nullopt);
    fv.set("all_watches_log1p", std::log1p(watches));
    fv.set("all_forks_log1p", std::log1p(forks));
  }
  return fv;
}

/// Month-level outcomes of one repository.
struct MonthOutcome {
  double pushes = 0.0;
  double members = 0.0;
};

/// Push counts and active-member counts for the given repos over [first, last].
inline std::vector<std::vector<MonthOutcome>> monthly_outcomes(const CorpusIndex& index, std::span<const RepoIndex> repos,
                                                               YearMonth first, YearMonth last) {
  const auto events = index.corpus().events();
  const int n = last - first + 1;
  std::vector<std::vector<MonthOutcome>> out(repos.size(), std::vector<MonthOutcome>(static_cast<std::size_t>(std::max(n, 0))));
  for (std::size_t k = 0; k < repos.size(); ++k) {
    std::vector<std::pair<int, ActorIndex>> active;
    for (auto i : index.repo_events(repos[k], month_start(first), month_start(last + 1))) {
      const auto& e = events[i];
      if (e.activity_class() != ActivityClass::contribution) continue;
      const int m = month_of(e.ts) - first;
      if (e.type == EventType::push) out[k][static_cast<std::size_t>(m)].pushes += 1;
      active.emplace_back(m, e.actor);
    }
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    for (const auto& [m, a] : active) out[k][static_cast<std::size_t>(m)].members += 1;
  }
  return out;
}

}  // namespace teamshock
