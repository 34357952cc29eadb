#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamshock/calendar.hpp"
#include "teamshock/cohort.hpp"
#include "teamshock/corpus.hpp"
#include "teamshock/csv.hpp"
#include "teamshock/event_model.hpp"
#include "teamshock/features.hpp"
#include "teamshock/random.hpp"

namespace teamshock {

struct ShockSpec {
  YearMonth start{2020, 1};
  double ate_log_productivity = -0.3;
  double ate_log_size = -0.2;
  int productivity_lag = 0;  // months after start before the productivity effect
  int size_lag = 3;
  double platform_log_shift = 0.25;  // log multiplier on new short-lived repos
};

struct SyntheticSpec {
  int n_repos = 2000;
  int transient_per_month = 250;
  YearMonth first{2017, 1};
  YearMonth last{2020, 12};
  int core_min = 3;
  double core_extra_mean = 1.5;
  double peripheral_mean = 1.5;
  double core_activity = 0.85;
  double peripheral_activity = 0.3;
  double shared_actor_share = 0.15;
  double base_log_rate = 1.6;
  double rate_sd = 0.8;
  double members_effect = 0.5;
  double drift_phi = 0.95;
  double drift_sd = 0.15;
  double seasonal_amplitude = 0.15;
  double trend_slope = 0.01;
  double noise_scale = 0.35;
  ShockSpec shock;
  std::map<std::string, double> planted;  // registry name -> coefficient on the log effect
};

inline void validate(const SyntheticSpec& s) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (s.n_repos < 1) throw std::invalid_argument("synthetic: n_repos must be >= 1");
  if (s.transient_per_month < 0) throw std::invalid_argument("synthetic: transient_per_month must be >= 0");
  if (s.last < s.first) throw std::invalid_argument("synthetic: last month precedes first month");
  if (s.shock.start <= s.first || s.last < s.shock.start)
    throw std::invalid_argument("synthetic: shock start must fall after the first month and within the window");
  if (s.core_min < 1) throw std::invalid_argument("synthetic: core_min must be >= 1");
  for (double p : {s.core_activity, s.peripheral_activity, s.shared_actor_share})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synthetic: probabilities must be in [0, 1]");
  for (double v : {s.core_extra_mean, s.peripheral_mean, s.base_log_rate, s.rate_sd, s.members_effect, s.drift_phi,
                   s.drift_sd, s.seasonal_amplitude, s.trend_slope, s.noise_scale, s.shock.ate_log_productivity,
                   s.shock.ate_log_size, s.shock.platform_log_shift})
    if (!finite(v)) throw std::invalid_argument("synthetic: non-finite scale");
  if (s.rate_sd < 0 || s.drift_sd < 0 || s.noise_scale < 0 || std::abs(s.drift_phi) >= 1.0)
    throw std::invalid_argument("synthetic: scales must be non-negative and |drift_phi| < 1");
  if (s.shock.productivity_lag < 0 || s.shock.size_lag < 0) throw std::invalid_argument("synthetic: lags must be >= 0");
  for (const auto& [name, c] : s.planted) {
    if (!feature_index(name)) throw std::invalid_argument("synthetic: planted coefficient on unknown feature '" + name + "'");
    if (!finite(c)) throw std::invalid_argument("synthetic: non-finite planted coefficient");
  }
}

struct GroundTruthRow {
  std::string repo_id;
  YearMonth month;
  std::string outcome;  // productivity or team_size
  double untreated = 0.0;  // log1p count
  double treated = 0.0;
  double ite = 0.0;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<ActorProfile> profiles;
  std::vector<ActorLanguage> languages;
  std::vector<GroundTruthRow> truth;
  std::vector<std::string> stable_repos;
  std::map<std::string, double> planted;
};

namespace detail::synth {

struct Country {
  const char* code;
  int utc_offset;
};

inline constexpr std::array<Country, 12> kCountries{{{"US", -6}, {"DE", 1}, {"CN", 8}, {"IN", 5}, {"BR", -3}, {"GB", 0},
                                                      {"FR", 1}, {"JP", 9}, {"RU", 3}, {"CA", -5}, {"AU", 10}, {"NL", 1}}};
inline constexpr std::array<const char*, 10> kLanguages{"JavaScript", "Python", "Java", "Go", "C++",
                                                        "TypeScript", "Ruby", "PHP", "C#", "Rust"};
inline constexpr std::array<const char*, 8> kPhrases{"Looks good to me", "Fixed in the latest push", "Can you rebase?",
                                                     "Thanks for the review", "Added tests for this",
                                                     "Please check the CI log", "Merged, thanks", "Nice work"};
inline constexpr std::array<const char*, 6> kEmoji{"\xF0\x9F\x8E\x89", "\xF0\x9F\x91\x8D", ":+1:", ":rocket:",
                                                   "\xF0\x9F\x98\x84", "\xE2\x9D\xA4\xEF\xB8\x8F"};

inline constexpr std::int64_t kMaxAccountAge = 6 * 365;  // days before joining
inline constexpr int kMinLifeYears = 3;
inline constexpr int kMaxLifeYears = 6;

struct Actor {
  ActorIndex index = 0;
  int utc_offset = 0;
  int work_start = 9;  // local hour
  int work_span = 9;
  double off_hours = 0.1;
  std::int64_t account_day = 0;
};

struct Slot {
  std::size_t actor = 0;  // index into Generator::actors_
  bool core = false;
  std::int64_t join_day = 0;
  double activity = 0.0;
  double weight = 1.0;
};

struct Team {
  RepoIndex repo = 0;
  std::string name;
  std::int64_t created_day = 0;
  std::int64_t end_day = 0;  // last active day
  std::vector<Slot> roster;
  std::vector<Slot> extra;  // members added only by a treatment effect
  double mu = 0.0;
  std::vector<double> drift;  // per month of the window
  double weekend = 0.3;
  double emoji = 0.1;
  double popularity = 1.0;
  double pr_ratio = 0.3;
  double issue_ratio = 0.15;
  double comment_ratio = 0.6;
};

class Generator {
 public:
  Generator(const SyntheticSpec& spec, std::uint64_t seed) : s_(spec), seed_(seed) {}

  SyntheticCorpus run() {
    validate(s_);
    out_.planted = s_.planted;
    make_freelancers();
    for (int j = 0; j < team_count(); ++j) make_team(j);
    const int n_months = s_.last - s_.first + 1;
    const int shock_pos = s_.shock.start - s_.first;
    for (int m = 0; m < shock_pos; ++m) month(m, false);
    compute_heterogeneity();
    carry_.assign(static_cast<std::size_t>(2 * n_months), 0.0);
    for (int m = shock_pos; m < n_months; ++m) month(m, true);
    for (int m = 0; m < n_months; ++m) transient(m);
    for (const auto& t : teams_) out_.stable_repos.push_back(t.name);
    return std::move(out_);
  }

 private:
  // Teams are founded at a constant rate and dissolve on 30 June after a few
  // years, so every snapshot sees the same age mix. n_repos is the number of
  // teams alive at a time.
  std::int64_t founding_begin() const { return days_from_civil(s_.shock.start.year - 9, 1, 1); }
  std::int64_t founding_end() const { return day_of(month_start(s_.shock.start)); }

  int team_count() const {
    const double mean_life = 365.25 * (kMinLifeYears + kMaxLifeYears) / 2.0;
    return std::max(1, static_cast<int>(std::lround(s_.n_repos * static_cast<double>(founding_end() - founding_begin()) / mean_life)));
  }

  std::size_t new_actor(const std::string& id, Rng& rng, std::optional<int> home_country, std::int64_t anchor_day) {
    Actor a;
    a.index = out_.corpus.intern_actor(id);
    const std::size_t c = home_country && bernoulli(rng, 0.6) ? static_cast<std::size_t>(*home_country)
                                                               : uniform_index(rng, kCountries.size());
    a.utc_offset = kCountries[c].utc_offset;
    a.work_start = 7 + static_cast<int>(uniform_index(rng, 5));
    a.work_span = 6 + static_cast<int>(uniform_index(rng, 7));
    a.off_hours = 0.02 + 0.2 * uniform01(rng);
    ActorProfile p;
    p.actor_id = id;
    p.account_created_day = anchor_day - 1 - static_cast<std::int64_t>(uniform_index(rng, kMaxAccountAge));
    a.account_day = p.account_created_day;
    if (bernoulli(rng, 0.7)) p.country = kCountries[c].code;
    p.follower_count = static_cast<std::int64_t>(std::floor(std::exp(normal(rng, 2.0, 1.5))));
    ActorLanguage l{id, std::nullopt};
    if (bernoulli(rng, 0.9)) l.primary_language = kLanguages[uniform_index(rng, kLanguages.size())];
    // First push happens in a personal repository before joining.
    const std::int64_t span = std::max<std::int64_t>(1, std::min<std::int64_t>(730, anchor_day - p.account_created_day));
    const std::int64_t first_push = p.account_created_day + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(span)));
    out_.corpus.add(out_.corpus.intern_repo(id + "/dotfiles"), a.index, EventType::push, stamp(rng, a, first_push));
    out_.profiles.push_back(std::move(p));
    out_.languages.push_back(std::move(l));
    actors_.push_back(a);
    return actors_.size() - 1;
  }

  void make_freelancers() {
    Rng rng = make_rng(seed_, "synthetic-freelancers");
    const int n = std::max(20, team_count() / 5);
    const auto span = static_cast<std::uint64_t>(founding_end() - founding_begin());
    for (int k = 0; k < n; ++k) {
      const std::int64_t anchor = founding_begin() + static_cast<std::int64_t>(uniform_index(rng, span));
      freelancers_.push_back(new_actor("f" + std::to_string(k), rng, std::nullopt, anchor));
    }
  }

  /// A freelancer whose account predates the day by at most kMaxAccountAge.
  std::optional<std::size_t> freelancer(Rng& rng, std::int64_t day) const {
    for (int tries = 0; tries < 64; ++tries) {
      const std::size_t f = freelancers_[uniform_index(rng, freelancers_.size())];
      const std::int64_t age = day - actors_[f].account_day;
      if (age > 0 && age <= kMaxAccountAge) return f;
    }
    return std::nullopt;
  }

  Timestamp stamp(Rng& rng, const Actor& a, std::int64_t day) const {
    int local = bernoulli(rng, a.off_hours) ? static_cast<int>(uniform_index(rng, 24))
                                            : a.work_start + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(a.work_span)));
    const int utc = ((local - a.utc_offset) % 24 + 24) % 24;
    return day * kSecondsPerDay + utc * 3600 + static_cast<Timestamp>(uniform_index(rng, 3600));
  }

  std::int64_t day_in_month(Rng& rng, YearMonth ym, double weekend) const {
    const std::int64_t d0 = day_of(month_start(ym));
    const auto n = static_cast<std::uint64_t>(days_in_month(ym));
    for (;;) {
      const std::int64_t d = d0 + static_cast<std::int64_t>(uniform_index(rng, n));
      if (weekday_of(d * kSecondsPerDay) < 5 || bernoulli(rng, weekend)) return d;
    }
  }

  std::string body(Rng& rng, double emoji) const {
    std::string b = kPhrases[uniform_index(rng, kPhrases.size())];
    if (bernoulli(rng, emoji)) {
      b += ' ';
      b += kEmoji[uniform_index(rng, kEmoji.size())];
    }
    return b;
  }

  void make_team(int j) {
    Rng rng = make_rng(seed_, "synthetic-team", static_cast<std::uint64_t>(j));
    Team t;
    t.name = "org" + std::to_string(j) + "/project" + std::to_string(j);
    t.repo = out_.corpus.intern_repo(t.name);
    t.created_day = founding_begin() + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(founding_end() - founding_begin())));
    const int life = kMinLifeYears + static_cast<int>(uniform_index(rng, kMaxLifeYears - kMinLifeYears + 1));
    t.end_day = days_from_civil(static_cast<int>(civil_from_days(t.created_day).year()) + life, 6, 30);
    const int home = static_cast<int>(uniform_index(rng, kCountries.size()));
    const int n_core = s_.core_min + static_cast<int>(poisson(rng, s_.core_extra_mean));
    const int n_peri = static_cast<int>(poisson(rng, s_.peripheral_mean));
    const std::int64_t peri_end = t.created_day + 365;
    for (int k = 0; k < n_core + n_peri; ++k) {
      Slot sl;
      sl.core = k < n_core;
      const std::string id = "u" + std::to_string(j) + "-" + std::to_string(k);
      const auto f = bernoulli(rng, s_.shared_actor_share) ? freelancer(rng, t.created_day) : std::nullopt;
      const bool dup = f && std::any_of(t.roster.begin(), t.roster.end(), [&](const Slot& o) { return o.actor == *f; });
      sl.actor = f && !dup ? *f : new_actor(id, rng, home, t.created_day);
      if (sl.core) {
        sl.join_day = k == 0 ? t.created_day : t.created_day + static_cast<std::int64_t>(uniform_index(rng, 180));
        sl.activity = s_.core_activity;
        sl.weight = 0.5 + uniform01(rng);
      } else {
        sl.join_day = t.created_day + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(peri_end - t.created_day)));
        sl.activity = s_.peripheral_activity;
        sl.weight = 0.1 + 0.3 * uniform01(rng);
      }
      t.roster.push_back(sl);
    }
    t.mu = s_.base_log_rate + s_.members_effect * std::log(static_cast<double>(n_core) + 0.5 * n_peri) +
           normal(rng, 0.0, s_.rate_sd);
    const int n_months = s_.last - s_.first + 1;
    const double stationary = s_.drift_sd / std::sqrt(1.0 - s_.drift_phi * s_.drift_phi);
    double a = normal(rng, 0.0, stationary);
    for (int m = 0; m < n_months; ++m) {
      t.drift.push_back(a);
      a = s_.drift_phi * a + normal(rng, 0.0, s_.drift_sd);
    }
    t.weekend = 0.05 + 0.6 * uniform01(rng);
    t.emoji = 0.5 * uniform01(rng);
    t.popularity = std::exp(normal(rng, 0.0, 1.0));
    t.pr_ratio = 0.1 + 0.4 * uniform01(rng);
    t.issue_ratio = 0.05 + 0.25 * uniform01(rng);
    t.comment_ratio = 0.2 + 0.8 * uniform01(rng);

    auto& c = out_.corpus;
    const auto& founder = actors_[t.roster.front().actor];
    c.add(t.repo, founder.index, EventType::create, stamp(rng, founder, t.created_day));
    for (const auto& sl : t.roster) {
      const auto& act = actors_[sl.actor];
      if (sl.core) c.add(t.repo, act.index, EventType::push, stamp(rng, act, sl.join_day));
      else c.add(t.repo, act.index, EventType::issue_comment, stamp(rng, act, sl.join_day), body(rng, t.emoji));
    }
    // Attention accumulated before the window, at the in-window rate.
    const std::int64_t window = std::min(day_of(month_start(s_.first)), t.end_day + 1);
    if (window > t.created_day) {
      const double months_before = static_cast<double>(window - t.created_day) / 30.4;
      const auto watches = poisson(rng, 1.2 * t.popularity * months_before);
      for (std::int64_t k = 0; k < watches; ++k) {
        const std::int64_t d = t.created_day + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(window - t.created_day)));
        c.add(t.repo, outsider(rng), k % 6 == 5 ? EventType::fork : EventType::watch,
              d * kSecondsPerDay + static_cast<Timestamp>(uniform_index(rng, kSecondsPerDay)));
      }
    }
    teams_.push_back(std::move(t));
  }

  ActorIndex outsider(Rng& rng) {
    return out_.corpus.intern_actor("w" + std::to_string(uniform_index(rng, 20000)));
  }

  double season(YearMonth ym) const {
    return 1.0 + s_.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * (ym.month - 1) / 12.0);
  }

  /// Nearest count in log1p space to target + carry; the rounding error
  /// carries over to the next team so the mean effect is preserved.
  static std::int64_t diffuse(double target, double& carry, std::int64_t min_count) {
    const double v = target + carry;
    const double c = std::expm1(v);
    const std::int64_t lo = std::max(min_count, c > 0 ? static_cast<std::int64_t>(std::floor(c)) : std::int64_t{0});
    const std::int64_t hi = lo + 1;
    const std::int64_t k =
        std::abs(std::log1p(static_cast<double>(hi)) - v) < std::abs(std::log1p(static_cast<double>(lo)) - v) ? hi : lo;
    carry = v - std::log1p(static_cast<double>(k));
    return k;
  }

  bool year_round(const Team& t) const {
    return t.created_day <= days_from_civil(s_.shock.start.year - 1, 1, 1) && t.end_day >= day_of(month_start(s_.shock.start));
  }

  void compute_heterogeneity() {
    het_.assign(teams_.size(), 0.0);
    if (s_.planted.empty()) return;
    const Quarter q = quarter_of(s_.shock.start + (-1));
    const CorpusIndex index(out_.corpus);
    const QuarterView view(index, q);
    const ActorDirectory dir(out_.corpus, out_.profiles, out_.languages);
    std::vector<FeatureVector> fv;
    for (const auto& t : teams_) fv.push_back(extract_features(index, view, dir, t.repo));
    for (const auto& [name, coef] : s_.planted) {
      const auto f = require_feature(name);
      // Centred on teams active through the whole pre-shock year.
      double sum = 0.0;
      int n = 0;
      for (std::size_t j = 0; j < teams_.size(); ++j)
        if (year_round(teams_[j]) && !fv[j].missing[f]) {
          sum += fv[j].design_value(f);
          ++n;
        }
      if (n == 0) continue;
      const double mean = sum / n;
      for (std::size_t j = 0; j < teams_.size(); ++j)
        if (!fv[j].missing[f]) het_[j] += coef * (fv[j].design_value(f) - mean);
    }
  }

  void month(int m, bool post) {
    const YearMonth ym = s_.first + m;
    const std::int64_t month_end = day_of(month_start(ym + 1)) - 1;
    const int since_shock = ym - s_.shock.start;
    const std::int64_t month_first = day_of(month_start(ym));
    for (std::size_t j = 0; j < teams_.size(); ++j) {
      auto& t = teams_[j];
      if (t.created_day > month_end || t.end_day < month_first) continue;
      Rng rng = make_rng(seed_, "synthetic-team-month", j, static_cast<std::uint64_t>(ym.index()));
      const double rate = std::exp(t.mu + t.drift[static_cast<std::size_t>(m)] + normal(rng, 0.0, s_.noise_scale)) * season(ym);
      const std::int64_t p_u = poisson(rng, rate);
      std::vector<std::size_t> active;  // roster positions
      for (std::size_t k = 0; k < t.roster.size(); ++k)
        if (t.roster[k].join_day <= month_end && bernoulli(rng, t.roster[k].activity)) active.push_back(k);
      if (p_u > 0 && active.empty()) active.push_back(0);
      const auto m_u = static_cast<std::int64_t>(active.size());
      std::int64_t p_t = p_u, m_t = m_u;
      if (post) {
        const double lu_p = std::log1p(static_cast<double>(p_u)), lu_m = std::log1p(static_cast<double>(m_u));
        const double eff_p = since_shock >= s_.shock.productivity_lag ? s_.shock.ate_log_productivity + het_[j] : 0.0;
        const double eff_m = since_shock >= s_.shock.size_lag ? s_.shock.ate_log_size + het_[j] : 0.0;
        auto& cp = carry_[static_cast<std::size_t>(2 * m)];
        auto& cm = carry_[static_cast<std::size_t>(2 * m + 1)];
        p_t = diffuse(lu_p + eff_p, cp, 0);
        m_t = diffuse(lu_m + eff_m, cm, p_t > 0 ? 1 : 0);
        const double lt_p = std::log1p(static_cast<double>(p_t)), lt_m = std::log1p(static_cast<double>(m_t));
        out_.truth.push_back({t.name, ym, "productivity", lu_p, lt_p, lt_p - lu_p});
        out_.truth.push_back({t.name, ym, "team_size", lu_m, lt_m, lt_m - lu_m});
      }
      realize(t, j, ym, rng, p_t, m_t, std::move(active));
    }
  }

  void realize(Team& t, std::size_t j, YearMonth ym, Rng& rng, std::int64_t pushes, std::int64_t members,
               std::vector<std::size_t> active) {
    std::vector<Slot> who;
    for (auto k : active) who.push_back(t.roster[k]);
    if (members < static_cast<std::int64_t>(who.size())) {
      shuffle(who.begin(), who.end(), rng);
      who.resize(static_cast<std::size_t>(members));
    } else {
      const std::int64_t month_end = day_of(month_start(ym + 1)) - 1;
      for (std::size_t k = 0; k < t.roster.size() && static_cast<std::int64_t>(who.size()) < members; ++k)
        if (t.roster[k].join_day <= month_end && std::find(active.begin(), active.end(), k) == active.end())
          who.push_back(t.roster[k]);
      for (std::size_t k = 0; k < t.extra.size() && static_cast<std::int64_t>(who.size()) < members; ++k)
        who.push_back(t.extra[k]);
      while (static_cast<std::int64_t>(who.size()) < members) {
        Slot sl;
        sl.actor = new_actor("x" + std::to_string(j) + "-" + std::to_string(t.extra.size()), rng, std::nullopt, day_of(month_start(ym)));
        sl.join_day = day_of(month_start(ym));
        sl.weight = 0.3;
        t.extra.push_back(sl);
        who.push_back(sl);
      }
    }
    auto& c = out_.corpus;
    std::vector<int> events_of(who.size(), 0);
    double total_weight = 0.0;
    for (const auto& w : who) total_weight += w.weight;
    auto pick = [&]() -> std::size_t {
      double u = uniform01(rng) * total_weight;
      for (std::size_t k = 0; k < who.size(); ++k) {
        if (u < who[k].weight) return k;
        u -= who[k].weight;
      }
      return who.size() - 1;
    };
    auto emit = [&](std::size_t k, EventType type, bool with_body) {
      const auto& a = actors_[who[k].actor];
      const Timestamp ts = stamp(rng, a, day_in_month(rng, ym, t.weekend));
      if (with_body) c.add(t.repo, a.index, type, ts, body(rng, t.emoji));
      else c.add(t.repo, a.index, type, ts);
      ++events_of[k];
    };
    if (!who.empty()) {
      for (std::int64_t k = 0; k < pushes; ++k) emit(pick(), EventType::push, false);
      const double base = static_cast<double>(pushes) + 1.0;
      for (std::int64_t k = poisson(rng, t.pr_ratio * base); k > 0; --k) emit(pick(), EventType::pull_request_open, false);
      for (std::int64_t k = poisson(rng, t.issue_ratio * base); k > 0; --k) emit(pick(), EventType::issue, false);
      for (std::int64_t k = poisson(rng, t.comment_ratio * base); k > 0; --k) {
        const double u = uniform01(rng);
        const EventType type = u < 0.6 ? EventType::issue_comment : u < 0.9 ? EventType::pr_review_comment : EventType::commit_comment;
        emit(pick(), type, true);
      }
      for (std::int64_t k = poisson(rng, 0.2); k > 0; --k) emit(pick(), bernoulli(rng, 0.5) ? EventType::create : EventType::release, false);
      for (std::size_t k = 0; k < who.size(); ++k)
        if (events_of[k] == 0) emit(k, EventType::issue_comment, true);
    }
    for (std::int64_t k = poisson(rng, t.popularity); k > 0; --k)
      c.add(t.repo, outsider(rng), EventType::watch, stamp(rng, actors_[0], day_in_month(rng, ym, 1.0)));
    for (std::int64_t k = poisson(rng, 0.2 * t.popularity); k > 0; --k)
      c.add(t.repo, outsider(rng), EventType::fork, stamp(rng, actors_[0], day_in_month(rng, ym, 1.0)));
  }

  void transient(int m) {
    const YearMonth ym = s_.first + m;
    Rng rng = make_rng(seed_, "synthetic-transient", static_cast<std::uint64_t>(ym.index()));
    double lambda = s_.transient_per_month * std::exp(s_.trend_slope * m) * season(ym);
    if (!(ym < s_.shock.start)) lambda *= std::exp(s_.shock.platform_log_shift);
    const auto n = poisson(rng, lambda);
    auto& c = out_.corpus;
    const int n_months = s_.last - s_.first + 1;
    for (std::int64_t k = 0; k < n; ++k) {
      const std::string tag = std::to_string(ym.index()) + "-" + std::to_string(k);
      const RepoIndex repo = c.intern_repo("tmp" + tag + "/scratch");
      const int n_actors = 1 + static_cast<int>(uniform_index(rng, 2));
      std::vector<ActorIndex> who;
      for (int a = 0; a < n_actors; ++a) who.push_back(c.intern_actor("t" + tag + "-" + std::to_string(a)));
      const int life = std::min(1 + static_cast<int>(uniform_index(rng, 3)), n_months - m);
      auto ts_in = [&](YearMonth mm) {
        return month_start(mm) + static_cast<Timestamp>(uniform_index(rng, static_cast<std::uint64_t>(days_in_month(mm)) * kSecondsPerDay));
      };
      c.add(repo, who[0], EventType::create, month_start(ym));
      for (int l = 0; l < life; ++l) {
        const YearMonth mm = ym + l;
        for (std::int64_t p = 1 + poisson(rng, 2.0); p > 0; --p) c.add(repo, who[uniform_index(rng, who.size())], EventType::push, ts_in(mm));
        if (bernoulli(rng, 0.3)) c.add(repo, who[uniform_index(rng, who.size())], EventType::pull_request_open, ts_in(mm));
      }
    }
  }

  const SyntheticSpec& s_;
  std::uint64_t seed_;
  SyntheticCorpus out_;
  std::vector<Actor> actors_;
  std::vector<std::size_t> freelancers_;
  std::vector<Team> teams_;
  std::vector<double> het_;
  std::vector<double> carry_;
};

}  // namespace detail::synth

/// Seeded synthetic event log with an injected shock and its ground truth.
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  return detail::synth::Generator(spec, seed).run();
}

inline void write_ground_truth(std::ostream& out, const std::vector<GroundTruthRow>& rows) {
  csv::write_row(out, "repo_id", "month", "outcome", "untreated", "treated", "ite");
  for (const auto& r : rows) csv::write_row(out, r.repo_id, r.month.str(), r.outcome, r.untreated, r.treated, r.ite);
}

inline std::vector<GroundTruthRow> read_ground_truth(std::istream& in) {
  const auto t = csv::read(in, "ground truth");
  const int c_repo = t.column("repo_id"), c_month = t.column("month"), c_out = t.column("outcome"),
            c_u = t.column("untreated"), c_t = t.column("treated"), c_ite = t.column("ite");
  if (std::min({c_repo, c_month, c_out, c_u, c_t, c_ite}) < 0) throw std::runtime_error("ground truth: missing column");
  std::vector<GroundTruthRow> rows;
  for (const auto& r : t.rows)
    rows.push_back({r[static_cast<std::size_t>(c_repo)], YearMonth::parse(r[static_cast<std::size_t>(c_month)]),
                    r[static_cast<std::size_t>(c_out)], std::stod(r[static_cast<std::size_t>(c_u)]),
                    std::stod(r[static_cast<std::size_t>(c_t)]), std::stod(r[static_cast<std::size_t>(c_ite)])});
  return rows;
}

struct SyntheticPaths {
  std::filesystem::path events, profiles, languages, truth, planted;
};

inline SyntheticPaths synthetic_paths(const std::filesystem::path& dir) {
  return {dir / "events.ndjson", dir / "profiles.csv", dir / "languages.csv", dir / "ground_truth.csv", dir / "planted.csv"};
}

inline SyntheticPaths write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& s) {
  std::filesystem::create_directories(dir);
  const auto p = synthetic_paths(dir);
  auto open = [](const std::filesystem::path& f) {
    std::ofstream o(f, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write " + f.string());
    return o;
  };
  {
    auto o = open(p.events);
    s.corpus.write_ndjson(o);
  }
  {
    auto o = open(p.profiles);
    write_profiles(o, s.profiles);
  }
  {
    auto o = open(p.languages);
    write_languages(o, s.languages);
  }
  {
    auto o = open(p.truth);
    write_ground_truth(o, s.truth);
  }
  {
    auto o = open(p.planted);
    csv::write_row(o, "feature", "coefficient");
    for (const auto& [f, c] : s.planted) csv::write_row(o, f, c);
  }
  return p;
}

}  // namespace teamshock
