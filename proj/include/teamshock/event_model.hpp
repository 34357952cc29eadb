#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "teamshock/calendar.hpp"
#include "teamshock/csv.hpp"

namespace teamshock {

enum class EventType : std::uint8_t {
  push,
  pull_request_open,
  pull_request_review,
  issue,
  issue_comment,
  pr_review_comment,
  commit_comment,
  create,
  delete_ref,
  release,
  member,
  public_repo,
  wiki,
  watch,
  fork,
  star,
  other,
};

inline constexpr std::size_t kEventTypeCount = static_cast<std::size_t>(EventType::other) + 1;

enum class ActivityClass : std::uint8_t { contribution, attention, excluded };

struct EventToken {
  std::string_view token;
  EventType type;
};

/// Archive type token -> canonical event type. Anything else parses as
/// EventType::other and is excluded from activity measures.
inline constexpr std::array<EventToken, 16> kEventTokens{{
    {"PushEvent", EventType::push},
    {"PullRequestEvent", EventType::pull_request_open},
    {"PullRequestReviewEvent", EventType::pull_request_review},
    {"IssuesEvent", EventType::issue},
    {"IssueCommentEvent", EventType::issue_comment},
    {"PullRequestReviewCommentEvent", EventType::pr_review_comment},
    {"CommitCommentEvent", EventType::commit_comment},
    {"CreateEvent", EventType::create},
    {"DeleteEvent", EventType::delete_ref},
    {"ReleaseEvent", EventType::release},
    {"MemberEvent", EventType::member},
    {"PublicEvent", EventType::public_repo},
    {"GollumEvent", EventType::wiki},
    {"WatchEvent", EventType::watch},
    {"ForkEvent", EventType::fork},
    {"StarEvent", EventType::star},
}};

/// Watch and fork are attention; star and unknown tokens are excluded;
/// every other supported type counts as a contribution.
constexpr ActivityClass classify_event(EventType type) noexcept {
  switch (type) {
    case EventType::watch:
    case EventType::fork:
      return ActivityClass::attention;
    case EventType::star:
    case EventType::other:
      return ActivityClass::excluded;
    default:
      return ActivityClass::contribution;
  }
}

constexpr bool is_comment(EventType type) noexcept {
  return type == EventType::issue_comment || type == EventType::pr_review_comment ||
         type == EventType::commit_comment;
}

inline std::optional<EventType> event_type_from_token(std::string_view token) noexcept {
  for (const auto& t : kEventTokens)
    if (t.token == token) return t.type;
  return std::nullopt;
}

inline std::string_view event_type_token(EventType type) noexcept {
  for (const auto& t : kEventTokens)
    if (t.type == type) return t.token;
  return "OtherEvent";
}

inline std::string_view to_string(ActivityClass c) noexcept {
  switch (c) {
    case ActivityClass::contribution: return "contribution";
    case ActivityClass::attention: return "attention";
    case ActivityClass::excluded: return "excluded";
  }
  return "?";
}

struct Event {
  std::string repo_id;
  std::string actor_id;
  EventType type = EventType::other;
  Timestamp timestamp = 0;
  std::optional<std::string> body;

  ActivityClass activity_class() const noexcept { return classify_event(type); }
  friend bool operator==(const Event&, const Event&) = default;
};

/// Recoverable record-level failure; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Parses one newline-delimited JSON record:
///   {"type": "PushEvent", "repo": "...", "actor": "...", "ts": "2019-11-02T10:00:00Z", "body": "..."}
/// `body` is optional. Unknown type tokens yield EventType::other.
inline Event parse_event_line(std::string_view line, std::size_t line_number = 0) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError(line_number, "malformed record");
  auto str_field = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      throw ParseError(line_number, std::string("missing or non-string field '") + key + "'");
    return it->get<std::string>();
  };
  Event e;
  const auto token = str_field("type");
  e.type = event_type_from_token(token).value_or(EventType::other);
  e.repo_id = str_field("repo");
  e.actor_id = str_field("actor");
  if (e.repo_id.empty() || e.actor_id.empty())
    throw ParseError(line_number, "empty repo or actor identifier");
  const auto ts_text = str_field("ts");
  const auto ts = parse_timestamp(ts_text);
  if (!ts) throw ParseError(line_number, "bad timestamp '" + ts_text + "'");
  e.timestamp = *ts;
  if (auto it = j.find("body"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line_number, "non-string body");
    e.body = it->get<std::string>();
  }
  return e;
}

inline std::string serialize_event(const Event& e) {
  nlohmann::ordered_json j;
  j["type"] = event_type_token(e.type);
  j["repo"] = e.repo_id;
  j["actor"] = e.actor_id;
  j["ts"] = format_timestamp(e.timestamp);
  if (e.body) j["body"] = *e.body;
  return j.dump();
}

struct ScanReport {
  std::size_t records = 0;        // non-blank input lines
  std::size_t accepted = 0;       // emitted events
  std::size_t filtered = 0;       // valid but rejected by the predicate
  std::size_t skipped = 0;        // malformed records
  std::size_t unknown_types = 0;  // accepted or filtered records with an unknown type token
  std::vector<std::string> errors;  // first few parse errors

  void merge(const ScanReport& o) {
    records += o.records;
    accepted += o.accepted;
    filtered += o.filtered;
    skipped += o.skipped;
    unknown_types += o.unknown_types;
    for (const auto& e : o.errors)
      if (errors.size() < kMaxErrors) errors.push_back(e);
  }
  static constexpr std::size_t kMaxErrors = 20;
};

using EventPredicate = std::function<bool(const Event&)>;

/// Streams events from newline-delimited records. Malformed records are
/// counted and skipped; an unreadable stream is fatal.
template <typename Sink>
ScanReport scan_events(std::istream& source, const EventPredicate& predicate, Sink&& sink) {
  if (!source) throw std::runtime_error("event source is not readable");
  ScanReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(source, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.records;
    try {
      Event e = parse_event_line(line, lineno);
      const bool unknown = e.type == EventType::other;
      if (predicate && !predicate(e)) {
        ++report.filtered;
      } else {
        ++report.accepted;
        sink(std::move(e));
      }
      if (unknown) ++report.unknown_types;
    } catch (const ParseError& err) {
      ++report.skipped;
      if (report.errors.size() < ScanReport::kMaxErrors) report.errors.emplace_back(err.what());
    }
  }
  if (source.bad()) throw std::runtime_error("I/O error while reading event source");
  return report;
}

inline std::vector<Event> scan_events(std::istream& source, const EventPredicate& predicate,
                                      ScanReport* report = nullptr) {
  std::vector<Event> out;
  auto r = scan_events(source, predicate, [&](Event&& e) { out.push_back(std::move(e)); });
  if (report) *report = r;
  return out;
}

struct ActorProfile {
  std::string actor_id;
  std::int64_t account_created_day = 0;  // days since epoch, UTC
  std::optional<std::string> country;
  std::int64_t follower_count = 0;
};

struct ActorLanguage {
  std::string actor_id;
  std::optional<std::string> primary_language;
};

/// Profiles CSV: actor_id,account_created_at,country,follower_count
/// (date as YYYY-MM-DD; empty country means undisclosed).
inline std::vector<ActorProfile> read_profiles(std::istream& in) {
  const auto t = csv::read(in, "profiles");
  const int c_id = t.column("actor_id"), c_created = t.column("account_created_at"),
            c_country = t.column("country"), c_followers = t.column("follower_count");
  if (c_id < 0 || c_created < 0 || c_country < 0 || c_followers < 0)
    throw std::runtime_error(
        "profiles: header must contain actor_id,account_created_at,country,follower_count");
  std::vector<ActorProfile> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.line_numbers[r];
    ActorProfile p;
    p.actor_id = row[c_id];
    if (p.actor_id.empty()) throw ParseError(line, "profiles: empty actor_id");
    const auto created = parse_date(row[c_created]);
    if (!created) throw ParseError(line, "profiles: bad account_created_at '" + row[c_created] + "'");
    p.account_created_day = *created;
    if (!row[c_country].empty()) p.country = row[c_country];
    int followers = 0;
    if (!detail::parse_int(row[c_followers], followers))
      throw ParseError(line, "profiles: follower_count must be a non-negative integer");
    p.follower_count = followers;
    out.push_back(std::move(p));
  }
  return out;
}

/// Languages CSV: actor_id,primary_language (empty means unknown). One row per actor.
inline std::vector<ActorLanguage> read_languages(std::istream& in) {
  const auto t = csv::read(in, "languages");
  const int c_id = t.column("actor_id"), c_lang = t.column("primary_language");
  if (c_id < 0 || c_lang < 0)
    throw std::runtime_error("languages: header must contain actor_id,primary_language");
  std::vector<ActorLanguage> out;
  std::map<std::string, std::size_t> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[c_id].empty()) throw ParseError(t.line_numbers[r], "languages: empty actor_id");
    if (!seen.emplace(row[c_id], r).second)
      throw ParseError(t.line_numbers[r], "languages: duplicate actor '" + row[c_id] + "'");
    ActorLanguage l{row[c_id], std::nullopt};
    if (!row[c_lang].empty()) l.primary_language = row[c_lang];
    out.push_back(std::move(l));
  }
  return out;
}

inline void write_profiles(std::ostream& out, const std::vector<ActorProfile>& profiles) {
  out << "actor_id,account_created_at,country,follower_count\n";
  for (const auto& p : profiles)
    csv::write_row(out, p.actor_id, format_date(p.account_created_day), p.country.value_or(""),
                   p.follower_count);
}

inline void write_languages(std::ostream& out, const std::vector<ActorLanguage>& langs) {
  out << "actor_id,primary_language\n";
  for (const auto& l : langs) csv::write_row(out, l.actor_id, l.primary_language.value_or(""));
}

}  // namespace teamshock
