#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "teamshock/event_model.hpp"

namespace teamshock {

using RepoIndex = std::uint32_t;
using ActorIndex = std::uint32_t;

/// Dense string -> index mapping.
class Interner {
 public:
  std::uint32_t intern(std::string_view s) {
    auto it = index_.find(std::string(s));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(s);
    index_.emplace(names_.back(), id);
    return id;
  }
  std::optional<std::uint32_t> find(std::string_view s) const {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& name(std::uint32_t id) const { return names_[id]; }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Compact event row; identifiers and bodies live in the owning Corpus.
struct EventRecord {
  RepoIndex repo;
  ActorIndex actor;
  EventType type;
  Timestamp ts;
  std::int32_t body = -1;

  ActivityClass activity_class() const noexcept { return classify_event(type); }
};

/// In-memory event log with interned identifiers. Order of events is the
/// insertion order; nothing downstream relies on it being sorted.
class Corpus {
 public:
  void add(const Event& e) {
    EventRecord r{repos_.intern(e.repo_id), actors_.intern(e.actor_id), e.type, e.timestamp, -1};
    if (e.body) {
      r.body = static_cast<std::int32_t>(bodies_.size());
      bodies_.push_back(*e.body);
    }
    events_.push_back(r);
  }

  void add(std::string_view repo, std::string_view actor, EventType type, Timestamp ts) {
    events_.push_back({repos_.intern(repo), actors_.intern(actor), type, ts, -1});
  }

  void add(RepoIndex repo, ActorIndex actor, EventType type, Timestamp ts,
           std::string body) {
    const auto b = static_cast<std::int32_t>(bodies_.size());
    bodies_.push_back(std::move(body));
    events_.push_back({repo, actor, type, ts, b});
  }

  void add(RepoIndex repo, ActorIndex actor, EventType type, Timestamp ts) {
    events_.push_back({repo, actor, type, ts, -1});
  }

  RepoIndex intern_repo(std::string_view id) { return repos_.intern(id); }
  ActorIndex intern_actor(std::string_view id) { return actors_.intern(id); }

  Event to_event(const EventRecord& r) const {
    Event e{repos_.name(r.repo), actors_.name(r.actor), r.type, r.ts, std::nullopt};
    if (r.body >= 0) e.body = bodies_[static_cast<std::size_t>(r.body)];
    return e;
  }

  std::span<const EventRecord> events() const noexcept { return events_; }
  const Interner& repos() const noexcept { return repos_; }
  const Interner& actors() const noexcept { return actors_; }
  const std::string& body(const EventRecord& r) const { return bodies_[static_cast<std::size_t>(r.body)]; }
  std::size_t size() const noexcept { return events_.size(); }
  void reserve(std::size_t n) { events_.reserve(n); }

  void write_ndjson(std::ostream& out) const {
    for (const auto& r : events_) out << serialize_event(to_event(r)) << '\n';
  }

 private:
  Interner repos_;
  Interner actors_;
  std::vector<EventRecord> events_;
  std::vector<std::string> bodies_;
};

inline Corpus load_corpus(std::istream& in, ScanReport* report = nullptr) {
  Corpus c;
  auto r = scan_events(in, nullptr, [&](Event&& e) { c.add(e); });
  if (report) *report = r;
  return c;
}

/// Actor profiles and languages keyed by corpus actor index. Actors without a
/// profile row stay absent (missingness is explicit).
class ActorDirectory {
 public:
  ActorDirectory() = default;
  ActorDirectory(const Corpus& corpus, const std::vector<ActorProfile>& profiles,
                 const std::vector<ActorLanguage>& languages) {
    const auto n = corpus.actors().size();
    profile_of_.assign(n, -1);
    language_of_.assign(n, -1);
    for (const auto& p : profiles) {
      if (auto id = corpus.actors().find(p.actor_id)) {
        profile_of_[*id] = static_cast<std::int32_t>(profiles_.size());
        profiles_.push_back(p);
      }
    }
    for (const auto& l : languages) {
      if (auto id = corpus.actors().find(l.actor_id)) {
        language_of_[*id] = static_cast<std::int32_t>(languages_.size());
        languages_.push_back(l);
      }
    }
  }

  const ActorProfile* profile(ActorIndex a) const {
    if (a >= profile_of_.size() || profile_of_[a] < 0) return nullptr;
    return &profiles_[static_cast<std::size_t>(profile_of_[a])];
  }
  const std::optional<std::string>* language(ActorIndex a) const {
    if (a >= language_of_.size() || language_of_[a] < 0) return nullptr;
    return &languages_[static_cast<std::size_t>(language_of_[a])].primary_language;
  }

 private:
  std::vector<ActorProfile> profiles_;
  std::vector<ActorLanguage> languages_;
  std::vector<std::int32_t> profile_of_;
  std::vector<std::int32_t> language_of_;
};

}  // namespace teamshock
