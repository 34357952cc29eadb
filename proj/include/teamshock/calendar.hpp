#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teamshock {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Calendar month; `index()` is a dense ordinal usable for arithmetic.
struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  constexpr int index() const noexcept { return year * 12 + (month - 1); }
  static constexpr YearMonth from_index(int idx) noexcept {
    return {idx / 12, idx % 12 + 1};
  }
  constexpr YearMonth operator+(int months) const noexcept { return from_index(index() + months); }
  constexpr YearMonth operator-(int months) const noexcept { return from_index(index() - months); }
  constexpr int operator-(YearMonth other) const noexcept { return index() - other.index(); }
  constexpr auto operator<=>(const YearMonth&) const = default;

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }
  static YearMonth parse(std::string_view text);
};

struct Quarter {
  int year = 1970;
  int q = 1;  // 1..4

  constexpr YearMonth first_month() const noexcept { return {year, (q - 1) * 3 + 1}; }
  constexpr YearMonth last_month() const noexcept { return {year, q * 3}; }
  constexpr auto operator<=>(const Quarter&) const = default;
};

inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year_month_day{year{y}, month{m}, day{d}}}.time_since_epoch().count();
}

inline std::chrono::year_month_day civil_from_days(std::int64_t days) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

constexpr std::int64_t day_of(Timestamp ts) noexcept {
  return ts >= 0 ? ts / kSecondsPerDay : -((-ts + kSecondsPerDay - 1) / kSecondsPerDay);
}

constexpr int hour_of(Timestamp ts) noexcept {
  return static_cast<int>((ts - day_of(ts) * kSecondsPerDay) / 3600);
}

/// 0 = Monday ... 6 = Sunday.
inline int weekday_of(Timestamp ts) {
  return static_cast<int>(
      std::chrono::weekday{std::chrono::sys_days{std::chrono::days{day_of(ts)}}}.iso_encoding() - 1);
}

inline YearMonth month_of(Timestamp ts) {
  const auto ymd = civil_from_days(day_of(ts));
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month()))};
}

inline Quarter quarter_of(YearMonth ym) noexcept { return {ym.year, (ym.month - 1) / 3 + 1}; }

inline Timestamp month_start(YearMonth ym) {
  return days_from_civil(ym.year, static_cast<unsigned>(ym.month), 1) * kSecondsPerDay;
}

inline int days_in_month(YearMonth ym) {
  return static_cast<int>(days_from_civil((ym + 1).year, static_cast<unsigned>((ym + 1).month), 1) -
                          days_from_civil(ym.year, static_cast<unsigned>(ym.month), 1));
}

/// First day of the quarter, as a day number.
inline std::int64_t quarter_first_day(Quarter q) {
  const auto m = q.first_month();
  return days_from_civil(m.year, static_cast<unsigned>(m.month), 1);
}

/// Last day of the quarter, as a day number.
inline std::int64_t quarter_last_day(Quarter q) {
  const auto next = q.last_month() + 1;
  return days_from_civil(next.year, static_cast<unsigned>(next.month), 1) - 1;
}

namespace detail {

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

inline YearMonth YearMonth::parse(std::string_view text) {
  int y = 0, m = 0;
  if (text.size() != 7 || text[4] != '-' || !detail::parse_int(text.substr(0, 4), y) ||
      !detail::parse_int(text.substr(5, 2), m) || m < 1 || m > 12)
    throw std::invalid_argument("invalid year-month '" + std::string(text) + "', expected YYYY-MM");
  return {y, m};
}

/// Parses `YYYY-MM-DD`.
inline std::optional<std::int64_t> parse_date(std::string_view s) {
  int y, m, d;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), m) ||
      !detail::parse_int(s.substr(8, 2), d))
    return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd}.time_since_epoch().count();
}

/// Parses an RFC 3339 instant with second resolution: `YYYY-MM-DDTHH:MM:SS`
/// followed by `Z` or a `+HH:MM` / `-HH:MM` offset. Result is normalized to UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  if (s.size() < 20 || (s[10] != 'T' && s[10] != ' ')) return std::nullopt;
  const auto day = parse_date(s.substr(0, 10));
  if (!day) return std::nullopt;
  int hh, mm, ss;
  if (s[13] != ':' || s[16] != ':' || !detail::parse_int(s.substr(11, 2), hh) ||
      !detail::parse_int(s.substr(14, 2), mm) || !detail::parse_int(s.substr(17, 2), ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  auto rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {  // fractional seconds are truncated
    std::size_t i = 1;
    while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
    if (i == 1) return std::nullopt;
    rest.remove_prefix(i);
  }
  std::int64_t offset = 0;
  if (rest == "Z" || rest == "z") {
    offset = 0;
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    int oh, om;
    if (!detail::parse_int(rest.substr(1, 2), oh) || !detail::parse_int(rest.substr(4, 2), om) ||
        oh > 23 || om > 59)
      return std::nullopt;
    offset = (oh * 3600 + om * 60) * (rest[0] == '+' ? 1 : -1);
  } else {
    return std::nullopt;
  }
  return *day * kSecondsPerDay + hh * 3600 + mm * 60 + ss - offset;
}

inline std::string format_timestamp(Timestamp ts) {
  const auto d = day_of(ts);
  const auto ymd = civil_from_days(d);
  const auto secs = ts - d * kSecondsPerDay;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

inline std::string format_date(std::int64_t day) {
  const auto ymd = civil_from_days(day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace teamshock
