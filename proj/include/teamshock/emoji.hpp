#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace teamshock {

struct CodePointRange {
  char32_t first;
  char32_t last;
};

/// Code point ranges treated as emoji (Emoji_Presentation blocks plus the
/// pictographic symbol blocks commonly rendered as emoji).
inline constexpr std::array<CodePointRange, 18> kEmojiRanges{{
    {0x1F1E6, 0x1F1FF},  // regional indicators (flags)
    {0x1F300, 0x1F5FF},  // misc symbols and pictographs
    {0x1F600, 0x1F64F},  // emoticons
    {0x1F680, 0x1F6FF},  // transport and map
    {0x1F7E0, 0x1F7EB},  // coloured circles and squares
    {0x1F900, 0x1F9FF},  // supplemental symbols and pictographs
    {0x1FA70, 0x1FAFF},  // symbols and pictographs extended-A
    {0x2600, 0x26FF},    // misc symbols
    {0x2700, 0x27BF},    // dingbats
    {0x231A, 0x231B},    // watch, hourglass
    {0x23E9, 0x23F3},
    {0x23F8, 0x23FA},
    {0x2B05, 0x2B07},
    {0x2B1B, 0x2B1C},
    {0x2B50, 0x2B50},
    {0x2B55, 0x2B55},
    {0x1F004, 0x1F004},
    {0x1F0CF, 0x1F0CF},
}};

namespace detail {

/// Decodes one UTF-8 sequence at `i`; invalid bytes decode as U+FFFD.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b >> 6) != 0x2) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline bool shortcode_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '+' || c == '-';
}

}  // namespace detail

inline bool is_emoji_code_point(char32_t cp) {
  for (const auto& r : kEmojiRanges)
    if (cp >= r.first && cp <= r.last) return true;
  return false;
}

/// True when the text holds a Unicode emoji or a `:shortcode:` such as
/// `:tada:` or `:+1:`. A shortcode needs at least one letter or be `:+1:` /
/// `:-1:`, so clock times like `10:30:00` do not match.
inline bool contains_emoji(std::string_view text) {
  for (std::size_t i = 0; i < text.size();) {
    const auto b = static_cast<unsigned char>(text[i]);
    if (b >= 0x80) {
      if (is_emoji_code_point(detail::next_code_point(text, i))) return true;
      continue;
    }
    if (text[i] == ':') {
      std::size_t j = i + 1;
      bool letter = false;
      while (j < text.size() && detail::shortcode_char(text[j])) {
        letter |= text[j] >= 'a' && text[j] <= 'z';
        ++j;
      }
      if (j < text.size() && text[j] == ':' && j > i + 1) {
        const auto name = text.substr(i + 1, j - i - 1);
        if (letter || name == "+1" || name == "-1") return true;
      }
      i = j > i + 1 ? j : i + 1;
      continue;
    }
    ++i;
  }
  return false;
}

}  // namespace teamshock
