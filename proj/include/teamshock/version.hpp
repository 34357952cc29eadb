#pragma once

namespace teamshock {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr int kModelFormatVersion = 1;

}  // namespace teamshock
