#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace lightsplice {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

inline std::atomic<LogLevel>& log_level() {
  static std::atomic<LogLevel> level{LogLevel::kInfo};
  return level;
}

// Line-oriented log on stderr.
inline void log_line(LogLevel level, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level().load())) return;
  std::cerr << (level == LogLevel::kDebug ? "[debug] " : "[info] ") << msg << '\n';
}

inline void log_info(std::string_view msg) { log_line(LogLevel::kInfo, msg); }
inline void log_debug(std::string_view msg) { log_line(LogLevel::kDebug, msg); }

}  // namespace lightsplice
