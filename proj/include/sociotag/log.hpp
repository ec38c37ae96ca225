#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>

namespace sociotag::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline Level parse_level(std::string_view s) {
  if (s == "debug") return Level::debug;
  if (s == "info") return Level::info;
  if (s == "warn" || s == "warning") return Level::warn;
  if (s == "error") return Level::error;
  if (s == "off") return Level::off;
  return Level::warn;
}

// Threshold is read once from SOCIOTAG_LOG (default: warn).
inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("SOCIOTAG_LOG");
    return env ? parse_level(env) : Level::warn;
  }();
  return level;
}

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream os;
  os << "[sociotag " << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template <typename... Args>
void debug(const Args&... args) { write(Level::debug, "debug", args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::info, "info", args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::warn, "warn", args...); }
template <typename... Args>
void error(const Args&... args) { write(Level::error, "error", args...); }

}  // namespace sociotag::log
