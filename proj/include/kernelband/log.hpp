#pragma once

#include <sstream>
#include <string>

namespace kb {

// Log level comes from KERNELBAND_LOG={quiet|info|trace}; default info.
enum class LogLevel { kQuiet = 0, kInfo = 1, kTrace = 2 };

LogLevel log_level();
void log_line(LogLevel level, const std::string& message);

template <typename... Args>
void log_info(const Args&... args) {
  if (log_level() < LogLevel::kInfo) return;
  std::ostringstream os;
  (os << ... << args);
  log_line(LogLevel::kInfo, os.str());
}

template <typename... Args>
void log_trace(const Args&... args) {
  if (log_level() < LogLevel::kTrace) return;
  std::ostringstream os;
  (os << ... << args);
  log_line(LogLevel::kTrace, os.str());
}

}  // namespace kb
