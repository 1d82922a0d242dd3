#include "kernelband/log.hpp"

#include <cstdlib>
#include <iostream>

namespace kb {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("KERNELBAND_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    std::string value(env);
    if (value == "quiet") return LogLevel::kQuiet;
    if (value == "trace") return LogLevel::kTrace;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_line(LogLevel level, const std::string& message) {
  if (log_level() < level) return;
  std::cerr << message << '\n';
}

}  // namespace kb
