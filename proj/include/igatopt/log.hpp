#ifndef IGATOPT_LOG_HPP
#define IGATOPT_LOG_HPP

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace igatopt {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from IGA_TOPOPT_LOG (quiet|warn|info|debug), default warn.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("IGA_TOPOPT_LOG");
    if (!env) return LogLevel::Warn;
    if (std::strcmp(env, "quiet") == 0) return LogLevel::Quiet;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

template <typename... Args>
void log_warn(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::Warn) {
    std::fprintf(stderr, "[warn] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::Info) {
    std::fprintf(stderr, "[info] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

}  // namespace igatopt

#endif  // IGATOPT_LOG_HPP
