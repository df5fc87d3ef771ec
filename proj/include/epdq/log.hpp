#ifndef EPDQ_LOG_HPP
#define EPDQ_LOG_HPP

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace epdq {

/// Raised on malformed or inconsistent input data (maps to CLI exit code 3).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

namespace detail {
inline LogLevel& log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("EPDQ_LOG");
    if (env == nullptr) return LogLevel::warn;
    if (std::strcmp(env, "off") == 0) return LogLevel::off;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}
}  // namespace detail

template <typename... Args>
void log(LogLevel level, const char* fmt, Args... args) {
  if (level > detail::log_level()) return;
  const char* tag = level == LogLevel::error  ? "error"
                    : level == LogLevel::warn ? "warn"
                    : level == LogLevel::info ? "info"
                                              : "debug";
  std::fprintf(stderr, "[epdq %s] ", tag);
  if constexpr (sizeof...(Args) == 0)
    std::fputs(fmt, stderr);
  else
    std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

}  // namespace epdq

#endif  // EPDQ_LOG_HPP
