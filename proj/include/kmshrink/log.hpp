#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace kmshrink {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Verbosity from KMSHRINK_LOG (debug|info|warn|error|off); default warn.
inline LogLevel log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("KMSHRINK_LOG");
    if (!env) return LogLevel::Warn;
    std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    if (v == "warn") return LogLevel::Warn;
    if (v == "error") return LogLevel::Error;
    if (v == "off") return LogLevel::Off;
    return LogLevel::Warn;
  }();
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (level < log_threshold()) return;
  static std::mutex mu;
  const char* tag = level == LogLevel::Debug  ? "debug"
                    : level == LogLevel::Info ? "info"
                    : level == LogLevel::Warn ? "warn"
                                              : "error";
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[kmshrink " << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_message(LogLevel::Error, msg); }

}  // namespace kmshrink
