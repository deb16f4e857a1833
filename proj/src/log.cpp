#include "xview/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <vector>

#include "xview/error.hpp"

namespace xview {

LogLevel log_level_from_env() {
  const char* env = std::getenv("XVIEW_LOG_LEVEL");
  if (!env) return LogLevel::info;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  throw ValueError("XVIEW_LOG_LEVEL must be one of error, info, debug; got '" + v + "'");
}

RunLog::RunLog() : console_level_(log_level_from_env()) {}

RunLog::RunLog(const std::string& path) : file_(path), console_level_(log_level_from_env()) {
  if (!file_) throw IoError("cannot open log file " + path);
  // Timestamp and host info live only on this header line; everything after
  // it is deterministic.
  char stamp[64] = "unknown";
  const std::time_t now = std::time(nullptr);
  if (std::tm tm{}; gmtime_r(&now, &tm))
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  const char* host = std::getenv("HOSTNAME");
  file_ << "# started_at=" << stamp << " host=" << (host ? host : "unknown") << '\n';
}

std::string RunLog::fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunLog::emit(LogLevel level, const std::string& line) {
  if (file_) file_ << line << '\n' << std::flush;
  if (level <= console_level_) {
    (level == LogLevel::error ? std::cerr : std::cout) << line << '\n' << std::flush;
  }
}

void RunLog::info(const std::string& line) { emit(LogLevel::info, line); }
void RunLog::debug(const std::string& line) { emit(LogLevel::debug, line); }
void RunLog::error(const std::string& line) { emit(LogLevel::error, "error: " + line); }

void RunLog::metric(const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string line = "METRIC";
  for (const auto& [k, v] : fields) line += " " + k + "=" + v;
  emit(LogLevel::info, line);
}

}  // namespace xview
