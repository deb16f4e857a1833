// Line-oriented run logging. Each run writes a log file whose first line is
// a '#'-prefixed header (timestamp, host — the only nondeterministic line);
// every following line is deterministic. Metric lines carry a stable
// "METRIC " prefix with key=value fields so training traces are machine
// checkable. Console verbosity follows XVIEW_LOG_LEVEL (error|info|debug).

#ifndef XVIEW_LOG_HPP
#define XVIEW_LOG_HPP

#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace xview {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level_from_env();

class RunLog {
 public:
  // Console-only log.
  RunLog();
  // Console plus file at `path` (header line written immediately).
  explicit RunLog(const std::string& path);

  void info(const std::string& line);
  void debug(const std::string& line);
  void error(const std::string& line);

  // "METRIC key=value ..." with doubles at full round-trip precision, keys
  // in the given order.
  void metric(const std::vector<std::pair<std::string, std::string>>& fields);

  static std::string fmt(double v);

 private:
  void emit(LogLevel level, const std::string& line);

  std::ofstream file_;
  LogLevel console_level_;
};

}  // namespace xview

#endif  // XVIEW_LOG_HPP
