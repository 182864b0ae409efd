#pragma once

#include <string_view>

namespace cvar_reach {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

/// Process-wide threshold. Defaults to `warn`, or to the value of the
/// CVAR_REACH_LOG environment variable (debug|info|warn|error|off).
void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes one line to stderr if `level` passes the threshold. Thread-safe.
void log(LogLevel level, std::string_view message);

} // namespace cvar_reach
