#include "cvar_reach/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace cvar_reach {
namespace {

LogLevel level_from_env() {
    const char* env = std::getenv("CVAR_REACH_LOG");
    if (env == nullptr)
        return LogLevel::warn;
    const std::string v(env);
    if (v == "debug")
        return LogLevel::debug;
    if (v == "info")
        return LogLevel::info;
    if (v == "error")
        return LogLevel::error;
    if (v == "off")
        return LogLevel::off;
    return LogLevel::warn;
}

std::atomic<LogLevel>& threshold() {
    static std::atomic<LogLevel> level{level_from_env()};
    return level;
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

constexpr const char* tag(LogLevel level) {
    switch (level) {
    case LogLevel::debug:
        return "debug";
    case LogLevel::info:
        return "info";
    case LogLevel::warn:
        return "warn";
    case LogLevel::error:
        return "error";
    case LogLevel::off:
        break;
    }
    return "";
}

} // namespace

void set_log_level(LogLevel level) { threshold().store(level); }

LogLevel log_level() { return threshold().load(); }

void log(LogLevel level, std::string_view message) {
    if (level < threshold().load() || level == LogLevel::off)
        return;
    std::lock_guard lock(sink_mutex());
    std::clog << "[cvar_reach " << tag(level) << "] " << message << '\n';
}

} // namespace cvar_reach
