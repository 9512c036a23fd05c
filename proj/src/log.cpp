#include "bivfit/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace bivfit {
namespace {

std::atomic<LogLevel> g_level{LogLevel::Info};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;

void emit(LogLevel level, std::string_view tag, std::string_view message) {
  if (level < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << '[' << tag << "] " << message << '\n';
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level.load(); }

void log_debug(std::string_view message) { emit(LogLevel::Debug, "debug", message); }
void log_info(std::string_view message) { emit(LogLevel::Info, "info", message); }

void log_warning(std::string_view message) {
  ++g_warnings;
  emit(LogLevel::Warning, "warn", message);
}

std::size_t warning_count() { return g_warnings.load(); }
void reset_warning_count() { g_warnings = 0; }

}  // namespace bivfit
