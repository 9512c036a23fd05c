#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bivfit {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { Debug = 0, Info = 1, Warning = 2, Silent = 3 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_debug(std::string_view message);
void log_info(std::string_view message);
void log_warning(std::string_view message);

/// Number of warnings emitted since process start (or the last reset).
std::size_t warning_count();
void reset_warning_count();

}  // namespace bivfit
