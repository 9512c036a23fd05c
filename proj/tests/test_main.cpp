#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "bivfit/log.hpp"

int main(int argc, char** argv) {
  bivfit::set_log_level(bivfit::LogLevel::Silent);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
