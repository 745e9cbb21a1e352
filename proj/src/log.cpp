// SPDX-License-Identifier: Apache-2.0

#include "adalrs/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

namespace adalrs {

namespace {

spdlog::logger& logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_color_mt("adalrs");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *instance;
}

}  // namespace

void set_log_level(LogLevel level) {
  switch (level) {
    case LogLevel::Error:
      logger().set_level(spdlog::level::err);
      break;
    case LogLevel::Info:
      logger().set_level(spdlog::level::info);
      break;
    case LogLevel::Debug:
      logger().set_level(spdlog::level::debug);
      break;
  }
}

void init_logging_from_env() {
  const char* env = std::getenv("ADALRS_LOG");
  const std::string value = env ? env : "info";
  if (value == "error") {
    set_log_level(LogLevel::Error);
  } else if (value == "debug") {
    set_log_level(LogLevel::Debug);
  } else {
    set_log_level(LogLevel::Info);
    if (value != "info") logger().warn("ADALRS_LOG='{}' not recognised, using info", value);
  }
}

void log_error(std::string_view msg) { logger().error("{}", msg); }
void log_info(std::string_view msg) { logger().info("{}", msg); }
void log_debug(std::string_view msg) { logger().debug("{}", msg); }
bool debug_enabled() { return logger().should_log(spdlog::level::debug); }

}  // namespace adalrs
