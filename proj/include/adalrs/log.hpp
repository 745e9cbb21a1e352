// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace adalrs {

enum class LogLevel { Error, Info, Debug };

/// Reads ADALRS_LOG (error|info|debug, default info).
void init_logging_from_env();
void set_log_level(LogLevel level);

void log_error(std::string_view msg);
void log_info(std::string_view msg);
void log_debug(std::string_view msg);
bool debug_enabled();

}  // namespace adalrs
