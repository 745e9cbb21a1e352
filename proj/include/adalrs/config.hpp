// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>

#include "adalrs/harness.hpp"

namespace adalrs {

/// Flat `key = value` pairs with dotted section keys; `#` starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::string& path);

/// Applies `key=value` on top of `map`. Throws ConfigError on a malformed pair.
void apply_override(ConfigMap& map, std::string_view assignment);

/// Builds and validates a RunConfig. Unknown keys and unparsable values
/// throw ConfigError naming the key.
RunConfig run_config_from_map(const ConfigMap& map);

/// Inverse of run_config_from_map for every key that is set.
ConfigMap run_config_to_map(const RunConfig& cfg);

}  // namespace adalrs
