// SPDX-License-Identifier: Apache-2.0

#include "adalrs/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "adalrs/errors.hpp"
#include "adalrs/report_io.hpp"

namespace adalrs {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + value + "'");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::int64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key, "expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  const auto v = to_int(key, value);
  if (v < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + value + "'");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::string token;
  std::istringstream in(value);
  while (std::getline(in, token, value.find(',') != std::string::npos ? ',' : '-')) {
    const auto t = std::string(trim(token));
    if (t.empty()) throw ConfigError(key, "empty layer size in '" + value + "'");
    out.push_back(static_cast<std::size_t>(to_uint(key, t)));
  }
  return out;
}

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap map;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    map[key] = std::string(trim(line.substr(eq + 1)));
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(ConfigMap& map, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(assignment), "override must look like key=value");
  }
  const auto key = std::string(trim(assignment.substr(0, eq)));
  if (key.empty()) throw ConfigError(std::string(assignment), "empty key");
  map[key] = std::string(trim(assignment.substr(eq + 1)));
}

RunConfig run_config_from_map(const ConfigMap& map) {
  RunConfig cfg;
  AdaLRSConfig ada;
  bool ada_present = false;
  std::optional<bool> ada_enabled;
  std::optional<std::uint64_t> top_seed;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"scheduler.kind", [&](auto&, auto& v) { cfg.scheduler.kind = parse_schedule_kind(v); }},
      {"scheduler.base_lr", [&](auto& k, auto& v) { cfg.scheduler.base_lr = to_double(k, v); }},
      {"scheduler.total_steps",
       [&](auto& k, auto& v) { cfg.scheduler.total_steps = to_int(k, v); }},
      {"scheduler.min_lr_ratio",
       [&](auto& k, auto& v) { cfg.scheduler.min_lr_ratio = to_double(k, v); }},
      {"scheduler.wsd_decay_fraction",
       [&](auto& k, auto& v) { cfg.scheduler.wsd_decay_fraction = to_double(k, v); }},
      {"adalrs.enabled", [&](auto& k, auto& v) { ada_enabled = to_bool(k, v); }},
      {"adalrs.alpha", [&](auto& k, auto& v) { ada.alpha = to_double(k, v); }},
      {"adalrs.beta", [&](auto& k, auto& v) { ada.beta = to_double(k, v); }},
      {"adalrs.lambda", [&](auto& k, auto& v) { ada.lambda = to_double(k, v); }},
      {"adalrs.window_k", [&](auto& k, auto& v) { ada.window_k = to_int(k, v); }},
      {"adalrs.theta0", [&](auto& k, auto& v) { ada.theta0 = to_double(k, v); }},
      {"adalrs.search_start_ratio",
       [&](auto& k, auto& v) { ada.search_start_ratio = to_double(k, v); }},
      {"adalrs.search_end_ratio",
       [&](auto& k, auto& v) { ada.search_end_ratio = to_double(k, v); }},
      {"adalrs.error_multiplier",
       [&](auto& k, auto& v) { ada.error_multiplier = to_double(k, v); }},
      {"adalrs.backtracking",
       [&](auto& k, auto& v) { ada.backtracking_enabled = to_bool(k, v); }},
      {"adalrs.comparable_gap_threshold",
       [&](auto& k, auto& v) { ada.comparable_gap_threshold = to_double(k, v); }},
      {"oracle.kind", [&](auto&, auto& v) { cfg.oracle.kind = parse_oracle_kind(v); }},
      {"oracle.curvature", [&](auto& k, auto& v) { cfg.oracle.curvature = to_double(k, v); }},
      {"oracle.dim",
       [&](auto& k, auto& v) { cfg.oracle.dim = static_cast<std::size_t>(to_uint(k, v)); }},
      {"oracle.noise_std", [&](auto& k, auto& v) { cfg.oracle.noise_std = to_double(k, v); }},
      {"oracle.init_scale", [&](auto& k, auto& v) { cfg.oracle.init_scale = to_double(k, v); }},
      {"oracle.seed", [&](auto& k, auto& v) { cfg.oracle.seed = to_uint(k, v); }},
      {"oracle.mlp_sizes", [&](auto& k, auto& v) { cfg.oracle.mlp_sizes = to_sizes(k, v); }},
      {"oracle.mlp_samples",
       [&](auto& k, auto& v) { cfg.oracle.mlp_samples = static_cast<std::size_t>(to_uint(k, v)); }},
      {"oracle.batch_size",
       [&](auto& k, auto& v) { cfg.oracle.batch_size = static_cast<std::size_t>(to_uint(k, v)); }},
      {"oracle.optimizer",
       [&](auto&, auto& v) { cfg.oracle.optimizer = parse_optimizer_kind(v); }},
      {"oracle.momentum_coeff",
       [&](auto& k, auto& v) { cfg.oracle.momentum_coeff = to_double(k, v); }},
      {"seed", [&](auto& k, auto& v) { top_seed = to_uint(k, v); }},
      {"output_dir", [&](auto&, auto& v) { cfg.output_dir = v; }},
      {"report.final_window", [&](auto& k, auto& v) { cfg.final_window = to_int(k, v); }},
      {"report.eta_star", [&](auto& k, auto& v) { cfg.eta_star = to_double(k, v); }},
      {"report.band_e", [&](auto& k, auto& v) { cfg.band_e = to_double(k, v); }},
  };

  for (const auto& [key, value] : map) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown config key");
    if (key.rfind("adalrs.", 0) == 0) ada_present = true;
    it->second(key, value);
  }

  if (ada_present && ada_enabled.value_or(true)) cfg.adalrs = ada;
  cfg.seed = top_seed.value_or(cfg.oracle.seed);
  cfg.oracle.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ConfigMap run_config_to_map(const RunConfig& cfg) {
  ConfigMap m;
  const auto num = [](double x) { return format_double(x); };
  m["scheduler.kind"] = std::string(to_string(cfg.scheduler.kind));
  m["scheduler.base_lr"] = num(cfg.scheduler.base_lr);
  m["scheduler.total_steps"] = std::to_string(cfg.scheduler.total_steps);
  m["scheduler.min_lr_ratio"] = num(cfg.scheduler.min_lr_ratio);
  m["scheduler.wsd_decay_fraction"] = num(cfg.scheduler.wsd_decay_fraction);
  if (cfg.adalrs) {
    const auto& a = *cfg.adalrs;
    m["adalrs.alpha"] = num(a.alpha);
    m["adalrs.beta"] = num(a.beta);
    m["adalrs.lambda"] = num(a.lambda);
    m["adalrs.window_k"] = std::to_string(a.window_k);
    m["adalrs.theta0"] = num(a.theta0);
    m["adalrs.search_start_ratio"] = num(a.search_start_ratio);
    m["adalrs.search_end_ratio"] = num(a.search_end_ratio);
    m["adalrs.error_multiplier"] = num(a.error_multiplier);
    m["adalrs.backtracking"] = a.backtracking_enabled ? "true" : "false";
    m["adalrs.comparable_gap_threshold"] = num(a.comparable_gap_threshold);
  }
  const auto& o = cfg.oracle;
  m["oracle.kind"] = std::string(to_string(o.kind));
  m["oracle.curvature"] = num(o.curvature);
  m["oracle.dim"] = std::to_string(o.dim);
  m["oracle.noise_std"] = num(o.noise_std);
  m["oracle.init_scale"] = num(o.init_scale);
  std::string sizes;
  for (std::size_t i = 0; i < o.mlp_sizes.size(); ++i) {
    sizes += (i ? "-" : "") + std::to_string(o.mlp_sizes[i]);
  }
  m["oracle.mlp_sizes"] = sizes;
  m["oracle.mlp_samples"] = std::to_string(o.mlp_samples);
  m["oracle.batch_size"] = std::to_string(o.batch_size);
  m["oracle.optimizer"] = std::string(to_string(o.optimizer));
  m["oracle.momentum_coeff"] = num(o.momentum_coeff);
  m["seed"] = std::to_string(cfg.seed);
  m["report.final_window"] = std::to_string(cfg.final_window);
  if (cfg.eta_star) m["report.eta_star"] = num(*cfg.eta_star);
  m["report.band_e"] = num(cfg.band_e);
  return m;
}

}  // namespace adalrs
