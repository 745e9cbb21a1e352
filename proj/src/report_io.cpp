// SPDX-License-Identifier: Apache-2.0

#include "adalrs/report_io.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "adalrs/config.hpp"
#include "adalrs/errors.hpp"

namespace adalrs {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw InternalError("format_double: to_chars failed");
  return std::string(buf.data(), ptr);
}

namespace {

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T out{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InputError("trace csv line " + std::to_string(line_no) + ": bad field '" +
                     std::string(field) + "'");
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

json opt_double(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.step << ',' << format_double(r.base_lr) << ',' << format_double(r.scale) << ','
        << format_double(r.effective_lr) << ',' << format_double(r.loss) << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw InputError("trace csv: missing header '" + std::string(kTraceHeader) + "'");
  }
  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<std::string_view, 5> fields;
    std::size_t start = 0;
    for (std::size_t f = 0; f < 5; ++f) {
      const auto comma = line.find(',', start);
      if ((comma == std::string::npos) != (f == 4)) {
        throw InputError("trace csv line " + std::to_string(line_no) + ": expected 5 fields");
      }
      const auto end = f == 4 ? line.size() : comma;
      fields[f] = std::string_view(line).substr(start, end - start);
      start = end + 1;
    }
    TraceRecord r;
    r.step = parse_field<std::int64_t>(fields[0], line_no);
    r.base_lr = parse_field<double>(fields[1], line_no);
    r.scale = parse_field<double>(fields[2], line_no);
    r.effective_lr = parse_field<double>(fields[3], line_no);
    r.loss = parse_field<double>(fields[4], line_no);
    out.push_back(r);
  }
  return out;
}

std::string events_to_json(const std::vector<AdjustmentEvent>& events) {
  json arr = json::array();
  for (const auto& ev : events) {
    arr.push_back({{"step", ev.step},
                   {"kind", std::string(to_string(ev.kind))},
                   {"old_scale", ev.old_scale},
                   {"new_scale", ev.new_scale},
                   {"v_before", ev.v_before},
                   {"v_after", opt_double(ev.v_after)}});
  }
  return arr.dump(2) + "\n";
}

std::vector<AdjustmentEvent> events_from_json(const std::string& text) {
  std::vector<AdjustmentEvent> out;
  try {
    for (const auto& j : json::parse(text)) {
      AdjustmentEvent ev;
      ev.step = j.at("step").get<std::int64_t>();
      ev.kind = parse_event_kind(j.at("kind").get<std::string>());
      ev.old_scale = j.at("old_scale").get<double>();
      ev.new_scale = j.at("new_scale").get<double>();
      ev.v_before = j.at("v_before").get<double>();
      if (!j.at("v_after").is_null()) ev.v_after = j.at("v_after").get<double>();
      out.push_back(ev);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("events json: ") + e.what());
  }
  return out;
}

std::string report_to_json(const RunReport& report) {
  json j;
  json cfg = json::object();
  for (const auto& [k, v] : run_config_to_map(report.config)) cfg[k] = v;
  j["config"] = cfg;
  j["adalrs_enabled"] = report.config.adalrs.has_value();
  j["steps_executed"] = report.trace.size();
  j["final_loss"] = report.final_loss;
  j["final_scale"] = report.final_scale;
  j["final_effective_lr"] = report.final_effective_lr;
  j["adjustment_count"] = report.adjustment_count;
  j["event_count"] = report.events.size();
  j["diverged"] = report.diverged;
  j["diverged_step"] = report.diverged_step ? json(*report.diverged_step) : json(nullptr);
  j["recovered_divergences"] = report.recovered_divergences;
  if (report.verdict) {
    const auto& v = *report.verdict;
    j["verdict"] = {{"final_scale_lr", v.final_scale_lr}, {"eta_star", v.eta_star},
                    {"band_lo", v.band_lo},               {"band_hi", v.band_hi},
                    {"inside", v.inside},                 {"gamma_estimate", opt_double(v.gamma_estimate)}};
  } else {
    j["verdict"] = nullptr;
  }
  j["wall_time_s"] = report.wall_time_s;
  j["trace_file"] = "trace.csv";
  j["events_file"] = "events.json";
  return j.dump(2) + "\n";
}

RunReport load_report(const std::string& report_path) {
  const fs::path path(report_path);
  RunReport report;
  try {
    const json j = json::parse(read_file(path));
    ConfigMap map;
    for (const auto& [k, v] : j.at("config").items()) map[k] = v.get<std::string>();
    report.config = run_config_from_map(map);
    report.final_loss = j.at("final_loss").get<double>();
    report.final_scale = j.at("final_scale").get<double>();
    report.final_effective_lr = j.at("final_effective_lr").get<double>();
    report.adjustment_count = j.at("adjustment_count").get<std::int64_t>();
    report.diverged = j.at("diverged").get<bool>();
    if (!j.at("diverged_step").is_null()) report.diverged_step = j.at("diverged_step").get<std::int64_t>();
    report.recovered_divergences = j.value("recovered_divergences", std::int64_t{0});
    report.wall_time_s = j.value("wall_time_s", 0.0);
    if (!j.at("verdict").is_null()) {
      const auto& v = j.at("verdict");
      ConvergenceVerdict cv;
      cv.final_scale_lr = v.at("final_scale_lr").get<double>();
      cv.eta_star = v.at("eta_star").get<double>();
      cv.band_lo = v.at("band_lo").get<double>();
      cv.band_hi = v.at("band_hi").get<double>();
      cv.inside = v.at("inside").get<bool>();
      if (!v.at("gamma_estimate").is_null()) cv.gamma_estimate = v.at("gamma_estimate").get<double>();
      report.verdict = cv;
    }
    const fs::path dir = path.parent_path();
    std::ifstream trace(dir / j.at("trace_file").get<std::string>(), std::ios::binary);
    if (!trace) throw InputError("cannot open trace next to '" + report_path + "'");
    report.trace = read_trace_csv(trace);
    report.events = events_from_json(read_file(dir / j.at("events_file").get<std::string>()));
  } catch (const json::exception& e) {
    throw InputError("report '" + report_path + "': " + e.what());
  }
  return report;
}

void write_run_outputs(const RunReport& report, const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  {
    std::ofstream trace(out / "trace.csv", std::ios::binary);
    if (!trace) throw InputError("cannot write trace.csv in '" + dir + "'");
    write_trace_csv(trace, report.trace);
  }
  write_file(out / "events.json", events_to_json(report.events));
  write_file(out / "report.json", report_to_json(report));
}

void write_sweep_table(std::ostream& out, const SweepTable& table) {
  out << "# lr";
  for (auto s : table.snapshots) out << " loss@" << s;
  for (std::size_t b = 0; b < table.bins.size(); ++b) {
    out << " v@[" << format_double(table.bins[b].level_lo) << ","
        << format_double(table.bins[b].level_hi) << ")";
  }
  out << '\n';
  for (std::size_t i = 0; i < table.lrs.size(); ++i) {
    out << format_double(table.lrs[i]);
    for (const auto& cell : table.losses[i]) out << ' ' << (cell ? format_double(*cell) : "NaN");
    for (const auto& bin : table.bins) {
      const auto& v = bin.velocity[i];
      out << ' ' << (v ? format_double(*v) : "NaN");
    }
    out << '\n';
  }
}

}  // namespace adalrs
