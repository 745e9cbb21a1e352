// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "adalrs/harness.hpp"

namespace adalrs {

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

inline constexpr std::string_view kTraceHeader = "step,base_lr,scale,effective_lr,loss";

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

std::string events_to_json(const std::vector<AdjustmentEvent>& events);
std::vector<AdjustmentEvent> events_from_json(const std::string& text);

/// report.json; the trace lives in trace.csv next to it.
std::string report_to_json(const RunReport& report);
/// Loads report.json plus the sibling trace.csv and events.json.
RunReport load_report(const std::string& report_path);

void write_run_outputs(const RunReport& report, const std::string& dir);

/// Whitespace-separated columns for gnuplot: lr then one column per snapshot.
void write_sweep_table(std::ostream& out, const SweepTable& table);

}  // namespace adalrs
