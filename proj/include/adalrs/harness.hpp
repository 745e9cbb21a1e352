// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adalrs/controller.hpp"
#include "adalrs/oracle.hpp"
#include "adalrs/sched.hpp"
#include "adalrs/theory.hpp"

namespace adalrs {

struct RunConfig {
  ScheduleConfig scheduler;
  std::optional<AdaLRSConfig> adalrs;  ///< absent: baseline run
  OracleConfig oracle;
  std::uint64_t seed = 0;  ///< seeds the oracle; overrides oracle.seed
  std::string output_dir;  ///< empty: keep everything in memory
  std::int64_t final_window = 200;
  std::optional<double> eta_star;  ///< reference optimum for the verdict
  double band_e = 0.0;

  void validate() const;
};

struct TraceRecord {
  std::int64_t step = 0;
  double base_lr = 0.0;
  double scale = 1.0;
  double effective_lr = 0.0;
  double loss = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RunReport {
  RunConfig config;
  std::vector<TraceRecord> trace;
  std::vector<AdjustmentEvent> events;
  double final_loss = 0.0;
  double final_scale = 1.0;
  double final_effective_lr = 0.0;
  std::int64_t adjustment_count = 0;
  bool diverged = false;
  std::optional<std::int64_t> diverged_step;
  std::int64_t recovered_divergences = 0;  ///< trials aborted by divergence
  std::optional<ConvergenceVerdict> verdict;
  double wall_time_s = 0.0;
};

/// Runs scheduler x controller x oracle for total_steps steps. Oracle
/// divergence outside a backtrackable trial ends the run with `diverged`
/// set. Writes trace.csv, events.json and report.json when output_dir is set.
RunReport run_experiment(const RunConfig& cfg);

struct VelocityBin {
  double level_lo = 0.0;
  double level_hi = 0.0;
  /// Per grid LR: velocity of the run's window nearest the bin's log-center;
  /// absent when the run has no window in the bin.
  std::vector<std::optional<double>> velocity;
};

struct SweepTable {
  std::vector<double> lrs;
  std::vector<std::int64_t> snapshots;
  /// losses[i][j]: loss of LR i at snapshot j; absent if the run had
  /// diverged by then.
  std::vector<std::vector<std::optional<double>>> losses;
  std::vector<bool> diverged;
  std::vector<VelocityBin> bins;
};

struct SweepOptions {
  std::int64_t steps = 0;  ///< run length; at least max(snapshots) + 1
  std::vector<std::int64_t> snapshots;
  std::int64_t velocity_window = 50;
  std::size_t level_bins = 8;
};

/// Independent constant-LR runs over `lr_grid` (>= 5 points, geometric).
SweepTable convexity_sweep(const OracleConfig& oracle, std::span<const double> lr_grid,
                           const SweepOptions& options);

/// Number of sign changes in consecutive differences of the present
/// entries of `values` (absent entries skipped).
std::size_t sign_changes(std::span<const std::optional<double>> values);

struct CompareSummary {
  double final_loss_delta = 0.0;  ///< a.final_loss - b.final_loss
  std::optional<std::int64_t> crossing_step;
  std::optional<double> acceleration_ratio;  ///< crossing_step / total_steps
};

/// First step at which A's trailing-window mean loss is at or below B's
/// final loss. Throws InputError when oracle configs or seeds differ.
CompareSummary compare_runs(const RunReport& a, const RunReport& b);

}  // namespace adalrs
