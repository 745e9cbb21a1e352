// SPDX-License-Identifier: Apache-2.0

#include "adalrs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "adalrs/errors.hpp"
#include "adalrs/log.hpp"
#include "adalrs/report_io.hpp"

namespace adalrs {

void RunConfig::validate() const {
  scheduler.validate();
  if (adalrs) adalrs->validate();
  oracle.validate();
  if (final_window < 1) throw ConfigError("report.final_window", "must be >= 1");
  if (eta_star && !(*eta_star > 0.0)) throw ConfigError("report.eta_star", "must be > 0");
  if (!(band_e >= 0.0)) throw ConfigError("report.band_e", "must be >= 0");
}

namespace {

std::string describe(const AdjustmentEvent& ev) {
  return "step " + std::to_string(ev.step) + " " + std::string(to_string(ev.kind)) + " scale " +
         format_double(ev.old_scale) + " -> " + format_double(ev.new_scale);
}

class CheckpointStore {
 public:
  void apply(const Action& action, Oracle& oracle) {
    if (action.take_checkpoint) stored_[*action.take_checkpoint] = oracle.snapshot();
    if (action.restore_checkpoint) {
      const auto it = stored_.find(*action.restore_checkpoint);
      if (it == stored_.end()) throw InternalError("restore requested for unknown checkpoint");
      oracle.restore(it->second);
    }
    if (action.release_checkpoint) stored_.erase(*action.release_checkpoint);
  }

 private:
  std::map<CheckpointHandle, Checkpoint> stored_;
};

double trailing_mean(const std::vector<TraceRecord>& trace, std::int64_t window) {
  if (trace.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto n = std::min<std::size_t>(trace.size(), static_cast<std::size_t>(window));
  double sum = 0.0;
  for (std::size_t i = trace.size() - n; i < trace.size(); ++i) sum += trace[i].loss;
  return sum / static_cast<double>(n);
}

}  // namespace

RunReport run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  OracleConfig oracle_cfg = cfg.oracle;
  oracle_cfg.seed = cfg.seed;
  auto oracle = make_oracle(oracle_cfg);

  std::optional<Controller> controller;
  if (cfg.adalrs) controller.emplace(*cfg.adalrs, cfg.scheduler.total_steps);
  CheckpointStore store;

  RunReport report;
  report.config = cfg;
  report.trace.reserve(static_cast<std::size_t>(cfg.scheduler.total_steps));

  for (std::int64_t t = 0; t < cfg.scheduler.total_steps; ++t) {
    const double base = base_lr_at(cfg.scheduler, t);
    const double scale = controller ? controller->multiplier() : 1.0;
    const double lr = base * scale;

    double loss = 0.0;
    try {
      loss = oracle->step(lr);
    } catch (const DivergedError& err) {
      const bool in_trial = controller && controller->state().phase != Phase::Monitoring &&
                            controller->state().checkpoint_handle.has_value();
      if (!in_trial) {
        report.diverged = true;
        report.diverged_step = t;
        log_debug(std::string("run diverged: ") + err.what());
        break;
      }
      // Loss exploded above every history record: back out of the trial.
      const Action action = controller->abort_trial(t);
      store.apply(action, *oracle);
      ++report.recovered_divergences;
      if (action.event) log_debug(describe(*action.event) + " (trial diverged)");
      continue;
    }

    report.trace.push_back({t, base, scale, lr, loss});
    if (!controller) continue;

    const Action action = controller->observe(t, loss);
    store.apply(action, *oracle);
    if (action.event) log_debug(describe(*action.event));
  }

  if (controller) {
    report.events = controller->events();
    report.final_scale = controller->state().scale;
    report.adjustment_count = controller->state().adjustment_count;
  }
  report.final_loss = trailing_mean(report.trace, cfg.final_window);
  const std::int64_t last_step =
      report.trace.empty() ? 0 : std::min(report.trace.back().step, cfg.scheduler.total_steps);
  report.final_effective_lr = base_lr_at(cfg.scheduler, last_step) * report.final_scale;

  if (controller && cfg.eta_star && *cfg.eta_star > cfg.band_e) {
    report.verdict = convergence_band(controller->state(), *cfg.adalrs, *cfg.eta_star,
                                      cfg.band_e, report.final_effective_lr);
    try {
      const ScheduleConfig sched = cfg.scheduler;
      report.verdict->gamma_estimate = measure_gamma(
          report.events, *cfg.eta_star,
          [&sched](std::int64_t s) { return base_lr_at(sched, s); }, cfg.band_e);
    } catch (const InputError&) {
      // Fewer than one qualifying adjustment: no estimate.
    }
  }

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!cfg.output_dir.empty()) write_run_outputs(report, cfg.output_dir);
  return report;
}

std::size_t sign_changes(std::span<const std::optional<double>> values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  std::size_t changes = 0;
  int last_sign = 0;
  for (std::size_t i = 1; i < present.size(); ++i) {
    const double d = present[i] - present[i - 1];
    const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++changes;
    last_sign = sign;
  }
  return changes;
}

SweepTable convexity_sweep(const OracleConfig& oracle, std::span<const double> lr_grid,
                           const SweepOptions& options) {
  if (lr_grid.size() < 5) throw InputError("convexity_sweep: need at least 5 grid LRs");
  for (std::size_t i = 0; i < lr_grid.size(); ++i) {
    if (!(lr_grid[i] > 0.0)) throw InputError("convexity_sweep: LRs must be positive");
  }
  const double ratio = lr_grid[1] / lr_grid[0];
  for (std::size_t i = 1; i < lr_grid.size(); ++i) {
    const double r = lr_grid[i] / lr_grid[i - 1];
    if (!(r > 1.0) || std::abs(r - ratio) > 1e-6 * ratio) {
      throw InputError("convexity_sweep: grid must be increasing and exponentially spaced");
    }
  }
  if (options.snapshots.empty()) throw InputError("convexity_sweep: no snapshot steps");
  if (options.velocity_window < 2) throw InputError("convexity_sweep: velocity window < 2");
  const std::int64_t max_snap =
      *std::max_element(options.snapshots.begin(), options.snapshots.end());
  if (options.snapshots.front() < 0 ||
      *std::min_element(options.snapshots.begin(), options.snapshots.end()) < 0) {
    throw InputError("convexity_sweep: negative snapshot step");
  }
  const std::int64_t steps = std::max(options.steps, max_snap + 1);

  SweepTable table;
  table.lrs.assign(lr_grid.begin(), lr_grid.end());
  table.snapshots = options.snapshots;
  table.losses.assign(lr_grid.size(),
                      std::vector<std::optional<double>>(options.snapshots.size()));
  table.diverged.assign(lr_grid.size(), false);

  std::vector<std::vector<double>> traces(lr_grid.size());
  parallel_for(lr_grid.size(), [&](std::size_t i) {
    auto run = make_oracle(oracle);
    auto& losses = traces[i];
    losses.reserve(static_cast<std::size_t>(steps));
    try {
      for (std::int64_t t = 0; t < steps; ++t) losses.push_back(run->step(lr_grid[i]));
    } catch (const DivergedError&) {
      table.diverged[i] = true;
    }
    for (std::size_t j = 0; j < options.snapshots.size(); ++j) {
      const auto s = static_cast<std::size_t>(options.snapshots[j]);
      if (s < losses.size()) table.losses[i][j] = losses[s];
    }
  });

  // Non-overlapping velocity windows of each run, binned by window mean
  // on a log scale over the range every finished run covers.
  struct WindowStat {
    double mean;
    double v;
  };
  std::vector<std::vector<WindowStat>> stats(lr_grid.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  const auto w = static_cast<std::size_t>(options.velocity_window);
  for (std::size_t i = 0; i < lr_grid.size(); ++i) {
    if (table.diverged[i]) continue;
    const auto& losses = traces[i];
    for (std::size_t start = 0; start + w <= losses.size(); start += w) {
      const auto window = LossWindow::from_losses(
          static_cast<std::int64_t>(start),
          std::span<const double>(losses).subspan(start, w));
      const double mean = window_mean(window);
      if (!(mean > 0.0)) continue;
      stats[i].push_back({mean, fit_descent_velocity(window).v});
      lo = std::min(lo, mean);
      hi = std::max(hi, mean);
    }
  }
  if (options.level_bins > 0 && hi > lo && std::isfinite(lo)) {
    const double log_lo = std::log(lo);
    const double width = (std::log(hi) - log_lo) / static_cast<double>(options.level_bins);
    for (std::size_t b = 0; b < options.level_bins; ++b) {
      VelocityBin bin;
      bin.level_lo = std::exp(log_lo + width * static_cast<double>(b));
      bin.level_hi = std::exp(log_lo + width * static_cast<double>(b + 1));
      bin.velocity.resize(lr_grid.size());
      // Velocity scales with the loss level, so averaging every window in a
      // wide bin would mix levels unevenly across LRs. Each run contributes
      // its window closest to the bin's log-center instead.
      const double center = log_lo + width * (static_cast<double>(b) + 0.5);
      for (std::size_t i = 0; i < lr_grid.size(); ++i) {
        double best_dist = std::numeric_limits<double>::infinity();
        for (const auto& st : stats[i]) {
          const bool last = b + 1 == options.level_bins;
          if (st.mean >= bin.level_lo && (st.mean < bin.level_hi || (last && st.mean <= hi))) {
            const double dist = std::abs(std::log(st.mean) - center);
            if (dist < best_dist) {
              best_dist = dist;
              bin.velocity[i] = st.v;
            }
          }
        }
      }
      table.bins.push_back(std::move(bin));
    }
  }
  return table;
}

CompareSummary compare_runs(const RunReport& a, const RunReport& b) {
  const auto& oa = a.config.oracle;
  const auto& ob = b.config.oracle;
  const bool same_oracle = oa.kind == ob.kind && oa.curvature == ob.curvature &&
                           oa.dim == ob.dim && oa.noise_std == ob.noise_std &&
                           oa.init_scale == ob.init_scale && oa.mlp_sizes == ob.mlp_sizes &&
                           oa.mlp_samples == ob.mlp_samples && oa.batch_size == ob.batch_size &&
                           oa.optimizer == ob.optimizer && oa.momentum_coeff == ob.momentum_coeff;
  if (!same_oracle) throw InputError("compare_runs: reports use different oracle configs");
  if (a.config.seed != b.config.seed) throw InputError("compare_runs: reports use different seeds");
  if (a.trace.empty() || b.trace.empty()) throw InputError("compare_runs: empty trace");

  CompareSummary out;
  out.final_loss_delta = a.final_loss - b.final_loss;
  const auto window = static_cast<std::size_t>(a.config.final_window);
  // Same summation order as the final-loss mean so identical runs tie exactly.
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    if (i + 1 < window && i + 1 < a.trace.size()) continue;
    const std::size_t n = std::min(window, i + 1);
    double sum = 0.0;
    for (std::size_t j = i + 1 - n; j <= i; ++j) sum += a.trace[j].loss;
    if (sum / static_cast<double>(n) <= b.final_loss) {
      out.crossing_step = a.trace[i].step;
      break;
    }
  }
  if (out.crossing_step) {
    out.acceleration_ratio = static_cast<double>(*out.crossing_step) /
                             static_cast<double>(a.config.scheduler.total_steps);
  }
  return out;
}

}  // namespace adalrs
