// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adalrs/slope.hpp"

namespace adalrs {

/// AdaLRS hyperparameters. Defaults follow the main-experiment factors
/// (alpha=3, beta=2, lambda=0.99) and the [0.1, 0.4] search step ratio.
struct AdaLRSConfig {
  double alpha = 3.0;
  double beta = 2.0;
  double lambda = 0.99;
  std::int64_t window_k = 200;
  double theta0 = 0.9;
  double search_start_ratio = 0.1;
  double search_end_ratio = 0.4;
  double error_multiplier = kDefaultErrorMultiplier;
  bool backtracking_enabled = true;
  double comparable_gap_threshold = 0.1;

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

/// True when no alpha^m == beta^n holds for 1 <= m, n <= max_power
/// (within a relative tolerance on the logarithms).
bool multiplicatively_independent(double alpha, double beta, int max_power = 16);

struct RectifiedFactors {
  double alpha_prime = 1.0;     ///< max(lambda^n alpha, 1); multiplies the LR on upscale
  double beta_prime_inv = 1.0;  ///< max(lambda^n beta, 1); divides the LR on downscale
};

RectifiedFactors rectified_factors(const AdaLRSConfig& cfg, std::int64_t adjustment_count);

enum class Phase { Monitoring, UpscaleRamp, Validating };

enum class EventKind { UpscaleKept, UpscaleRevertedThenDownscale, RevertOnly, BoundaryDownscale };

std::string_view to_string(Phase phase);
std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view name);

struct AdjustmentEvent {
  std::int64_t step = 0;
  EventKind kind = EventKind::RevertOnly;
  double old_scale = 1.0;
  double new_scale = 1.0;
  double v_before = 0.0;
  std::optional<double> v_after;
};

using CheckpointHandle = std::uint64_t;

/// Complete controller state. A plain value: copying it snapshots the
/// controller.
struct ControllerState {
  Phase phase = Phase::Monitoring;
  double scale = 1.0;
  std::int64_t adjustment_count = 0;
  /// Closed windows since the last adjustment, chronological.
  std::vector<LossWindow> history;
  std::vector<SlopeEstimate> history_estimates;
  double theta = 0.9;
  std::optional<CheckpointHandle> checkpoint_handle;
  std::int64_t ramp_progress = 0;
  double max_history_loss = 0.0;

  // Bookkeeping for the window being filled and the running trial.
  LossWindow open_window;
  double trial_alpha_prime = 1.0;
  double trial_scale = 1.0;
  double v_before = 0.0;
  bool ramp_stopped_early = false;

  std::size_t history_size() const;
};

/// Scale in effect for the next step: `scale` while monitoring, the ramp
/// multiplier during the ramp, the trial scale while validating.
double current_multiplier(const ControllerState& state, const AdaLRSConfig& cfg);

double effective_lr(double base_lr, const ControllerState& state, const AdaLRSConfig& cfg);

/// scale * alpha'^(ramp_progress / k). Throws StateError outside UpscaleRamp.
double ramp_multiplier(const ControllerState& state, const AdaLRSConfig& cfg);

struct ReferenceMatch {
  LossWindow window;
  double mean = 0.0;
  double relative_gap = 0.0;
};

/// Closest-mean length-k sub-window (stride 1 inside each history record)
/// to `new_window`; ties go to the most recent candidate. Empty when the
/// best relative mean gap exceeds cfg.comparable_gap_threshold.
std::optional<ReferenceMatch> find_reference_window(std::span<const LossWindow> history,
                                                    const LossWindow& new_window,
                                                    const AdaLRSConfig& cfg);

struct MeanExtremes {
  double min_mean = 0.0;
  double max_mean = 0.0;
};

/// Min and max mean over the same candidate sub-windows find_reference_window scans.
MeanExtremes history_mean_extremes(std::span<const LossWindow> history, std::size_t length);

enum class Decision { KeepUpscale, RevertAndDownscale, RevertOnly };

std::string_view to_string(Decision d);

Decision decide_after_validation(double v_new, double v_ref, double e, bool reference_found,
                                 double new_mean, MeanExtremes history_extremes);

enum class ActionKind {
  Continue,
  BeginTrialUpscale,
  BoundaryDownscale,
  KeepUpscale,
  RevertAndDownscale,
  RevertOnly,
};

std::string_view to_string(ActionKind kind);

/// What the training loop must do after an observation.
struct Action {
  ActionKind kind = ActionKind::Continue;
  /// Snapshot the trainable state now and file it under this handle.
  std::optional<CheckpointHandle> take_checkpoint;
  /// Restore the trainable state filed under this handle.
  std::optional<CheckpointHandle> restore_checkpoint;
  /// The stored checkpoint under this handle is no longer needed.
  std::optional<CheckpointHandle> release_checkpoint;
  std::optional<AdjustmentEvent> event;
};

/// Everything the post-validation decision consumes. A validation hook may
/// rewrite it before the decision is taken.
struct ValidationInputs {
  double v_new = 0.0;
  double v_ref = 0.0;
  double e = 0.0;
  bool reference_found = false;
  double new_mean = 0.0;
  MeanExtremes extremes;
};

using ValidationHook = std::function<void(ValidationInputs&)>;

/// The AdaLRS state machine. Feed it one loss per training step; apply the
/// returned Action before the next step.
class Controller {
 public:
  /// Resolves the search range against total_steps once, at construction.
  Controller(AdaLRSConfig cfg, std::int64_t total_steps);

  /// Multiplier for the upcoming step's base LR.
  double multiplier() const { return current_multiplier(state_, cfg_); }

  /// Record the loss observed at `step`. Steps must increase across calls.
  Action observe(std::int64_t step, double loss);

  /// The oracle diverged mid-trial. Reverts to the pre-trial checkpoint and
  /// downscales. Throws StateError if no trial with a checkpoint is running.
  Action abort_trial(std::int64_t step);

  void set_validation_hook(ValidationHook hook) { validation_hook_ = std::move(hook); }

  const ControllerState& state() const { return state_; }
  const AdaLRSConfig& config() const { return cfg_; }
  const std::vector<AdjustmentEvent>& events() const { return events_; }
  std::int64_t search_start() const { return search_start_; }
  std::int64_t search_end() const { return search_end_; }

 private:
  bool search_active(std::int64_t step) const;
  Action close_monitoring_window(std::int64_t step);
  Action finish_validation(std::int64_t step);
  Action commit(std::int64_t step, Decision decision, std::optional<double> v_after);
  void reset_history();

  AdaLRSConfig cfg_;
  std::int64_t search_start_ = 0;
  std::int64_t search_end_ = 0;
  ControllerState state_;
  std::vector<AdjustmentEvent> events_;
  std::optional<std::int64_t> last_step_;
  CheckpointHandle next_handle_ = 1;
  ValidationHook validation_hook_;
};

}  // namespace adalrs
