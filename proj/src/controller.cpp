// SPDX-License-Identifier: Apache-2.0

#include "adalrs/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "adalrs/errors.hpp"

namespace adalrs {

namespace {

constexpr double kLowest = std::numeric_limits<double>::lowest();

// Scan every length-`length` sub-window of every record. Records shorter
// than `length` count as one candidate each. Means are summed per window:
// losses can span hundreds of orders of magnitude, which rules out a
// sliding sum.
template <typename Visit>
void for_each_candidate(std::span<const LossWindow> history, std::size_t length, Visit&& visit) {
  for (std::size_t r = 0; r < history.size(); ++r) {
    const auto samples = history[r].samples();
    if (samples.empty()) continue;
    const std::size_t len = std::min(length, samples.size());
    for (std::size_t off = 0; off + len <= samples.size(); ++off) {
      double sum = 0.0;
      for (std::size_t i = off; i < off + len; ++i) sum += samples[i].loss;
      visit(r, off, len, sum / static_cast<double>(len));
    }
  }
}

LossWindow concatenate(std::span<const LossWindow> windows) {
  std::vector<LossSample> all;
  for (const auto& w : windows) {
    all.insert(all.end(), w.samples().begin(), w.samples().end());
  }
  return LossWindow(std::move(all));
}

}  // namespace

bool multiplicatively_independent(double alpha, double beta, int max_power) {
  const double la = std::log(alpha);
  const double lb = std::log(beta);
  for (int m = 1; m <= max_power; ++m) {
    for (int n = 1; n <= max_power; ++n) {
      const double lhs = m * la;
      const double rhs = n * lb;
      if (std::abs(lhs - rhs) <= 1e-9 * std::max(std::abs(lhs), std::abs(rhs))) return false;
    }
  }
  return true;
}

void AdaLRSConfig::validate() const {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ConfigError("adalrs.alpha", "must be > 1");
  if (!(beta > 1.0) || !std::isfinite(beta)) throw ConfigError("adalrs.beta", "must be > 1");
  if (!multiplicatively_independent(alpha, beta)) {
    throw ConfigError("adalrs.beta",
                      "alpha and beta must be multiplicatively independent (alpha^m == beta^n "
                      "for some 1 <= m, n <= 16)");
  }
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("adalrs.lambda", "must lie in (0, 1)");
  if (window_k < 2) throw ConfigError("adalrs.window_k", "must be >= 2");
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw ConfigError("adalrs.theta0", "must lie in (0, 1)");
  if (!(search_start_ratio >= 0.0 && search_start_ratio <= 1.0)) {
    throw ConfigError("adalrs.search_start_ratio", "must lie in [0, 1]");
  }
  if (!(search_end_ratio >= 0.0 && search_end_ratio <= 1.0)) {
    throw ConfigError("adalrs.search_end_ratio", "must lie in [0, 1]");
  }
  if (!(search_start_ratio < search_end_ratio)) {
    throw ConfigError("adalrs.search_end_ratio", "must exceed search_start_ratio");
  }
  if (!(error_multiplier > 0.0)) throw ConfigError("adalrs.error_multiplier", "must be > 0");
  if (!(comparable_gap_threshold > 0.0)) {
    throw ConfigError("adalrs.comparable_gap_threshold", "must be > 0");
  }
}

RectifiedFactors rectified_factors(const AdaLRSConfig& cfg, std::int64_t adjustment_count) {
  if (adjustment_count < 0) throw InputError("rectified_factors: negative adjustment count");
  const double decay = std::pow(cfg.lambda, static_cast<double>(adjustment_count));
  return {std::max(decay * cfg.alpha, 1.0), std::max(decay * cfg.beta, 1.0)};
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Monitoring:
      return "monitoring";
    case Phase::UpscaleRamp:
      return "upscale_ramp";
    case Phase::Validating:
      return "validating";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::UpscaleKept:
      return "upscale_kept";
    case EventKind::UpscaleRevertedThenDownscale:
      return "upscale_reverted_then_downscale";
    case EventKind::RevertOnly:
      return "revert_only";
    case EventKind::BoundaryDownscale:
      return "boundary_downscale";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::UpscaleKept, EventKind::UpscaleRevertedThenDownscale,
                 EventKind::RevertOnly, EventKind::BoundaryDownscale}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown event kind '" + std::string(name) + "'");
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::KeepUpscale:
      return "keep_upscale";
    case Decision::RevertAndDownscale:
      return "revert_and_downscale";
    case Decision::RevertOnly:
      return "revert_only";
  }
  return "?";
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Continue:
      return "continue";
    case ActionKind::BeginTrialUpscale:
      return "begin_trial_upscale";
    case ActionKind::BoundaryDownscale:
      return "boundary_downscale";
    case ActionKind::KeepUpscale:
      return "keep_upscale";
    case ActionKind::RevertAndDownscale:
      return "revert_and_downscale";
    case ActionKind::RevertOnly:
      return "revert_only";
  }
  return "?";
}

std::size_t ControllerState::history_size() const {
  std::size_t n = 0;
  for (const auto& w : history) n += w.size();
  return n;
}

double ramp_multiplier(const ControllerState& state, const AdaLRSConfig& cfg) {
  if (state.phase != Phase::UpscaleRamp) {
    throw StateError("ramp_multiplier called outside the upscale ramp");
  }
  if (state.ramp_progress < 0 || state.ramp_progress > cfg.window_k) {
    throw StateError("ramp progress outside [0, k]");
  }
  if (state.ramp_progress == cfg.window_k) return state.scale * state.trial_alpha_prime;
  const double frac =
      static_cast<double>(state.ramp_progress) / static_cast<double>(cfg.window_k);
  return state.scale * std::pow(state.trial_alpha_prime, frac);
}

double current_multiplier(const ControllerState& state, const AdaLRSConfig& cfg) {
  switch (state.phase) {
    case Phase::Monitoring:
      return state.scale;
    case Phase::UpscaleRamp:
      return ramp_multiplier(state, cfg);
    case Phase::Validating:
      return state.trial_scale;
  }
  return state.scale;
}

double effective_lr(double base_lr, const ControllerState& state, const AdaLRSConfig& cfg) {
  return base_lr * current_multiplier(state, cfg);
}

std::optional<ReferenceMatch> find_reference_window(std::span<const LossWindow> history,
                                                    const LossWindow& new_window,
                                                    const AdaLRSConfig& cfg) {
  std::size_t total = 0;
  for (const auto& w : history) total += w.size();
  if (total == 0) throw InputError("find_reference_window: empty history");
  if (new_window.empty()) throw InputError("find_reference_window: empty new window");

  const double target = window_mean(new_window);
  const double tie_tol = 1e-12 * std::max(1.0, std::abs(target));
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t best_record = 0;
  std::size_t best_offset = 0;
  std::size_t best_len = 0;
  double best_mean = 0.0;

  // Candidates arrive oldest first, so `<=` hands ties to the most recent.
  for_each_candidate(history, new_window.size(),
                     [&](std::size_t r, std::size_t off, std::size_t len, double mean) {
                       const double gap = std::abs(mean - target);
                       if (gap <= best_gap + tie_tol) {
                         best_gap = std::min(gap, best_gap);
                         best_record = r;
                         best_offset = off;
                         best_len = len;
                         best_mean = mean;
                       }
                     });

  const double scale = target != 0.0 ? std::abs(target) : 1.0;
  const double relative_gap = std::abs(best_mean - target) / scale;
  if (relative_gap > cfg.comparable_gap_threshold) return std::nullopt;
  return ReferenceMatch{history[best_record].slice(best_offset, best_len), best_mean,
                        relative_gap};
}

MeanExtremes history_mean_extremes(std::span<const LossWindow> history, std::size_t length) {
  MeanExtremes ext{std::numeric_limits<double>::infinity(), kLowest};
  bool any = false;
  for_each_candidate(history, length, [&](std::size_t, std::size_t, std::size_t, double mean) {
    ext.min_mean = std::min(ext.min_mean, mean);
    ext.max_mean = std::max(ext.max_mean, mean);
    any = true;
  });
  if (!any) throw InputError("history_mean_extremes: empty history");
  return ext;
}

Decision decide_after_validation(double v_new, double v_ref, double e, bool reference_found,
                                 double new_mean, MeanExtremes history_extremes) {
  if (reference_found) {
    if (v_new > v_ref + 2.0 * e) return Decision::KeepUpscale;
    if (v_new < v_ref - 2.0 * e) return Decision::RevertAndDownscale;
    return Decision::RevertOnly;
  }
  if (new_mean < history_extremes.min_mean) return Decision::KeepUpscale;
  if (new_mean > history_extremes.max_mean) return Decision::RevertAndDownscale;
  return Decision::RevertOnly;
}

Controller::Controller(AdaLRSConfig cfg, std::int64_t total_steps) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (total_steps < 1) throw ConfigError("scheduler.total_steps", "must be >= 1");
  const auto horizon = static_cast<double>(total_steps);
  search_start_ = static_cast<std::int64_t>(std::floor(cfg_.search_start_ratio * horizon));
  search_end_ = static_cast<std::int64_t>(std::floor(cfg_.search_end_ratio * horizon));
  state_.theta = cfg_.theta0;
  state_.max_history_loss = kLowest;
}

bool Controller::search_active(std::int64_t step) const {
  return step >= search_start_ && step < search_end_;
}

Action Controller::observe(std::int64_t step, double loss) {
  if (!std::isfinite(loss)) {
    throw InputError("observe: non-finite loss at step " + std::to_string(step));
  }
  if (last_step_ && step <= *last_step_) {
    throw InputError("observe: steps must increase (" + std::to_string(*last_step_) + " then " +
                     std::to_string(step) + ")");
  }
  last_step_ = step;

  switch (state_.phase) {
    case Phase::Monitoring: {
      if (!search_active(step)) {
        state_.open_window.clear();
        return {};
      }
      state_.open_window.push_back({step, loss});
      if (state_.open_window.size() < static_cast<std::size_t>(cfg_.window_k)) return {};
      return close_monitoring_window(step);
    }
    case Phase::UpscaleRamp: {
      const double used = ramp_multiplier(state_, cfg_);
      if (loss > state_.max_history_loss) {
        state_.trial_scale = used;
        state_.ramp_stopped_early = true;
        state_.phase = Phase::Validating;
        state_.open_window.clear();
      } else if (state_.ramp_progress == cfg_.window_k) {
        state_.trial_scale = state_.scale * state_.trial_alpha_prime;
        state_.phase = Phase::Validating;
        state_.open_window.clear();
      } else {
        ++state_.ramp_progress;
      }
      return {};
    }
    case Phase::Validating: {
      state_.open_window.push_back({step, loss});
      if (state_.open_window.size() < static_cast<std::size_t>(cfg_.window_k)) return {};
      return finish_validation(step);
    }
  }
  throw InternalError("observe: unknown phase");
}

Action Controller::close_monitoring_window(std::int64_t step) {
  const SlopeEstimate est = fit_descent_velocity(state_.open_window, cfg_.error_multiplier);
  for (const auto& s : state_.open_window.samples()) {
    state_.max_history_loss = std::max(state_.max_history_loss, s.loss);
  }
  state_.history.push_back(std::move(state_.open_window));
  state_.history_estimates.push_back(est);
  state_.open_window = LossWindow{};

  const auto k = static_cast<std::size_t>(cfg_.window_k);
  if (state_.history_size() < 2 * k) return {};

  const double v_now = est.v;
  const double v_prev = state_.history_estimates[state_.history_estimates.size() - 2].v;

  if (v_now < v_prev * state_.theta) {
    // A trial that could not finish inside the search range would adjust outside it.
    if (step + 2 * cfg_.window_k >= search_end_) return {};
    state_.phase = Phase::UpscaleRamp;
    state_.trial_alpha_prime = rectified_factors(cfg_, state_.adjustment_count).alpha_prime;
    state_.ramp_progress = 1;
    state_.ramp_stopped_early = false;
    state_.v_before = v_now;
    Action action;
    action.kind = ActionKind::BeginTrialUpscale;
    if (cfg_.backtracking_enabled) {
      state_.checkpoint_handle = next_handle_++;
      action.take_checkpoint = state_.checkpoint_handle;
    }
    return action;
  }

  if (v_now < 0.0 && v_prev < 0.0) {
    const auto factors = rectified_factors(cfg_, state_.adjustment_count);
    AdjustmentEvent ev;
    ev.step = step;
    ev.kind = EventKind::BoundaryDownscale;
    ev.old_scale = state_.scale;
    ev.new_scale = state_.scale / factors.beta_prime_inv;
    ev.v_before = v_now;
    state_.scale = ev.new_scale;
    ++state_.adjustment_count;
    reset_history();
    events_.push_back(ev);
    Action action;
    action.kind = ActionKind::BoundaryDownscale;
    action.event = ev;
    return action;
  }

  const double narrowed = 0.5 * (state_.theta + 1.0);
  state_.theta = std::min(narrowed, std::nextafter(1.0, 0.0));
  return {};
}

Action Controller::finish_validation(std::int64_t step) {
  const LossWindow& fresh = state_.open_window;
  const SlopeEstimate est_new = fit_descent_velocity(fresh, cfg_.error_multiplier);

  const LossWindow merged = concatenate(state_.history);
  const std::span<const LossWindow> records(&merged, 1);
  const auto match = find_reference_window(records, fresh, cfg_);

  ValidationInputs in;
  in.v_new = est_new.v;
  in.new_mean = window_mean(fresh);
  in.extremes = history_mean_extremes(records, fresh.size());
  in.reference_found = match.has_value();
  in.e = est_new.e_bound;
  if (match) {
    const SlopeEstimate est_ref = fit_descent_velocity(match->window, cfg_.error_multiplier);
    in.v_ref = est_ref.v;
    in.e = std::max(est_new.e_bound, est_ref.e_bound);
  }
  if (validation_hook_) validation_hook_(in);

  const Decision d = decide_after_validation(in.v_new, in.v_ref, in.e, in.reference_found,
                                             in.new_mean, in.extremes);
  return commit(step, d, in.v_new);
}

Action Controller::abort_trial(std::int64_t step) {
  if (state_.phase == Phase::Monitoring || !state_.checkpoint_handle) {
    throw StateError("abort_trial: no trial with a checkpoint is running");
  }
  last_step_ = std::max(last_step_.value_or(step), step);
  return commit(step, Decision::RevertAndDownscale, std::nullopt);
}

Action Controller::commit(std::int64_t step, Decision decision, std::optional<double> v_after) {
  const auto factors = rectified_factors(cfg_, state_.adjustment_count);
  AdjustmentEvent ev;
  ev.step = step;
  ev.old_scale = state_.scale;
  ev.v_before = state_.v_before;
  ev.v_after = v_after;

  Action action;
  const auto handle = state_.checkpoint_handle;
  switch (decision) {
    case Decision::KeepUpscale:
      ev.kind = EventKind::UpscaleKept;
      ev.new_scale = state_.scale * factors.alpha_prime;
      action.kind = ActionKind::KeepUpscale;
      break;
    case Decision::RevertAndDownscale:
      ev.kind = EventKind::UpscaleRevertedThenDownscale;
      ev.new_scale = state_.scale / factors.beta_prime_inv;
      action.kind = ActionKind::RevertAndDownscale;
      action.restore_checkpoint = handle;
      break;
    case Decision::RevertOnly:
      ev.kind = EventKind::RevertOnly;
      ev.new_scale = state_.scale;
      action.kind = ActionKind::RevertOnly;
      action.restore_checkpoint = handle;
      break;
  }
  action.release_checkpoint = handle;

  state_.scale = ev.new_scale;
  ++state_.adjustment_count;
  state_.phase = Phase::Monitoring;
  state_.checkpoint_handle.reset();
  reset_history();
  events_.push_back(ev);
  action.event = ev;
  return action;
}

void Controller::reset_history() {
  state_.history.clear();
  state_.history_estimates.clear();
  state_.theta = cfg_.theta0;
  state_.max_history_loss = kLowest;
  state_.open_window.clear();
  state_.ramp_progress = 0;
  state_.trial_alpha_prime = 1.0;
  state_.trial_scale = state_.scale;
  state_.ramp_stopped_early = false;
}

}  // namespace adalrs
