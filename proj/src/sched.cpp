// SPDX-License-Identifier: Apache-2.0

#include "adalrs/sched.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "adalrs/errors.hpp"

namespace adalrs {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant:
      return "constant";
    case ScheduleKind::Cosine:
      return "cosine";
    case ScheduleKind::WSD:
      return "wsd";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "wsd") return ScheduleKind::WSD;
  throw ConfigError("scheduler.kind", "unknown scheduler '" + std::string(name) + "'");
}

void ScheduleConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("scheduler.base_lr", "must be a positive finite number");
  }
  if (total_steps < 1) {
    throw ConfigError("scheduler.total_steps", "must be >= 1");
  }
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio < 1.0)) {
    throw ConfigError("scheduler.min_lr_ratio", "must lie in [0, 1)");
  }
  if (!(wsd_decay_fraction > 0.0 && wsd_decay_fraction < 1.0)) {
    throw ConfigError("scheduler.wsd_decay_fraction", "must lie in (0, 1)");
  }
}

double base_lr_at(const ScheduleConfig& cfg, std::int64_t t) {
  if (t < 0 || t > cfg.total_steps) {
    throw InputError("base_lr_at: step " + std::to_string(t) + " outside [0, " +
                     std::to_string(cfg.total_steps) + "]");
  }
  const double peak = cfg.base_lr;
  const double floor = cfg.base_lr * cfg.min_lr_ratio;
  const double horizon = static_cast<double>(cfg.total_steps);

  double lr = peak;
  switch (cfg.kind) {
    case ScheduleKind::Constant:
      break;
    case ScheduleKind::Cosine: {
      const double phase = std::numbers::pi * static_cast<double>(t) / horizon;
      lr = floor + 0.5 * (peak - floor) * (1.0 + std::cos(phase));
      break;
    }
    case ScheduleKind::WSD: {
      const double decay_start = (1.0 - cfg.wsd_decay_fraction) * horizon;
      const double tt = static_cast<double>(t);
      if (tt >= decay_start) {
        const double frac = (tt - decay_start) / (horizon - decay_start);
        lr = peak + (floor - peak) * frac;
      }
      break;
    }
  }
  // cos(pi) rounding can leave a tiny negative residue when floor == 0.
  if (lr < floor) lr = floor;
  if (!std::isfinite(lr)) {
    throw InternalError("base_lr_at produced a non-finite learning rate");
  }
  return lr;
}

}  // namespace adalrs
