// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace adalrs {

enum class ScheduleKind { Constant, Cosine, WSD };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Base learning-rate schedule. AdaLRS multiplies its output by a scale
/// factor, so the minimum LR is stored as a ratio of the base LR.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Cosine;
  double base_lr = 2e-4;
  std::int64_t total_steps = 10000;
  double min_lr_ratio = 0.0;
  double wsd_decay_fraction = 0.1;

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

/// Learning rate of the base schedule at step `t`, 0 <= t <= total_steps.
double base_lr_at(const ScheduleConfig& cfg, std::int64_t t);

}  // namespace adalrs
