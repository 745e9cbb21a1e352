// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace adalrs {

struct LossSample {
  std::int64_t step = 0;
  double loss = 0.0;
};

/// Contiguous run of (step, loss) observations, steps strictly increasing.
class LossWindow {
 public:
  LossWindow() = default;
  explicit LossWindow(std::vector<LossSample> samples);

  /// Window over consecutive steps first_step, first_step+1, ...
  static LossWindow from_losses(std::int64_t first_step, std::span<const double> losses);

  void push_back(LossSample sample);
  void clear() { samples_.clear(); }

  std::span<const LossSample> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const LossSample& front() const { return samples_.front(); }
  const LossSample& back() const { return samples_.back(); }

  /// Sub-window [offset, offset + count).
  LossWindow slice(std::size_t offset, std::size_t count) const;

 private:
  std::vector<LossSample> samples_;
};

/// Least-squares descent velocity of a loss window.
///
/// `v` is the negated OLS slope, so a descending loss has v > 0.
/// `e_bound` is error_multiplier times the classical standard error of
/// the slope, s / sqrt(sum (t - mean t)^2), with s the residual standard
/// deviation on k - 2 degrees of freedom.
struct SlopeEstimate {
  double v = 0.0;
  double residual_std = 0.0;
  double e_bound = 0.0;
};

inline constexpr double kDefaultErrorMultiplier = 3.0;

SlopeEstimate fit_descent_velocity(const LossWindow& window,
                                   double error_multiplier = kDefaultErrorMultiplier);

double window_mean(const LossWindow& window);

}  // namespace adalrs
