// SPDX-License-Identifier: Apache-2.0

#include "adalrs/slope.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adalrs/errors.hpp"

namespace adalrs {

namespace {

void check_sample(const LossSample& prev, const LossSample& next) {
  if (next.step <= prev.step) {
    throw InputError("LossWindow: steps must be strictly increasing (" +
                     std::to_string(prev.step) + " then " + std::to_string(next.step) + ")");
  }
}

void check_finite(const LossSample& s) {
  if (!std::isfinite(s.loss)) {
    throw InputError("LossWindow: non-finite loss at step " + std::to_string(s.step));
  }
}

}  // namespace

LossWindow::LossWindow(std::vector<LossSample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    check_finite(samples_[i]);
    if (i > 0) check_sample(samples_[i - 1], samples_[i]);
  }
}

LossWindow LossWindow::from_losses(std::int64_t first_step, std::span<const double> losses) {
  std::vector<LossSample> samples;
  samples.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    samples.push_back({first_step + static_cast<std::int64_t>(i), losses[i]});
  }
  return LossWindow(std::move(samples));
}

void LossWindow::push_back(LossSample sample) {
  check_finite(sample);
  if (!samples_.empty()) check_sample(samples_.back(), sample);
  samples_.push_back(sample);
}

LossWindow LossWindow::slice(std::size_t offset, std::size_t count) const {
  if (offset + count > samples_.size()) {
    throw InputError("LossWindow::slice out of range");
  }
  LossWindow out;
  out.samples_.assign(samples_.begin() + static_cast<std::ptrdiff_t>(offset),
                      samples_.begin() + static_cast<std::ptrdiff_t>(offset + count));
  return out;
}

SlopeEstimate fit_descent_velocity(const LossWindow& window, double error_multiplier) {
  const auto samples = window.samples();
  const std::size_t k = samples.size();
  if (k < 2) {
    throw InputError("fit_descent_velocity: window needs at least 2 samples, got " +
                     std::to_string(k));
  }

  // Center both axes and normalize the losses by their largest magnitude
  // so squared terms cannot overflow.
  double loss_scale = 0.0;
  for (const auto& s : samples) loss_scale = std::max(loss_scale, std::abs(s.loss));
  if (loss_scale == 0.0) loss_scale = 1.0;

  double step_mean = 0.0;
  double loss_mean = 0.0;
  for (const auto& s : samples) {
    step_mean += static_cast<double>(s.step);
    loss_mean += s.loss / loss_scale;
  }
  step_mean /= static_cast<double>(k);
  loss_mean /= static_cast<double>(k);

  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& s : samples) {
    const double dx = static_cast<double>(s.step) - step_mean;
    sxx += dx * dx;
    sxy += dx * (s.loss / loss_scale - loss_mean);
  }
  if (!(sxx > 0.0)) {
    throw InputError("fit_descent_velocity: zero step variance");
  }
  const double slope = sxy / sxx;

  double ssr = 0.0;
  for (const auto& s : samples) {
    const double fitted = loss_mean + slope * (static_cast<double>(s.step) - step_mean);
    const double r = s.loss / loss_scale - fitted;
    ssr += r * r;
  }

  SlopeEstimate est;
  est.v = -slope * loss_scale;
  if (k > 2) {
    const double s = std::sqrt(ssr / static_cast<double>(k - 2));
    est.residual_std = s * loss_scale;
    est.e_bound = error_multiplier * s / std::sqrt(sxx) * loss_scale;
  }
  return est;
}

double window_mean(const LossWindow& window) {
  if (window.empty()) {
    throw InputError("window_mean: empty window");
  }
  double sum = 0.0;
  for (const auto& s : window.samples()) sum += s.loss;
  return sum / static_cast<double>(window.size());
}

}  // namespace adalrs
