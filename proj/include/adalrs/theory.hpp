// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "adalrs/controller.hpp"

namespace adalrs {

struct DensityResult {
  std::int64_t m = 0;
  std::int64_t n = 0;
  double achieved = 1.0;  ///< alpha^m / beta^n
  double relative_error = 0.0;
};

/// Exhaustive search over 0 <= m, n <= max_exponent for alpha^m beta^-n
/// closest (relatively) to `target`. Throws NotFoundError when the best
/// pair misses epsilon_rel, InputError for dependent alpha, beta.
DensityResult density_approximate(double alpha, double beta, double target, double epsilon_rel,
                                  std::int64_t max_exponent);

using BaseLrFn = std::function<double(std::int64_t step)>;

/// Largest |lr_after - eta*| / |lr_before - eta*| over events that change
/// the scale and start outside (eta* - e, eta* + e). Both LRs use the base
/// LR at the event step. Values >= 1 flag a step away from eta*.
double measure_gamma(std::span<const AdjustmentEvent> events, double eta_star,
                     const BaseLrFn& base_lr, double neighborhood_e = 0.0);

struct ConvergenceVerdict {
  double final_scale_lr = 0.0;
  double eta_star = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  bool inside = false;
  std::optional<double> gamma_estimate;
};

/// Band ((eta* - e) beta' / alpha', (eta* + e) alpha' / beta') with both
/// rectified factors taken at `adjustment_count` (beta' = 1 / beta_prime_inv).
ConvergenceVerdict convergence_band(std::int64_t adjustment_count, const AdaLRSConfig& cfg,
                                    double eta_star, double e, double final_effective_lr);

inline ConvergenceVerdict convergence_band(const ControllerState& final_state,
                                           const AdaLRSConfig& cfg, double eta_star, double e,
                                           double final_effective_lr) {
  return convergence_band(final_state.adjustment_count, cfg, eta_star, e, final_effective_lr);
}

}  // namespace adalrs
