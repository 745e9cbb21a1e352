// SPDX-License-Identifier: Apache-2.0

#include "adalrs/theory.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "adalrs/errors.hpp"

namespace adalrs {

DensityResult density_approximate(double alpha, double beta, double target, double epsilon_rel,
                                  std::int64_t max_exponent) {
  if (!(alpha > 1.0) || !(beta > 1.0)) throw InputError("density_approximate: need alpha, beta > 1");
  if (!multiplicatively_independent(alpha, beta)) {
    throw InputError("density_approximate: alpha and beta are multiplicatively dependent");
  }
  if (!(target > 0.0)) throw InputError("density_approximate: target must be positive");
  if (!(epsilon_rel > 0.0)) throw InputError("density_approximate: epsilon must be positive");
  if (max_exponent < 0) throw InputError("density_approximate: negative max_exponent");

  const long double a = alpha;
  const long double b = beta;
  const long double r = target;
  DensityResult best;
  long double best_err = std::numeric_limits<long double>::infinity();
  long double a_pow = 1.0L;
  for (std::int64_t m = 0; m <= max_exponent; ++m) {
    long double b_pow = 1.0L;
    for (std::int64_t n = 0; n <= max_exponent; ++n) {
      const long double achieved = a_pow / b_pow;
      const long double err = std::fabs(achieved - r) / r;
      if (err < best_err) {
        best_err = err;
        best = {m, n, static_cast<double>(achieved), static_cast<double>(err)};
      }
      b_pow *= b;
    }
    a_pow *= a;
  }
  if (best.relative_error > epsilon_rel) {
    throw NotFoundError("density_approximate: best relative error " +
                        std::to_string(best.relative_error) + " exceeds " +
                        std::to_string(epsilon_rel) + " with exponents up to " +
                        std::to_string(max_exponent));
  }
  return best;
}

double measure_gamma(std::span<const AdjustmentEvent> events, double eta_star,
                     const BaseLrFn& base_lr, double neighborhood_e) {
  if (!(eta_star > 0.0)) throw InputError("measure_gamma: eta* must be positive");
  double gamma = 0.0;
  std::size_t used = 0;
  for (const auto& ev : events) {
    if (ev.new_scale == ev.old_scale) continue;
    const double base = base_lr(ev.step);
    const double before = ev.old_scale * base;
    const double after = ev.new_scale * base;
    const double gap_before = std::abs(before - eta_star);
    if (gap_before < neighborhood_e || gap_before == 0.0) continue;
    gamma = std::max(gamma, std::abs(after - eta_star) / gap_before);
    ++used;
  }
  if (used == 0) {
    throw InputError("measure_gamma: no scale-changing event outside the e-neighborhood");
  }
  return gamma;
}

ConvergenceVerdict convergence_band(std::int64_t adjustment_count, const AdaLRSConfig& cfg,
                                    double eta_star, double e, double final_effective_lr) {
  if (!(eta_star > e)) throw InputError("convergence_band: degenerate band (eta* <= e)");
  if (e < 0.0) throw InputError("convergence_band: negative e");
  const auto f = rectified_factors(cfg, adjustment_count);
  ConvergenceVerdict v;
  v.final_scale_lr = final_effective_lr;
  v.eta_star = eta_star;
  v.band_lo = (eta_star - e) / (f.alpha_prime * f.beta_prime_inv);
  v.band_hi = (eta_star + e) * f.beta_prime_inv * f.alpha_prime;
  v.inside = v.band_lo < final_effective_lr && final_effective_lr < v.band_hi;
  return v;
}

}  // namespace adalrs
