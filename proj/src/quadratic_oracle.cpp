// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "adalrs/errors.hpp"
#include "adalrs/oracle.hpp"

namespace adalrs {

QuadraticOracle::QuadraticOracle(QuadraticConfig cfg)
    : cfg_(cfg),
      params_(cfg.dim, cfg.init_scale),
      optimizer_(cfg.optimizer, cfg.momentum, cfg.dim),
      rng_(cfg.seed),
      grad_(cfg.dim, 0.0) {
  if (!(cfg_.curvature > 0.0)) throw ConfigError("oracle.curvature", "must be > 0");
  if (cfg_.dim == 0) throw ConfigError("oracle.dim", "must be >= 1");
  if (!(cfg_.noise_std >= 0.0)) throw ConfigError("oracle.noise_std", "must be >= 0");
  initial_loss_ = loss();
}

double QuadraticOracle::loss() const {
  double sq = 0.0;
  for (double p : params_) sq += p * p;
  return 0.5 * cfg_.curvature * sq;
}

double QuadraticOracle::step(double lr) {
  const double current = loss();
  const bool blown_up = initial_loss_ > 0.0 && current > kDivergenceFactor * initial_loss_;
  if (!std::isfinite(current) || blown_up) {
    throw DivergedError("quadratic oracle diverged (loss " + std::to_string(current) + ")",
                        steps_);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    grad_[i] = cfg_.curvature * params_[i];
    if (cfg_.noise_std > 0.0) grad_[i] += cfg_.noise_std * rng_.normal();
  }
  optimizer_.apply(params_, grad_, lr);
  for (double p : params_) {
    if (!std::isfinite(p)) {
      throw DivergedError("quadratic oracle parameters became non-finite", steps_);
    }
  }
  ++steps_;
  return current;
}

Checkpoint QuadraticOracle::snapshot() const {
  return {std::string(kind()), params_, optimizer_.buffer(), rng_.save(), steps_};
}

void QuadraticOracle::restore(const Checkpoint& checkpoint) {
  if (checkpoint.oracle_kind != kind() || checkpoint.params.size() != params_.size()) {
    throw InputError("QuadraticOracle::restore: checkpoint does not match this oracle");
  }
  params_ = checkpoint.params;
  optimizer_.set_buffer(checkpoint.optimizer_aux);
  rng_.load(checkpoint.rng_state);
  steps_ = checkpoint.steps_taken;
}

}  // namespace adalrs
