// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adalrs/checkpoint.hpp"
#include "adalrs/rng.hpp"

namespace adalrs {

/// A trainable problem: one call to step() is one optimizer update.
class Oracle {
 public:
  virtual ~Oracle() = default;

  /// Loss at the current point, then one update with learning rate `lr`.
  /// Throws DivergedError when the loss is non-finite or beyond
  /// kDivergenceFactor times the initial loss, or the update leaves the
  /// parameters non-finite.
  virtual double step(double lr) = 0;

  virtual Checkpoint snapshot() const = 0;
  virtual void restore(const Checkpoint& checkpoint) = 0;

  virtual double initial_loss() const = 0;
  virtual std::string_view kind() const = 0;
  virtual std::int64_t steps_taken() const = 0;
};

using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

inline constexpr double kDivergenceFactor = 1e12;

enum class OptimizerKind { Sgd, Momentum };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

/// Plain or heavy-ball SGD: buf <- mu*buf + g; p <- p - lr*buf.
class SgdOptimizer {
 public:
  SgdOptimizer(OptimizerKind kind, double momentum, std::size_t size);

  void apply(std::span<double> params, std::span<const double> grad, double lr);

  const std::vector<double>& buffer() const { return buffer_; }
  void set_buffer(std::vector<double> buffer);

 private:
  OptimizerKind kind_;
  double momentum_;
  std::vector<double> buffer_;
};

struct QuadraticConfig {
  double curvature = 100.0;
  std::size_t dim = 1;
  double noise_std = 0.0;
  double init_scale = 1.0;  ///< every coordinate of the starting point
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;
};

/// L(psi) = C/2 |psi|^2 with additive Gaussian gradient noise:
/// g = C psi + xi, xi ~ N(0, sigma^2 I).
class QuadraticOracle final : public Oracle {
 public:
  explicit QuadraticOracle(QuadraticConfig cfg);

  double step(double lr) override;
  Checkpoint snapshot() const override;
  void restore(const Checkpoint& checkpoint) override;
  double initial_loss() const override { return initial_loss_; }
  std::string_view kind() const override { return "quadratic"; }
  std::int64_t steps_taken() const override { return steps_; }

  double loss() const;
  const std::vector<double>& params() const { return params_; }
  const QuadraticConfig& config() const { return cfg_; }

 private:
  QuadraticConfig cfg_;
  std::vector<double> params_;
  SgdOptimizer optimizer_;
  Rng rng_;
  std::vector<double> grad_;
  double initial_loss_ = 0.0;
  std::int64_t steps_ = 0;
};

struct MlpConfig {
  std::vector<std::size_t> sizes{8, 16, 1};
  std::size_t samples = 512;
  std::size_t batch_size = 0;  ///< 0 or >= samples: full batch
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;
};

/// Tanh MLP (linear output) regressing a frozen dataset produced by a
/// seeded teacher of the same shape. Loss is half the mean squared error.
class MlpOracle final : public Oracle {
 public:
  explicit MlpOracle(MlpConfig cfg);

  double step(double lr) override;
  Checkpoint snapshot() const override;
  void restore(const Checkpoint& checkpoint) override;
  double initial_loss() const override { return initial_loss_; }
  std::string_view kind() const override { return "mlp"; }
  std::int64_t steps_taken() const override { return steps_; }

  std::span<const double> params() const { return params_; }
  void set_params(std::span<const double> params);
  std::size_t param_count() const { return params_.size(); }

  /// Loss and gradient over the whole dataset at `params`.
  double full_loss(std::span<const double> params) const;
  std::vector<double> full_gradient(std::span<const double> params) const;

 private:
  double batch_loss_and_grad(std::span<const double> params, std::span<const std::size_t> rows,
                             std::span<double> grad) const;

  MlpConfig cfg_;
  std::vector<double> inputs_;   // samples x sizes.front()
  std::vector<double> targets_;  // samples x sizes.back()
  std::vector<double> params_;
  SgdOptimizer optimizer_;
  Rng rng_;
  std::vector<std::size_t> rows_;
  std::vector<double> grad_;
  double initial_loss_ = 0.0;
  std::int64_t steps_ = 0;
};

enum class OracleKind { Quadratic, Mlp };

std::string_view to_string(OracleKind kind);
OracleKind parse_oracle_kind(std::string_view name);

/// Flat oracle description as read from config files (oracle.* keys).
struct OracleConfig {
  OracleKind kind = OracleKind::Quadratic;
  double curvature = 100.0;
  std::size_t dim = 1;
  double noise_std = 0.0;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> mlp_sizes{8, 16, 1};
  std::size_t mlp_samples = 512;
  std::size_t batch_size = 0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum_coeff = 0.9;

  void validate() const;
};

std::unique_ptr<Oracle> make_oracle(const OracleConfig& cfg);
OracleFactory make_factory(OracleConfig cfg);

struct GridCell {
  double lr = 0.0;
  std::optional<double> final_loss;  ///< absent when the run diverged
  std::vector<double> losses;        ///< losses up to divergence or the end
};

struct GridResult {
  double best_lr = 0.0;
  std::vector<GridCell> cells;
};

/// One constant-LR run per grid point from a fresh oracle; best LR minimizes
/// the mean loss of the final `tail` steps. Throws NotFoundError when every
/// run diverged.
GridResult grid_search(const OracleFactory& factory, std::span<const double> lr_grid,
                       std::int64_t steps, std::int64_t tail = 100);

/// 1/C for the quadratic oracle.
double optimal_lr_reference(const QuadraticConfig& cfg);
/// Brute force: grid_search(...).best_lr.
double optimal_lr_reference(const OracleFactory& factory, std::span<const double> lr_grid,
                            std::int64_t steps, std::int64_t tail = 100);

/// Runs fn(i) for i in [0, n) across worker threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace adalrs
