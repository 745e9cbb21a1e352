// SPDX-License-Identifier: Apache-2.0

#include "adalrs/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "adalrs/errors.hpp"

namespace adalrs {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Sgd ? "sgd" : "momentum";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum") return OptimizerKind::Momentum;
  throw ConfigError("oracle.optimizer", "expected sgd or momentum, got '" + std::string(name) + "'");
}

std::string_view to_string(OracleKind kind) {
  return kind == OracleKind::Quadratic ? "quadratic" : "mlp";
}

OracleKind parse_oracle_kind(std::string_view name) {
  if (name == "quadratic") return OracleKind::Quadratic;
  if (name == "mlp") return OracleKind::Mlp;
  throw ConfigError("oracle.kind", "expected quadratic or mlp, got '" + std::string(name) + "'");
}

SgdOptimizer::SgdOptimizer(OptimizerKind kind, double momentum, std::size_t size)
    : kind_(kind), momentum_(momentum) {
  if (kind_ == OptimizerKind::Momentum) {
    if (!(momentum_ >= 0.0 && momentum_ < 1.0)) {
      throw ConfigError("oracle.momentum_coeff", "must lie in [0, 1)");
    }
    buffer_.assign(size, 0.0);
  }
}

void SgdOptimizer::apply(std::span<double> params, std::span<const double> grad, double lr) {
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    buffer_[i] = momentum_ * buffer_[i] + grad[i];
    params[i] -= lr * buffer_[i];
  }
}

void SgdOptimizer::set_buffer(std::vector<double> buffer) {
  if (buffer.size() != buffer_.size()) {
    throw InputError("SgdOptimizer::set_buffer: size mismatch");
  }
  buffer_ = std::move(buffer);
}

void OracleConfig::validate() const {
  if (kind == OracleKind::Quadratic) {
    if (!(curvature > 0.0)) throw ConfigError("oracle.curvature", "must be > 0");
    if (dim == 0) throw ConfigError("oracle.dim", "must be >= 1");
    if (!(noise_std >= 0.0)) throw ConfigError("oracle.noise_std", "must be >= 0");
    if (!std::isfinite(init_scale)) throw ConfigError("oracle.init_scale", "must be finite");
  } else {
    if (mlp_sizes.size() < 2) throw ConfigError("oracle.mlp_sizes", "need at least two layers");
    if (std::find(mlp_sizes.begin(), mlp_sizes.end(), 0u) != mlp_sizes.end()) {
      throw ConfigError("oracle.mlp_sizes", "layer sizes must be positive");
    }
    if (mlp_samples == 0) throw ConfigError("oracle.mlp_samples", "must be >= 1");
  }
  if (optimizer == OptimizerKind::Momentum && !(momentum_coeff >= 0.0 && momentum_coeff < 1.0)) {
    throw ConfigError("oracle.momentum_coeff", "must lie in [0, 1)");
  }
}

std::unique_ptr<Oracle> make_oracle(const OracleConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OracleKind::Quadratic) {
    QuadraticConfig q;
    q.curvature = cfg.curvature;
    q.dim = cfg.dim;
    q.noise_std = cfg.noise_std;
    q.init_scale = cfg.init_scale;
    q.seed = cfg.seed;
    q.optimizer = cfg.optimizer;
    q.momentum = cfg.momentum_coeff;
    return std::make_unique<QuadraticOracle>(q);
  }
  MlpConfig m;
  m.sizes = cfg.mlp_sizes;
  m.samples = cfg.mlp_samples;
  m.batch_size = cfg.batch_size;
  m.seed = cfg.seed;
  m.optimizer = cfg.optimizer;
  m.momentum = cfg.momentum_coeff;
  return std::make_unique<MlpOracle>(m);
}

OracleFactory make_factory(OracleConfig cfg) {
  cfg.validate();
  return [cfg] { return make_oracle(cfg); };
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

GridResult grid_search(const OracleFactory& factory, std::span<const double> lr_grid,
                       std::int64_t steps, std::int64_t tail) {
  if (lr_grid.empty()) throw InputError("grid_search: empty LR grid");
  if (steps < 1) throw InputError("grid_search: steps must be >= 1");
  if (tail < 1) throw InputError("grid_search: tail must be >= 1");

  GridResult result;
  result.cells.resize(lr_grid.size());
  parallel_for(lr_grid.size(), [&](std::size_t i) {
    GridCell& cell = result.cells[i];
    cell.lr = lr_grid[i];
    auto oracle = factory();
    cell.losses.reserve(static_cast<std::size_t>(steps));
    try {
      for (std::int64_t t = 0; t < steps; ++t) cell.losses.push_back(oracle->step(cell.lr));
    } catch (const DivergedError&) {
      return;
    }
    const auto n = static_cast<std::size_t>(std::min(tail, steps));
    double sum = 0.0;
    for (std::size_t j = cell.losses.size() - n; j < cell.losses.size(); ++j) sum += cell.losses[j];
    cell.final_loss = sum / static_cast<double>(n);
  });

  const GridCell* best = nullptr;
  for (const auto& cell : result.cells) {
    if (cell.final_loss && (!best || *cell.final_loss < *best->final_loss)) best = &cell;
  }
  if (!best) throw NotFoundError("grid_search: every run diverged");
  result.best_lr = best->lr;
  return result;
}

double optimal_lr_reference(const QuadraticConfig& cfg) { return 1.0 / cfg.curvature; }

double optimal_lr_reference(const OracleFactory& factory, std::span<const double> lr_grid,
                            std::int64_t steps, std::int64_t tail) {
  return grid_search(factory, lr_grid, steps, tail).best_lr;
}

}  // namespace adalrs
