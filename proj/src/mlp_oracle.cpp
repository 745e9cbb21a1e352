// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <string>

#include "adalrs/errors.hpp"
#include "adalrs/oracle.hpp"

namespace adalrs {

namespace {

// Layer l owns a (out x in) weight block followed by `out` biases.
std::size_t count_params(const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
  return n;
}

void init_layers(const std::vector<std::size_t>& sizes, Rng& rng, std::span<double> params) {
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double gain = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < out * in; ++i) params[at++] = gain * rng.normal();
    for (std::size_t i = 0; i < out; ++i) params[at++] = 0.0;
  }
}

// Forward pass for one row; fills per-layer activations (acts[0] = input).
void forward(const std::vector<std::size_t>& sizes, std::span<const double> params,
             std::span<const double> x, std::vector<std::vector<double>>& acts) {
  acts.resize(sizes.size());
  acts[0].assign(x.begin(), x.end());
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double* w = params.data() + at;
    const double* b = w + out * in;
    auto& next = acts[l + 1];
    next.assign(out, 0.0);
    const bool hidden = l + 2 < sizes.size();
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < in; ++i) z += w[o * in + i] * acts[l][i];
      next[o] = hidden ? std::tanh(z) : z;
    }
    at += out * (in + 1);
  }
}

}  // namespace

MlpOracle::MlpOracle(MlpConfig cfg)
    : cfg_(std::move(cfg)),
      optimizer_(cfg_.optimizer, cfg_.momentum, count_params(cfg_.sizes)),
      rng_(cfg_.seed) {
  if (cfg_.sizes.size() < 2) throw ConfigError("oracle.mlp_sizes", "need at least two layers");
  for (auto s : cfg_.sizes) {
    if (s == 0) throw ConfigError("oracle.mlp_sizes", "layer sizes must be positive");
  }
  if (cfg_.samples == 0) throw ConfigError("oracle.mlp_samples", "must be >= 1");

  const std::size_t n_in = cfg_.sizes.front();
  const std::size_t n_out = cfg_.sizes.back();
  const std::size_t n_params = count_params(cfg_.sizes);

  // Separate streams for data, teacher and student keep each reproducible
  // on its own.
  Rng data_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng teacher_rng(cfg_.seed ^ 0xc2b2ae3d27d4eb4fULL);
  Rng student_rng(cfg_.seed ^ 0x165667b19e3779f9ULL);

  inputs_.resize(cfg_.samples * n_in);
  for (auto& x : inputs_) x = data_rng.normal();

  std::vector<double> teacher(n_params);
  init_layers(cfg_.sizes, teacher_rng, teacher);
  // Non-zero teacher biases so targets are not odd in the inputs.
  {
    std::size_t at = 0;
    for (std::size_t l = 0; l + 1 < cfg_.sizes.size(); ++l) {
      at += cfg_.sizes[l + 1] * cfg_.sizes[l];
      for (std::size_t o = 0; o < cfg_.sizes[l + 1]; ++o) teacher[at++] = 0.5 * teacher_rng.normal();
    }
  }
  targets_.resize(cfg_.samples * n_out);
  std::vector<std::vector<double>> acts;
  for (std::size_t r = 0; r < cfg_.samples; ++r) {
    forward(cfg_.sizes, teacher, std::span<const double>(inputs_).subspan(r * n_in, n_in), acts);
    for (std::size_t o = 0; o < n_out; ++o) targets_[r * n_out + o] = acts.back()[o];
  }

  params_.resize(n_params);
  init_layers(cfg_.sizes, student_rng, params_);
  grad_.assign(n_params, 0.0);
  initial_loss_ = full_loss(params_);
}

void MlpOracle::set_params(std::span<const double> params) {
  if (params.size() != params_.size()) throw InputError("MlpOracle::set_params: size mismatch");
  params_.assign(params.begin(), params.end());
}

double MlpOracle::batch_loss_and_grad(std::span<const double> params,
                                      std::span<const std::size_t> rows,
                                      std::span<double> grad) const {
  const auto& sizes = cfg_.sizes;
  const std::size_t n_in = sizes.front();
  const std::size_t n_out = sizes.back();
  const std::size_t layers = sizes.size() - 1;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<std::size_t> offset(layers);
  for (std::size_t l = 0, at = 0; l < layers; ++l) {
    offset[l] = at;
    at += sizes[l + 1] * (sizes[l] + 1);
  }

  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double total = 0.0;
  for (std::size_t r : rows) {
    forward(sizes, params, std::span<const double>(inputs_).subspan(r * n_in, n_in), acts);
    delta.assign(n_out, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double err = acts.back()[o] - targets_[r * n_out + o];
      total += 0.5 * err * err;
      delta[o] = err * inv_n;
    }
    if (grad.empty()) continue;
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = sizes[l];
      const std::size_t out = sizes[l + 1];
      double* gw = grad.data() + offset[l];
      double* gb = gw + out * in;
      const double* w = params.data() + offset[l];
      for (std::size_t o = 0; o < out; ++o) {
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * acts[l][i];
        gb[o] += delta[o];
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < out; ++o) s += w[o * in + i] * delta[o];
        const double a = acts[l][i];
        prev_delta[i] = s * (1.0 - a * a);
      }
      delta.swap(prev_delta);
    }
  }
  return total * inv_n;
}

double MlpOracle::full_loss(std::span<const double> params) const {
  std::vector<std::size_t> rows(cfg_.samples);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return batch_loss_and_grad(params, rows, {});
}

std::vector<double> MlpOracle::full_gradient(std::span<const double> params) const {
  std::vector<std::size_t> rows(cfg_.samples);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> g(params_.size());
  batch_loss_and_grad(params, rows, g);
  return g;
}

double MlpOracle::step(double lr) {
  const bool full = cfg_.batch_size == 0 || cfg_.batch_size >= cfg_.samples;
  if (full) {
    rows_.resize(cfg_.samples);
    std::iota(rows_.begin(), rows_.end(), std::size_t{0});
  } else {
    rows_.resize(cfg_.batch_size);
    for (auto& r : rows_) r = rng_.below(cfg_.samples);
  }
  const double current = batch_loss_and_grad(params_, rows_, grad_);
  const bool blown_up = initial_loss_ > 0.0 && current > kDivergenceFactor * initial_loss_;
  if (!std::isfinite(current) || blown_up) {
    throw DivergedError("mlp oracle diverged (loss " + std::to_string(current) + ")", steps_);
  }
  optimizer_.apply(params_, grad_, lr);
  for (double p : params_) {
    if (!std::isfinite(p)) throw DivergedError("mlp parameters became non-finite", steps_);
  }
  ++steps_;
  return current;
}

Checkpoint MlpOracle::snapshot() const {
  return {std::string(kind()), params_, optimizer_.buffer(), rng_.save(), steps_};
}

void MlpOracle::restore(const Checkpoint& checkpoint) {
  if (checkpoint.oracle_kind != kind() || checkpoint.params.size() != params_.size()) {
    throw InputError("MlpOracle::restore: checkpoint does not match this oracle");
  }
  params_ = checkpoint.params;
  optimizer_.set_buffer(checkpoint.optimizer_aux);
  rng_.load(checkpoint.rng_state);
  steps_ = checkpoint.steps_taken;
}

}  // namespace adalrs
