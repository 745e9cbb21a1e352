// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace adalrs {

/// Seedable generator whose full state (engine plus cached Gaussian spare)
/// round-trips through a string. Gaussian draws use Box-Muller on the raw
/// mt19937_64 stream so sequences match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::string save() const;
  void load(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.save() == b.save(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace adalrs
