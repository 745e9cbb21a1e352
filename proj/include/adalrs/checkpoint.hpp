// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adalrs {

/// Complete trainable state: parameters, optimizer auxiliaries and RNG.
struct Checkpoint {
  std::string oracle_kind;
  std::vector<double> params;
  std::vector<double> optimizer_aux;
  std::string rng_state;
  std::int64_t steps_taken = 0;

  /// Binary encoding; doubles are stored by bit pattern.
  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

}  // namespace adalrs
