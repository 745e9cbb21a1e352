// SPDX-License-Identifier: Apache-2.0

#include "adalrs/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "adalrs/errors.hpp"

namespace adalrs {

double Rng::uniform() {
  // 53 random mantissa bits, shifted off zero.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  const auto idx = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  return idx < n ? idx : n - 1;
}

std::string Rng::save() const {
  std::ostringstream os;
  os << engine_ << ' ';
  if (spare_) {
    os << 1 << ' ' << std::bit_cast<std::uint64_t>(*spare_);
  } else {
    os << 0 << ' ' << 0;
  }
  return os.str();
}

void Rng::load(const std::string& state) {
  std::istringstream is(state);
  std::mt19937_64 engine;
  int has_spare = 0;
  std::uint64_t spare_bits = 0;
  is >> engine >> has_spare >> spare_bits;
  if (!is) throw InputError("Rng::load: malformed state");
  engine_ = engine;
  if (has_spare) {
    spare_ = std::bit_cast<double>(spare_bits);
  } else {
    spare_.reset();
  }
}

}  // namespace adalrs
