// SPDX-License-Identifier: Apache-2.0

#include "adalrs/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "adalrs/errors.hpp"

namespace adalrs {

namespace {

constexpr char kMagic[4] = {'A', 'L', 'C', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

void put_doubles(std::string& out, const std::vector<double>& xs) {
  put_u64(out, xs.size());
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::string bytes() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<double> doubles() {
    const auto n = u64();
    need(n * 8);
    std::vector<double> xs(n);
    for (auto& x : xs) x = std::bit_cast<double>(u64());
    return xs;
  }

  void magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kMagic, 4) != 0) {
      throw InputError("Checkpoint::deserialize: bad magic");
    }
    pos_ += 4;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw InputError("Checkpoint::deserialize: truncated input");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Checkpoint::serialize() const {
  std::string out(kMagic, 4);
  put_bytes(out, oracle_kind);
  put_doubles(out, params);
  put_doubles(out, optimizer_aux);
  put_bytes(out, rng_state);
  put_u64(out, static_cast<std::uint64_t>(steps_taken));
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.magic();
  Checkpoint c;
  c.oracle_kind = r.bytes();
  c.params = r.doubles();
  c.optimizer_aux = r.doubles();
  c.rng_state = r.bytes();
  c.steps_taken = static_cast<std::int64_t>(r.u64());
  if (!r.done()) throw InputError("Checkpoint::deserialize: trailing bytes");
  return c;
}

}  // namespace adalrs
