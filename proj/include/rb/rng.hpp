#pragma once

// Counter-based RNG (Philox4x32-10, Salmon et al. 2011). A stream is keyed by
// (seed, stream_id); distinct stream ids give disjoint, reproducible streams
// regardless of how work is partitioned across threads. The 128-bit counter
// layout is [block_lo, block_hi, stream_lo, stream_hi].

#include <cstdint>

#include "rb/linalg.hpp"

namespace rb {

namespace detail {
inline void philox_round(uint32_t c[4], uint32_t k0, uint32_t k1) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  uint64_t p0 = static_cast<uint64_t>(M0) * c[0];
  uint64_t p1 = static_cast<uint64_t>(M1) * c[2];
  uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  uint32_t out0 = hi1 ^ c[1] ^ k0;
  uint32_t out1 = lo1;
  uint32_t out2 = hi0 ^ c[3] ^ k1;
  uint32_t out3 = lo0;
  c[0] = out0;
  c[1] = out1;
  c[2] = out2;
  c[3] = out3;
}
}  // namespace detail

inline void philox4x32_10(const uint32_t ctr[4], const uint32_t key[2], uint32_t out[4]) {
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  uint32_t c[4] = {ctr[0], ctr[1], ctr[2], ctr[3]};
  uint32_t k0 = key[0], k1 = key[1];
  for (int r = 0; r < 10; ++r) {
    detail::philox_round(c, k0, k1);
    k0 += W0;
    k1 += W1;
  }
  out[0] = c[0];
  out[1] = c[1];
  out[2] = c[2];
  out[3] = c[3];
}

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream) {
    key_[0] = static_cast<uint32_t>(seed);
    key_[1] = static_cast<uint32_t>(seed >> 32);
    stream_[0] = static_cast<uint32_t>(stream);
    stream_[1] = static_cast<uint32_t>(stream >> 32);
  }

  uint64_t next_u64() {
    if (have_ == 0) refill();
    --have_;
    uint64_t r = buf_[1 - have_];
    return r;
  }

  // uniform on [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // uniform on (0,1]; safe under log()
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }
  // uniform on [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller with a cached second value
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vec normal_vec(int n, double sigma = 1.0) {
    Vec g(n);
    for (int i = 0; i < n; ++i) g[i] = sigma * normal();
    return g;
  }

 private:
  void refill() {
    uint32_t ctr[4] = {static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
                       stream_[0], stream_[1]};
    uint32_t out[4];
    philox4x32_10(ctr, key_, out);
    buf_[0] = (static_cast<uint64_t>(out[1]) << 32) | out[0];
    buf_[1] = (static_cast<uint64_t>(out[3]) << 32) | out[2];
    ++block_;
    have_ = 2;
  }

  uint32_t key_[2];
  uint32_t stream_[2];
  uint64_t block_ = 0;
  uint64_t buf_[2] = {0, 0};
  int have_ = 0;
  double cached_ = 0;
  bool has_cached_ = false;
};

}  // namespace rb
