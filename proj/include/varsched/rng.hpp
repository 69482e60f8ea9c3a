#pragma once

#include <cstdint>
#include <cmath>

namespace varsched {

// Counter-based pseudorandom generator (SplitMix64 stream).
//
// A stream is identified by a 64-bit key.  The i-th raw word of stream k
// (counting from i = 0) is
//
//     word(k, i) = mix(k + (i + 1) * 0x9E3779B97F4A7C15)
//
// where mix is the SplitMix64 finalizer
//
//     z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
//     z ^= z >> 27;  z *= 0x94D049BB133111EB;
//     z ^= z >> 31;
//
// all in wrapping 64-bit arithmetic.  This matches the classic SplitMix64
// sequence for seed k, so word(0, 0..2) = {0xE220A8397B1DCDAF,
// 0x6E789E6AA1B965F4, 0x06C45D188009454F}.
//
// Sub-stream s of stream k is the stream with key
//
//     child(k, s) = mix(k + (s + 1) * 0xD1342543DE82EF95)
//
// (a distinct odd gamma, so child keys never collide with in-stream words).
// Derived quantities:
//
//     uniform01: (word >> 11) * 2^-53                  in [0, 1)
//     uniform(lo, hi): lo + uniform01 * (hi - lo)
//     exponential(mean): -mean * log1p(-uniform01)
//     bernoulli(p): uniform01 < p
//
// Everything above is the complete specification; a reimplementation in any
// language that follows it reproduces our streams bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // Random access: i-th raw word of this stream, independent of cursor state.
  std::uint64_t word(std::uint64_t i) const {
    return mix(key_ + (i + 1) * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t next_u64() { return word(counter_++); }

  double next_uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + next_uniform01() * (hi - lo);
  }

  // Exponential with the given mean; mean <= 0 degenerates to the point mass
  // at zero so that "no laxity" style models need no special casing.
  double exponential(double mean) {
    if (mean <= 0.0) {
      next_u64();  // keep stream positions aligned across parameter choices
      return 0.0;
    }
    return -mean * std::log1p(-next_uniform01());
  }

  bool bernoulli(double p) { return next_uniform01() < p; }

  // Independent child stream; safe to draw from concurrently with the parent.
  Rng split(std::uint64_t stream) const {
    return Rng(mix(key_ + (stream + 1) * 0xD1342543DE82EF95ULL));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace varsched
