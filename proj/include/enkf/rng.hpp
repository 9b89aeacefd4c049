#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace enkf {

// SplitMix64 finalizer. Used only to derive stream keys, never as the
// generator itself.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed-splitting scheme: a stream key is obtained by folding a path of
// integer labels (purpose tag, sweep indices, replicate, step, particle, ...)
// into the base seed, one mix64 round per label. Distinct paths give
// distinct keys, and each key owns a private 2^128 counter space, so
// streams derived from different paths never overlap.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path) {
  std::uint64_t k = mix64(seed ^ 0x454e4b462d4c4142ull);
  for (std::uint64_t p : path) k = mix64(k ^ mix64(p));
  return k;
}

// Stream purposes, the first label of every derivation path.
namespace stream {
inline constexpr std::uint64_t kTrajectory = 1;
inline constexpr std::uint64_t kEnsembleInit = 2;
inline constexpr std::uint64_t kEnkfStep = 3;
inline constexpr std::uint64_t kPfStep = 4;
inline constexpr std::uint64_t kSweepJ = 5;
inline constexpr std::uint64_t kSweepEps = 6;
inline constexpr std::uint64_t kVerify = 7;
inline constexpr std::uint64_t kBench = 8;
}  // namespace stream

// Philox4x32-10 counter-based generator (constants from Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3"). The output block is a
// pure function of (key, counter): no sequential state to carry across
// threads, which is what makes per-particle and per-replicate draws
// reproducible under any parallel schedule.
class RngStream {
 public:
  RngStream() : RngStream(0) {}

  explicit RngStream(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key),
             static_cast<std::uint32_t>(key >> 32)} {}

  // Child stream with its own counter space.
  RngStream split(std::uint64_t index) const {
    return RngStream(derive_key(key64(), {index}));
  }

  std::uint64_t key64() const {
    return (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
  }

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  static std::array<std::uint32_t, 4> philox_block(
      std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  void refill() {
    buf_ = philox_block(counter_, key_);
    buf_pos_ = 0;
    for (int i = 0; i < 4; ++i) {
      if (++counter_[i] != 0) break;
    }
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_{0, 0, 0, 0};
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace enkf
