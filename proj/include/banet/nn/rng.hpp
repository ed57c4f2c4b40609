#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace banet::nn {

// Counter-based, splittable generator. A generator is just a 64-bit key;
// draw(i) hashes (key, i) with the splitmix64 finalizer, derive(tag) forks an
// independent stream. Draws are stateless and order-free, so initialization,
// dropout and augmentation can each pull from their own stream without any
// shared sequential state. Not cryptographic.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  Rng derive(std::uint64_t tag) const {
    return Rng(FromKey{}, mix(key_ ^ mix(tag + 0x632BE59BD9B4E019ull)));
  }

  Rng derive(std::string_view tag) const {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
    for (unsigned char ch : tag) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return derive(h);
  }

  std::uint64_t bits(std::uint64_t ctr) const {
    return mix(key_ + (ctr + 1) * 0x9E3779B97F4A7C15ull);
  }

  // uniform in [0, 1)
  double unit(std::uint64_t ctr) const {
    return static_cast<double>(bits(ctr) >> 11) * 0x1.0p-53;
  }

  std::uint64_t key() const { return key_; }

  class Stream;
  Stream stream() const;

private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
};

// Sequential convenience cursor over one stream.
class Rng::Stream {
public:
  explicit Stream(const Rng& r) : rng_(r) {}
  std::uint64_t next_bits() { return rng_.bits(ctr_++); }
  double next_unit() { return rng_.unit(ctr_++); }
  // uniform integer in [0, n)
  std::uint64_t next_index(std::uint64_t n) { return next_bits() % n; }
  double next_gauss() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // Box-Muller; u1 kept strictly positive
    const double u1 = static_cast<double>((rng_.bits(ctr_++) >> 11) + 1) * 0x1.0p-53;
    const double u2 = rng_.unit(ctr_++);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

private:
  Rng rng_;
  std::uint64_t ctr_ = 0;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

inline Rng::Stream Rng::stream() const { return Stream(*this); }

// Stream tags, one per consumer so streams never collide.
namespace rng_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kDropout = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kAugment = 4;
inline constexpr std::uint64_t kSynth = 5;
inline constexpr std::uint64_t kRaters = 6;
inline constexpr std::uint64_t kValSplit = 7;
inline constexpr std::uint64_t kFold = 8;
} // namespace rng_tag

} // namespace banet::nn
