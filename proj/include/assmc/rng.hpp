#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace assmc {

using Engine = std::mt19937_64;

/// Purpose tags mixed into a stream path so that distinct uses of randomness
/// for the same (stage, particle) never share draws.
enum class Purpose : std::uint64_t {
  kInit = 1,
  kInner = 2,
  kSelect = 3,
  kResample = 4,
  kMove = 5,
  kReproject = 6,
  kPilot = 7,
  kData = 8,
  kBasis = 9,
};

/// Counter-based stream derivation. A stream is identified by a 64-bit key
/// obtained by hashing the master seed with the derivation path, so the same
/// path always yields the same engine regardless of evaluation order or
/// thread assignment.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ 0x243F6A8885A308D3ULL)) {}

  [[nodiscard]] RngStream derive(std::uint64_t tag) const {
    return RngStream(key_, mix(key_ ^ mix(tag + 0x9E3779B97F4A7C15ULL)));
  }
  [[nodiscard]] RngStream derive(Purpose purpose) const {
    return derive(static_cast<std::uint64_t>(purpose) | (std::uint64_t{1} << 63));
  }
  [[nodiscard]] RngStream derive(std::initializer_list<std::uint64_t> path) const {
    RngStream out = *this;
    for (auto tag : path) out = out.derive(tag);
    return out;
  }

  [[nodiscard]] Engine engine() const { return Engine(key_); }
  [[nodiscard]] std::uint64_t key() const { return key_; }

 private:
  RngStream(std::uint64_t /*parent*/, std::uint64_t key) : key_(key) {}

  // splitmix64 finaliser
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace assmc
