#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace npb {

/// Philox4x32-10 counter-based generator.
///
/// A (seed, stream) pair names an independent sequence; the position inside
/// the sequence is a plain counter. Replication r of a study uses stream r, so
/// results never depend on the order in which replications are scheduled.
/// Satisfies UniformRandomBitGenerator with 64-bit output.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (used_ >= 2) refill();
    return buffer_[used_++];
  }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal by inversion.
  double normal() noexcept;

  std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept {
    std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                     static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    buffer_[0] = (static_cast<std::uint64_t>(ctr[0]) << 32) | ctr[1];
    buffer_[1] = (static_cast<std::uint64_t>(ctr[2]) << 32) | ctr[3];
    ++counter_;
    used_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int used_ = 2;
};

/// Stream identifiers used by the simulation and inference code.
namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kCensoring = 2;
inline constexpr std::uint64_t kPit = 3;
inline constexpr std::uint64_t kParameterDraws = 4;
inline constexpr std::uint64_t kMonteCarlo = 5;

/// Stream for (purpose, cell, replication): purpose in the low byte.
constexpr std::uint64_t make(std::uint64_t purpose, std::uint64_t cell, std::uint64_t replication) {
  return (cell << 40) ^ (replication << 8) ^ purpose;
}
}  // namespace streams

}  // namespace npb
