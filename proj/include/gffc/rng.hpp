#pragma once
// Counter-based random numbers. A stream is addressed by a 64-bit key and
// three 32-bit words (typically site, sweep, tag); streams never share state.

#include <array>
#include <cstdint>

namespace gffc {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept;

// SplitMix64 finalizer; used to derive child seeds from (seed, tag).
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t a, std::uint32_t b = 0, std::uint32_t c = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0,1).
  double uniform() noexcept;
  double normal() noexcept;
  double exponential() noexcept;

 private:
  void refill() noexcept;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gffc
