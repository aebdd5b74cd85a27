#pragma once

#include <array>
#include <cstdint>

namespace avreg {

// Philox4x32-10 counter-based generator. A (seed, stream) pair selects an
// independent stream; draws depend only on the pair and the draw index, so
// parallel simulation replicates are reproducible regardless of scheduling.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via Box-Muller (second draw of each pair is cached).
  double normal();

  // Poisson draw; sequential inversion for small means, transformed
  // rejection (PTRS) for large ones.
  long poisson(double mean);

  // Raw 4-word block for a given counter; exposed for the known-answer test.
  static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                            const std::array<std::uint32_t, 2>& key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> out_{};
  std::uint64_t block_index_ = 0;
  std::uint64_t stream_ = 0;
  int out_pos_ = 4;
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
};

}  // namespace avreg
