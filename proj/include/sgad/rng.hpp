#pragma once

#include <array>
#include <cstdint>

namespace sgad {

// Philox4x32-10 counter-based generator. A (seed, stream) pair selects the
// key; the counter walks through the stream. Distribution transforms are
// implemented here so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  // Independent generator for a sub-task, keyed from this generator's seed
  // and the given id. Does not advance this generator.
  Rng fork(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// One Philox4x32 block (10 rounds).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

// SplitMix64 finalizer; used to derive keys and child seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace sgad
