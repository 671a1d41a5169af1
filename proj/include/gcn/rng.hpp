#pragma once

#include <cstdint>

namespace gcn {

// Deterministic PRNG: xoshiro256++ seeded through a splitmix64 expansion of
// a single 64-bit seed. Integer-only state transitions, so the same seed
// yields the same draw sequence on every platform.
//
// fork(stream) derives an independent child generator keyed off the seed the
// parent was constructed with (not its current state), so forked streams are
// stable no matter how many draws the parent has made. Used to give batches
// and examples their own reproducible dropout streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 bits of randomness.
  double uniform();
  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  bool bernoulli(double p);

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

// splitmix64 output function; the mixing primitive behind Rng seeding and
// fork derivation. Exposed because the harness uses it to derive run seeds.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace gcn
