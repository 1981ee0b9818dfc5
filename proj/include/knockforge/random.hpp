#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace knockforge {

// Stream identifiers keep seed derivations for different consumers apart.
enum class Stream : std::uint64_t {
  kGaussianKnockoffRow = 1,
  kResidualPermutation = 2,
  kFoldAssignment = 3,
  kC2stSplit = 4,
  kDesign = 5,
  kSupport = 6,
  kNoise = 7,
  kPairingShuffle = 8,
  kBenchmarkRun = 9,
  kKnockoffGeneration = 10,
  kCrossfitResidual = 11,
  kSubsample = 12,
};

// splitmix64 finalizer; mixes (seed, stream, index) into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

// Seeded generator with platform-independent draws. Only the engine comes from
// <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace knockforge
