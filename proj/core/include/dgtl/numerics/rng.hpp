#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dgtl::numerics {

// Deterministic random stream: xoshiro256++ (Blackman/Vigna; output
// rotl(s0+s3, 23) + s0, state update with the standard <<17 / rotl(45)
// constants), seeded by four successive SplitMix64 outputs. The same seed
// produces the same stream on every platform and run.
//
// Derived draws are fixed mappings of the raw stream:
//   uniform():      (next_u64() >> 11) * 2^-53               in [0,1)
//   gaussian():     Box-Muller, z = sqrt(-2 ln(1-u1)) cos(2 pi u2),
//                   two uniforms per draw, no cached spare
//   uniform_int(n): rejection sampling on the minimal bit mask
//   categorical(w): single uniform against the cumulative weights
//   shuffle:        Fisher-Yates from the back using uniform_int
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double gaussian(double mean = 0.0, double stddev = 1.0);
  int uniform_int(int bound);  // [0, bound)
  std::size_t index(std::size_t bound);
  int categorical(std::span<const double> weights);

  std::vector<double> gaussian_vector(std::size_t n, double mean = 0.0,
                                      double stddev = 1.0);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// Stable sub-stream derivation: mixes a base seed with an FNV-1a hash of
// the tag through SplitMix64.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace dgtl::numerics
