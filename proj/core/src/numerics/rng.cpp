#include "dgtl/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "dgtl/errors.hpp"

namespace dgtl::numerics {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian(double mean, double stddev) {
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  const double z = r * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

int Rng::uniform_int(int bound) {
  if (bound <= 0) throw ValueError("uniform_int bound must be positive");
  const auto b = static_cast<std::uint64_t>(bound);
  std::uint64_t mask = b - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    const std::uint64_t r = next_u64() & mask;
    if (r < b) return static_cast<int>(r);
  }
}

std::size_t Rng::index(std::size_t bound) {
  if (bound == 0) throw ValueError("index bound must be positive");
  std::uint64_t mask = bound - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    const std::uint64_t r = next_u64() & mask;
    if (r < bound) return static_cast<std::size_t>(r);
  }
}

int Rng::categorical(std::span<const double> weights) {
  if (weights.empty()) throw ValueError("categorical needs at least one weight");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw ValueError("categorical weight must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ValueError("categorical weights sum to zero");
  const double r = uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (r < cum) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

std::vector<double> Rng::gaussian_vector(std::size_t n, double mean, double stddev) {
  std::vector<double> out(n);
  for (auto& v : out) v = gaussian(mean, stddev);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = base ^ h;
  return splitmix64(x);
}

}  // namespace dgtl::numerics
