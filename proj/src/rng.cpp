#include "noisecurve/rng.hpp"

#include <cmath>
#include <numbers>

namespace noisecurve {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kStreamSalt = 0xBF58476D1CE4E5B9ull;
constexpr std::uint64_t kSubstreamSalt = 0x94D049BB133111EBull;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::derive_key(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t substream) {
  std::uint64_t k = mix64(seed + kGamma);
  k = mix64(k ^ (stream + kStreamSalt));
  k = mix64(k ^ (substream + kSubstreamSalt));
  return k;
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  // u1 shifted into (0,1] so the log is always finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

}  // namespace noisecurve
