#pragma once

#include <cstdint>

namespace noisecurve {

// Counter-based splittable generator. A stream is identified by the key
// (seed, stream, substream); draw k of a stream depends only on that key
// and k, so streams can be opened in any order and interleaved freely
// without changing any draw. Output words come from the splitmix64
// finalizer applied to key + counter.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0,
                     std::uint64_t substream = 0)
      : key_(derive_key(seed, stream, substream)) {}

  std::uint64_t next_u64();

  // Uniform on [0,1), 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  // Uniform integer on [0, n), n > 0. Unbiased via rejection.
  std::uint64_t below(std::uint64_t n);

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t substream);

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// splitmix64 finalizer, the stateless mixing core of RngStream.
std::uint64_t mix64(std::uint64_t z);

// Deterministic in-place Fisher-Yates controlled by the given stream.
template <typename Vec>
void shuffle(Vec& v, RngStream& rng) {
  if (v.size() < 2) return;
  for (std::size_t i = v.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    auto tmp = v[i];
    v[i] = v[j];
    v[j] = tmp;
  }
}

}  // namespace noisecurve
