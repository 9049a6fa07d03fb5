#pragma once

#include <cmath>
#include <cstdint>

#include "e2p/tensor.hpp"

namespace e2p {

/// Counter-based deterministic generator. Output i is a pure function of
/// (seed, i), so streams are reproducible across runs and platforms and can
/// be split by deriving child seeds. The mixer is the splitmix64 finalizer.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed) {}

  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() {
    counter_ += kGamma;
    return mix(seed_ + counter_);
  }

  /// Uniform in [0,1) with 53 random bits.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (cosine branch; two uniforms per draw,
  /// no cached state, so the stream position is a pure function of the
  /// number of draws).
  double next_gaussian() {
    double u1 = 1.0 - next_unit();  // (0,1], keeps log finite
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Independent child stream. Children with distinct ids never collide
  /// with each other or with the parent for any feasible draw count.
  SeededRng split(uint64_t stream_id) const {
    return SeededRng(mix(seed_ + kGamma) ^ mix(stream_id * kGamma + 0x632BE59BD9B4E019ull));
  }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  uint64_t seed_;
  uint64_t counter_ = 0;
};

/// i.i.d. standard normal tensor, filled row-major from the stream.
inline DenseMap gaussian_noise(SeededRng& rng, int h, int w, int c) {
  DenseMap out(h, w, c, Task::Latent, {-6.0, 6.0});
  for (auto& v : out.data) v = float(rng.next_gaussian());
  return out;
}

}  // namespace e2p
