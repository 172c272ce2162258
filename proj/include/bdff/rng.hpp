#pragma once

#include <cstdint>
#include <string_view>

namespace bdff {

// Seed mixer (splitmix64). Also used to derive substream seeds from names.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t hash_name(std::string_view name);

// Deterministic random stream (xoshiro256**). The std:: distributions are
// implementation-defined, so all draws needed for reproducible artifacts
// (uniform, normal, Poisson, shuffles) are implemented here.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) { reseed(seed); }
  RandomStream(uint64_t seed, std::string_view substream);

  void reseed(uint64_t seed);

  uint64_t next_u64();
  // Uniform in [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Inclusive bounds, rejection sampled so the distribution is exact.
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Box-Muller; pairs are cached.
  double normal();
  double normal(double mu, double sigma);
  // Exact Poisson sampler: Knuth for small lambda, PTRS rejection otherwise.
  int64_t poisson(double lambda);

  // Derive an independent child stream, e.g. one per scene or per sample.
  RandomStream fork(std::string_view substream) const;

 private:
  uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bdff
