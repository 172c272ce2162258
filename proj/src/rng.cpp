#include "bdff/rng.hpp"

#include <cmath>

#include "bdff/errors.hpp"

namespace bdff {

uint64_t hash_name(std::string_view name) {
  // FNV-1a 64-bit.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RandomStream::RandomStream(uint64_t seed, std::string_view substream) {
  reseed(mix_seed(seed ^ hash_name(substream)));
}

void RandomStream::reseed(uint64_t seed) {
  uint64_t s = seed;
  for (auto& w : state_) {
    s = mix_seed(s);
    w = s;
  }
  have_spare_ = false;
  spare_ = 0.0;
}

static inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t RandomStream::next_u64() {
  const uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int64_t RandomStream::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw DomainError("uniform_int: empty range");
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int64_t>(v % span);
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

double RandomStream::normal(double mu, double sigma) { return mu + sigma * normal(); }

int64_t RandomStream::poisson(double lambda) {
  if (lambda < 0.0) throw DomainError("poisson: negative rate");
  if (lambda == 0.0) return 0;
  if (lambda < 10.0) {
    // Knuth: multiply uniforms until the product drops below e^-lambda.
    const double l = std::exp(-lambda);
    int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }
  // PTRS transformed-rejection (Hormann 1993), valid for lambda >= 10.
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * loglam - lambda - std::lgamma(kf + 1.0)) {
      return static_cast<int64_t>(kf);
    }
  }
}

RandomStream RandomStream::fork(std::string_view substream) const {
  RandomStream copy = *this;
  const uint64_t salt = copy.next_u64();
  return RandomStream(salt, substream);
}

}  // namespace bdff
