#pragma once

#include <cmath>
#include <cstdint>

namespace pw {

// Identifies one bootstrap replicate within a run. The random stream consumed
// by a replicate is a pure function of (master_seed, replicate_index).
struct ReplicateSeed {
  std::uint64_t master_seed = 0;
  std::uint32_t replicate_index = 0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Splittable counter-style generator, pinned so that samples are identical
// across platforms and runs. All sampling in the project goes through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // burn-in decorrelates adjacent seeds
    detail::splitmix64(state_);
    detail::splitmix64(state_);
  }

  Rng(ReplicateSeed seed, std::uint64_t purpose)
      : Rng(mix(mix(seed.master_seed) ^
                mix(0x6a09e667f3bcc908ULL + seed.replicate_index)) ^
            mix(0xbb67ae8584caa73bULL + purpose)) {}

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // uniform double in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), n >= 1; unbiased via rejection
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller (pair cached)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // independent child stream
  Rng split() { return Rng(next_u64() ^ 0x3c6ef372fe94f82bULL); }

 private:
  static std::uint64_t mix(std::uint64_t v) {
    return detail::splitmix64(v);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fixed purpose tags keep the per-replicate substreams independent.
namespace purpose {
constexpr std::uint64_t kObservedBootstrap = 1;
constexpr std::uint64_t kMarginalTreatment = 2;
constexpr std::uint64_t kMarginalCovariates = 3;
constexpr std::uint64_t kClassifier = 4;
constexpr std::uint64_t kRetry = 5;
constexpr std::uint64_t kDgp = 6;
constexpr std::uint64_t kCrossValidation = 7;
constexpr std::uint64_t kStochastic = 8;
constexpr std::uint64_t kBootstrapSe = 9;
}  // namespace purpose

}  // namespace pw
