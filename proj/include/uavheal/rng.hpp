#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace uavheal {

// Seeded generator with explicit bit-to-real conversion so that streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  // Fisher-Yates prefix: `count` distinct elements of `pool` in sampled order.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t count) {
    for (std::size_t i = 0; i < count && i < pool.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count < pool.size() ? count : pool.size());
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent per-trial / per-task seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace uavheal
