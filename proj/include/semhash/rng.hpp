#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace semhash {

namespace detail {

// splitmix64; used only to derive stream seeds from (seed, tag...) tuples.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Mixes a sequence of 64-bit values into one stream seed. Used to partition
/// randomness per (purpose, epoch, iteration, slot) so that parallelism and
/// replay cannot change results.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x8f38aa3d5c6e9b17ULL;
  std::uint64_t out = 0;
  for (std::uint64_t p : parts) {
    state ^= p;
    out = detail::splitmix64(state);
  }
  return out;
}

/// Deterministic random stream. Wraps std::mt19937_64 (fully specified by the
/// standard) and converts to doubles by hand, so sequences are identical on
/// every platform. std::uniform_real_distribution is deliberately avoided:
/// its output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform draw strictly inside (0, 1); 53-bit resolution.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  void fill_uniform(std::vector<double>& out, std::size_t n) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = uniform();
  }

 private:
  std::mt19937_64 gen_;
};

/// Fisher-Yates shuffle driven by Rng::uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace semhash
