#ifndef IBFLOW_RNG_HPP
#define IBFLOW_RNG_HPP

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace ibflow {

/// Seeded random source. One instance per independent unit of work (trainer,
/// generator, shuffle) so that concurrent units never share a stream.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return unit_(gen_); }

  double gaussian() { return normal_(gen_); }

  double gaussian(double stddev) { return stddev * normal_(gen_); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = index(i);
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  /// count iid uniform indices in [0, n); sampling with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count) {
    std::vector<std::size_t> out(count);
    for (auto& v : out) v = index(n);
    return out;
  }

  std::uint64_t next_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// Stable seed derivation for sub-streams (per layer, per critic, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 on the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ibflow

#endif  // IBFLOW_RNG_HPP
