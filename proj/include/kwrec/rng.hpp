#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kwrec {

// splitmix64 step; used to derive independent stream seeds from a master
// seed plus coordinates such as (iteration, slot).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// mt19937_64 with our own distribution implementations on top, so streams
// are pinned by this code rather than by the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased integer in [0, n)
  int uniform_int(int n);

  // Box-Muller; consumes exactly two raw draws per call.
  double normal(double mean, double sd);

  double lognormal(double mu, double sigma) {
    return std::exp(normal(mu, sigma));
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(items[static_cast<std::size_t>(i)],
                items[static_cast<std::size_t>(j)]);
    }
  }

  // k distinct values from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 gen_;
};

}  // namespace kwrec
