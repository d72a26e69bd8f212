#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ofp {

// Explicit, splittable random state. Nothing in the library touches a global
// generator; every consumer receives an Rng (or a split of one) by reference.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  // Independent child stream; does not advance this generator.
  [[nodiscard]] Rng split(std::uint64_t stream) const;

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal(double mean = 0.0, double stddev = 1.0);
  double beta(double alpha, double beta);
  bool bernoulli(double p);
  std::size_t uniform_index(std::size_t n);
  void fill_normal(std::vector<double>& out);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace ofp
