#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace debacer {

// Counter-based generator (SplitMix64 over a keyed counter). Every draw is a
// pure function of (key, counter), so sequences are identical on every
// platform and compiler. Distributions are implemented here rather than taken
// from <random>, whose distribution algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Number of failures before the first success, success probability p in (0, 1].
  std::uint64_t geometric(double p);

  // Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace debacer
