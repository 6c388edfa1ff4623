#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace denmix {

// Counter-based splittable random stream.
//
// A stream is identified by a 64-bit seed plus a path of labels; child()
// derives an independent stream without disturbing the parent's counter.
// Identical (seed, path) pairs replay the same draw sequence on every
// platform and under any worker layout, which is what the pipeline's
// byte-identical determinism contract rests on. Distributions are
// implemented here rather than taken from <random> because the standard
// ones are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), path_(0), counter_(0) {}

  RngStream child(std::string_view label) const;
  RngStream child(std::string_view label, std::uint64_t index) const;

  // Stable identifier of (seed, path); recorded in example provenance.
  std::uint64_t key() const;

  std::uint64_t next_u64();

  // Unbiased draw in [0, bound); bound must be nonzero.
  std::uint64_t uniform_below(std::uint64_t bound);

  // Inclusive range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // [0, 1) with 53-bit resolution.
  double uniform_double();

  double normal(double mean, double stddev);

  // Index drawn proportionally to weights (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);

  // Fisher-Yates; consumes size()-1 bounded draws.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t path_;
  std::uint64_t counter_;
};

}  // namespace denmix
