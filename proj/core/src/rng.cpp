#include "denmix/rng.hpp"

#include <cmath>

#include "denmix/errors.hpp"

namespace denmix {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer; full 64-bit avalanche.
std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// FNV-1a over the label bytes; labels are short and fixed, collisions do
// not matter beyond stream independence.
std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

RngStream RngStream::child(std::string_view label) const {
  RngStream c(seed_);
  c.path_ = mix64(path_ ^ mix64(hash_label(label) + kGamma));
  return c;
}

RngStream RngStream::child(std::string_view label, std::uint64_t index) const {
  RngStream c = child(label);
  c.path_ = mix64(c.path_ + mix64(index + kGamma));
  return c;
}

std::uint64_t RngStream::key() const {
  return mix64(mix64(seed_ + kGamma) ^ path_);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key() + counter_ * kGamma);
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("uniform_below: bound must be nonzero");
  // Lemire's multiply-shift with rejection of the biased low range.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ValidationError("uniform_int: empty range");
  const std::uint64_t span =
      static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (span == 0) {  // full 64-bit range
    return static_cast<std::int64_t>(next_u64());
  }
  return lo + static_cast<std::int64_t>(uniform_below(span));
}

double RngStream::uniform_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller; the second variate is discarded so the draw count per call
  // is fixed, which keeps streams replayable.
  const double u1 = 1.0 - uniform_double();  // (0, 1]
  const double u2 = uniform_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  return mean + stddev * r * std::cos(theta);
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  if (weights.empty()) throw ValidationError("categorical: no weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("categorical: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("categorical: zero total weight");
  const double x = uniform_double() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (x < cum) return i;
  }
  return weights.size() - 1;
}

}  // namespace denmix
