#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "denmix/vocab.hpp"

namespace denmix {

// How span lengths are drawn inside a noise mask.
//   partition: fix the noise budget and span count up front, then cut both
//              the noise and non-noise tokens into that many nonempty runs.
//   normal:    draw lengths from N(mu, mu/4), rounded and clamped.
//   uniform:   draw lengths uniformly from [1, 2*mu - 1].
enum class SpanLengthDist { partition, normal, uniform };

const char* to_string(SpanLengthDist d);
std::optional<SpanLengthDist> parse_span_dist(std::string_view s);

// How an S-denoiser picks the target (suffix) length u for a segment of
// length L. Always 1 <= u <= L-1.
struct SplitPolicy {
  enum class Mode {
    quarter_mean,    // u ~ uniform[1, floor(L/2)], mean ~= L/4
    full_uniform,    // u ~ uniform[1, L-1]
    fixed_fraction,  // u = clamp(round(fraction * L), 1, L-1)
  };

  Mode mode = Mode::quarter_mean;
  double fraction = 0.25;  // fixed_fraction only
  std::uint32_t min_target = 1;
  bool with_sentinel = true;  // share the sentinel grammar with R/X examples

  // Long-run average of u/L under this policy.
  double expected_fraction() const;
};

const char* to_string(SplitPolicy::Mode m);

// One mixture component. For R/X denoisers mu is a token count; for S
// denoisers the mean span is a fraction of the segment length, resolved
// per segment (mu_is_fraction), and span_count must be 1.
struct DenoiserSpec {
  Paradigm label = Paradigm::R;
  double mu = 3.0;
  bool mu_is_fraction = false;
  double mu_fraction = 0.25;
  double rate = 0.15;  // corruption fraction in (0, 1]
  std::optional<std::uint32_t> span_count;  // fixed n; default: derived from mu
  SpanLengthDist span_dist = SpanLengthDist::partition;
  SplitPolicy split;                     // S only
  std::optional<Paradigm> mode_token;    // defaults to label

  Paradigm effective_mode_token() const { return mode_token.value_or(label); }

  // Corruption fraction this denoiser converges to; used by verification.
  double expected_rate() const;

  // "3", "64", "L/4", ... for catalog listings and reports.
  std::string mu_display() const;
};

// Convenience constructors used by presets and tests.
DenoiserSpec make_span_denoiser(Paradigm label, double mu, double rate,
                                SpanLengthDist dist = SpanLengthDist::partition);
DenoiserSpec make_sequential_denoiser(SplitPolicy::Mode mode, double fraction = 0.25);

enum class AssignmentMode { shard, sample };

const char* to_string(AssignmentMode m);
std::optional<AssignmentMode> parse_assignment_mode(std::string_view s);

struct MixtureSpec {
  std::vector<DenoiserSpec> denoisers;
  std::vector<double> rates;  // empty = uniform; validate_mixture normalizes
  std::uint32_t inputs_budget = 512;
  std::uint32_t targets_budget = 512;
  std::uint64_t seed = 7;
  bool merge_examples = true;
  AssignmentMode assignment = AssignmentMode::sample;
  bool prepend_paradigm = false;
};

// Checks every component invariant, fills default uniform rates, and
// normalizes them to sum 1. Idempotent: a spec that already passes comes
// back unchanged. Throws ValidationError naming the offending field.
MixtureSpec validate_mixture(MixtureSpec spec);

}  // namespace denmix
