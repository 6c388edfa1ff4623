#pragma once

#include <cstdint>
#include <vector>

#include "denmix/denoisers.hpp"
#include "denmix/example.hpp"
#include "denmix/rng.hpp"

namespace denmix {

// true = token belongs to a corrupted (noise) span.
using NoiseMask = std::vector<bool>;

std::uint32_t count_noise(const NoiseMask& mask);
std::uint32_t count_runs(const NoiseMask& mask);

// Deterministic span geometry for a raw segment of `length` tokens:
//   noise_tokens = round(length * rate)        (half away from zero)
//   spans        = max(1, round(noise_tokens / mu))
// This is the count the partition strategy realizes exactly (before its
// feasibility clamp) and the quantity segment planning is built on.
struct SpanCounts {
  std::uint32_t noise_tokens = 0;
  std::uint32_t spans = 0;
};
SpanCounts expected_span_counts(std::uint32_t length, double rate, double mu);

struct SegmentBudget {
  std::uint32_t raw_tokens_length = 0;
  std::uint32_t inputs_length = 0;
  std::uint32_t targets_length = 0;
};

// Finds the largest raw segment length T whose corrupted rendering fits
// inputs_budget:
//   inputs(T)  = (T - noise(T)) + spans(T) * extra_in  + 1   <= inputs_budget
//   targets(T) =      noise(T)  + spans(T) * extra_tgt + 1
// inputs(T) is non-decreasing in T, so every shorter remainder segment fits
// too. Throws BudgetError when no T >= 1 fits.
SegmentBudget compute_segment_lengths(std::uint32_t inputs_budget, double rate,
                                      double mu,
                                      std::uint32_t extra_in = 1,
                                      std::uint32_t extra_tgt = 1);

// Random mask over `length` positions with round(length * rate) noise
// tokens (clamped to [1, length-1]). Needs length >= 2 so both classes are
// nonempty. The partition strategy realizes expected_span_counts() exactly;
// normal/uniform draw lengths until the noise budget is consumed and place
// the runs uniformly at random.
NoiseMask sample_noise_mask(std::uint32_t length, double rate, double mu,
                            SpanLengthDist dist, RngStream& rng);

// Replaces each noise run with one sentinel in inputs and expands it after
// the same sentinel in targets. Sentinels ascend from sentinel 0 per
// example. Both sides end with EOS. Throws SentinelError when the mask has
// more runs than the vocabulary has sentinels.
ExampleBody apply_sentinels(const TokenSequence& tokens, const NoiseMask& mask,
                            const SpecialVocab& vocab);

// Inverse of apply_sentinels / the sentinel-style prefix split: splices the
// target spans back into the inputs. Accepts inputs with or without the
// trailing EOS; targets must end with EOS. Throws ParseError on grammar
// violations (out-of-order sentinels, dangling references, stray special
// tokens).
TokenSequence reconstruct(const TokenSequence& inputs,
                          const TokenSequence& targets,
                          const SpecialVocab& vocab);

// Uniformly random split of `total` items into `parts` nonempty runs.
// Exposed because the mask property tests exercise it directly.
std::vector<std::uint32_t> random_segmentation(std::uint32_t total,
                                               std::uint32_t parts,
                                               RngStream& rng);

}  // namespace denmix
