#pragma once

#include <cstdint>

#include "denmix/denoisers.hpp"
#include "denmix/example.hpp"
#include "denmix/rng.hpp"

namespace denmix {

// Draws the target (suffix) length u for a segment of `length` tokens under
// the given policy. Guarantees 1 <= u <= length-1; needs length >= 2.
std::uint32_t sample_target_length(std::uint32_t length,
                                   const SplitPolicy& policy, RngStream& rng);

// Splits tokens into (prefix, suffix-of-target_len). With the boundary
// sentinel (default) the pair shares the R/X grammar:
//   inputs  = prefix ++ [sentinel_0]            (no EOS)
//   targets = [sentinel_0] ++ suffix ++ [EOS]
// Without it: inputs = prefix, targets = suffix ++ [EOS].
ExampleBody make_prefix_example(const TokenSequence& tokens,
                                std::uint32_t target_len,
                                const SpecialVocab& vocab,
                                bool with_sentinel = true);

}  // namespace denmix
