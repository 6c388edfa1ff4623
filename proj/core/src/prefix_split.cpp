#include "denmix/prefix_split.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "denmix/errors.hpp"

namespace denmix {

std::uint32_t sample_target_length(std::uint32_t length,
                                   const SplitPolicy& policy, RngStream& rng) {
  if (length < 2) {
    throw ValidationError("sample_target_length: sequence too short to split "
                          "(length " + std::to_string(length) + ")");
  }
  std::int64_t u = 1;
  switch (policy.mode) {
    case SplitPolicy::Mode::quarter_mean:
      u = rng.uniform_int(1, std::max<std::int64_t>(1, length / 2));
      break;
    case SplitPolicy::Mode::full_uniform:
      u = rng.uniform_int(1, static_cast<std::int64_t>(length) - 1);
      break;
    case SplitPolicy::Mode::fixed_fraction:
      u = std::llround(policy.fraction * static_cast<double>(length));
      break;
  }
  u = std::max<std::int64_t>(u, policy.min_target);
  u = std::clamp<std::int64_t>(u, 1, static_cast<std::int64_t>(length) - 1);
  return static_cast<std::uint32_t>(u);
}

ExampleBody make_prefix_example(const TokenSequence& tokens,
                                std::uint32_t target_len,
                                const SpecialVocab& vocab, bool with_sentinel) {
  const std::size_t n = tokens.size();
  if (target_len < 1 || target_len >= n) {
    throw ValidationError("make_prefix_example: target length " +
                          std::to_string(target_len) +
                          " must satisfy 1 <= u <= " + std::to_string(n) +
                          " - 1");
  }
  const std::size_t split = n - target_len;

  ExampleBody body;
  body.inputs.assign(tokens.begin(), tokens.begin() + split);
  if (with_sentinel) {
    const TokenId s = vocab.sentinel(0);
    body.inputs.push_back(s);
    body.targets.push_back(s);
  }
  body.targets.insert(body.targets.end(), tokens.begin() + split, tokens.end());
  body.targets.push_back(vocab.eos_id);
  return body;
}

}  // namespace denmix
