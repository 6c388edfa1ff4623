#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace denmix {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Denoising paradigm of a mixture component: R = short-span/moderate-rate
// infilling, S = sequential prefix-to-suffix continuation, X = extreme
// (long-span or high-rate) infilling.
enum class Paradigm { R = 0, S = 1, X = 2 };

const char* to_string(Paradigm p);
std::optional<Paradigm> parse_paradigm(std::string_view s);

// Canonical prompt rendering, e.g. "[R]".
std::string paradigm_display(Paradigm p);

// Layout of special ids stacked on top of a base vocabulary.
// Sentinels occupy a contiguous range ascending from base_size; paradigm
// ids follow the sentinels. eos_id defaults to 1, reserved inside the base
// range the way pad=0/eos=1 conventionally are.
struct SpecialVocab {
  std::uint32_t base_size = 0;
  TokenId eos_id = 1;
  TokenId sentinel_start = 0;
  std::uint32_t num_sentinels = 0;
  TokenId paradigm_start = 0;
  std::vector<Paradigm> paradigms;  // in id order

  std::uint32_t total_size() const;

  // k-th sentinel, ascending; throws SentinelError past the end.
  TokenId sentinel(std::uint32_t index) const;
  bool is_sentinel(TokenId t) const;
  std::optional<std::uint32_t> sentinel_index(TokenId t) const;

  bool has_paradigm(Paradigm p) const;
  // Throws ConfigError when the label was not allocated.
  TokenId paradigm_id(Paradigm p) const;
  std::optional<Paradigm> paradigm_of(TokenId t) const;

  bool is_base(TokenId t) const { return t < base_size; }
  bool is_special(TokenId t) const { return t >= base_size && t < total_size(); }
};

// Builds the special-id layout. reserved_ids lets the caller declare ids
// that must not collide with the allocated specials (throws ConfigError on
// overlap, as for an eos_id placed inside the sentinel range).
SpecialVocab allocate_special_vocab(std::uint32_t base_size,
                                    std::uint32_t num_sentinels,
                                    const std::vector<Paradigm>& paradigm_labels,
                                    std::optional<TokenId> eos_id = std::nullopt,
                                    const std::vector<TokenId>& reserved_ids = {});

// Prompt-string aliases accepted wherever a paradigm label is expected.
// Canonical [R]/[S]/[X] plus the release-style [NLU]/[S2S]/[NLG] names.
const std::map<std::string, Paradigm, std::less<>>& default_paradigm_aliases();

}  // namespace denmix
