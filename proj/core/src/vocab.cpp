#include "denmix/vocab.hpp"

#include <algorithm>
#include <set>

#include "denmix/errors.hpp"

namespace denmix {

const char* to_string(Paradigm p) {
  switch (p) {
    case Paradigm::R: return "R";
    case Paradigm::S: return "S";
    case Paradigm::X: return "X";
  }
  return "?";
}

std::optional<Paradigm> parse_paradigm(std::string_view s) {
  if (s == "R") return Paradigm::R;
  if (s == "S") return Paradigm::S;
  if (s == "X") return Paradigm::X;
  return std::nullopt;
}

std::string paradigm_display(Paradigm p) {
  return std::string("[") + to_string(p) + "]";
}

std::uint32_t SpecialVocab::total_size() const {
  return paradigm_start + static_cast<std::uint32_t>(paradigms.size());
}

TokenId SpecialVocab::sentinel(std::uint32_t index) const {
  if (index >= num_sentinels) {
    throw SentinelError("sentinel index " + std::to_string(index) +
                        " out of range: vocabulary has " +
                        std::to_string(num_sentinels) + " sentinels");
  }
  return sentinel_start + index;
}

bool SpecialVocab::is_sentinel(TokenId t) const {
  return t >= sentinel_start && t < sentinel_start + num_sentinels;
}

std::optional<std::uint32_t> SpecialVocab::sentinel_index(TokenId t) const {
  if (!is_sentinel(t)) return std::nullopt;
  return t - sentinel_start;
}

bool SpecialVocab::has_paradigm(Paradigm p) const {
  return std::find(paradigms.begin(), paradigms.end(), p) != paradigms.end();
}

TokenId SpecialVocab::paradigm_id(Paradigm p) const {
  for (std::size_t i = 0; i < paradigms.size(); ++i) {
    if (paradigms[i] == p) return paradigm_start + static_cast<TokenId>(i);
  }
  throw ConfigError(std::string("paradigm ") + to_string(p) +
                    " was not allocated in this vocabulary");
}

std::optional<Paradigm> SpecialVocab::paradigm_of(TokenId t) const {
  if (t < paradigm_start || t >= total_size()) return std::nullopt;
  return paradigms[t - paradigm_start];
}

SpecialVocab allocate_special_vocab(std::uint32_t base_size,
                                    std::uint32_t num_sentinels,
                                    const std::vector<Paradigm>& paradigm_labels,
                                    std::optional<TokenId> eos_id,
                                    const std::vector<TokenId>& reserved_ids) {
  if (base_size == 0) throw ConfigError("base_size must be positive");
  if (num_sentinels == 0) throw ConfigError("num_sentinels must be >= 1");

  std::set<Paradigm> seen;
  for (Paradigm p : paradigm_labels) {
    if (!seen.insert(p).second) {
      throw ConfigError(std::string("duplicate paradigm label ") + to_string(p));
    }
  }

  SpecialVocab v;
  v.base_size = base_size;
  v.sentinel_start = base_size;
  v.num_sentinels = num_sentinels;
  v.paradigm_start = base_size + num_sentinels;
  v.paradigms = paradigm_labels;
  v.eos_id = eos_id.value_or(1);

  if (v.eos_id >= v.sentinel_start && v.eos_id < v.total_size()) {
    throw ConfigError("eos_id " + std::to_string(v.eos_id) +
                      " collides with the allocated special range [" +
                      std::to_string(v.sentinel_start) + ", " +
                      std::to_string(v.total_size()) + ")");
  }
  for (TokenId r : reserved_ids) {
    if (r == v.eos_id) {
      throw ConfigError("reserved id " + std::to_string(r) + " collides with eos_id");
    }
    if (r >= v.sentinel_start && r < v.total_size()) {
      throw ConfigError("reserved id " + std::to_string(r) +
                        " collides with the allocated special range");
    }
  }
  return v;
}

const std::map<std::string, Paradigm, std::less<>>& default_paradigm_aliases() {
  static const std::map<std::string, Paradigm, std::less<>> aliases = {
      {"[R]", Paradigm::R},   {"[S]", Paradigm::S},   {"[X]", Paradigm::X},
      {"[NLU]", Paradigm::R}, {"[S2S]", Paradigm::S}, {"[NLG]", Paradigm::X},
  };
  return aliases;
}

}  // namespace denmix
