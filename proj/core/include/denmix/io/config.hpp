#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "denmix/denoisers.hpp"
#include "denmix/toy/model.hpp"
#include "denmix/vocab.hpp"

namespace denmix::io {

struct VocabConfig {
  std::uint32_t base_size = 32000;
  std::uint32_t num_sentinels = 100;
  std::vector<Paradigm> paradigm_labels = {Paradigm::R, Paradigm::S, Paradigm::X};
  std::optional<TokenId> eos_id;
  std::vector<TokenId> reserved_ids;
};

struct PipelineConfig {
  MixtureSpec mixture;       // validated
  VocabConfig vocab_config;
  SpecialVocab vocab;        // allocated from vocab_config
  toy::ToyConfig toy;        // vocab_size filled from vocab
  std::map<std::string, Paradigm, std::less<>> aliases;
  std::string preset_name;   // empty when denoisers were given explicitly
};

// Parses a JSON config. A "preset" key expands first; explicit keys then
// override the expanded spec. Unknown keys are rejected at every level
// (ConfigError naming the key); syntax errors report the line number.
// Schema documented in README.
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace denmix::io
