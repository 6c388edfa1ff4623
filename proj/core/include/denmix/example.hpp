#pragma once

#include <cstdint>

#include "denmix/vocab.hpp"

namespace denmix {

// One unit of source text: a declared id plus its token ids.
// Within a corpus file ids must be strictly increasing.
struct CorpusRecord {
  std::uint64_t id = 0;
  TokenSequence tokens;
};

// Where an emitted example came from: the leading source record of its
// (possibly merged) buffer, the token offset of its segment inside that
// buffer, and the key of the RngStream that corrupted it.
struct Provenance {
  std::uint64_t record_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t stream_key = 0;
};

// Inputs/targets pair before mixture bookkeeping is attached.
struct ExampleBody {
  TokenSequence inputs;
  TokenSequence targets;
};

struct Example {
  TokenSequence inputs;
  TokenSequence targets;
  std::uint32_t denoiser_index = 0;
  Provenance provenance;
};

}  // namespace denmix
