#pragma once

#include <cstdint>
#include <string>

#include "denmix/io/config.hpp"
#include "denmix/io/records.hpp"
#include "denmix/mixture.hpp"

namespace denmix::io {

struct MixRunOptions {
  StreamFormat format = StreamFormat::jsonl;
  std::uint64_t limit = 0;   // 0 = unlimited
  std::uint32_t workers = 1;
};

// Library entry point behind the `mix` subcommand: corpus file in, example
// stream out. Returns the assembler's counters. Output bytes depend only on
// (config, corpus, format, limit), never on workers.
AssembleStats mix_corpus_to_file(const PipelineConfig& config,
                                 const std::string& corpus_path,
                                 const std::string& out_path,
                                 const MixRunOptions& options = {});

}  // namespace denmix::io
