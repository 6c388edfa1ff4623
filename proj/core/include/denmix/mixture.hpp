#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "denmix/denoisers.hpp"
#include "denmix/example.hpp"
#include "denmix/rng.hpp"
#include "denmix/span_corruption.hpp"

namespace denmix {

struct AssembleOptions {
  std::uint32_t chunk_max_len = 65536;  // select_chunk cap per record
  std::uint32_t merge_batch = 128;      // records concatenated per merge group
  std::uint32_t workers = 1;            // >1 processes merge groups concurrently
  std::uint64_t limit = 0;              // emitted-example cap; 0 = unlimited
};

// Pull interface over a corpus. next() returns false at end of stream.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual bool next(CorpusRecord& out) = 0;
};

class VectorRecordSource : public RecordSource {
 public:
  explicit VectorRecordSource(std::vector<CorpusRecord> records)
      : records_(std::move(records)) {}
  bool next(CorpusRecord& out) override {
    if (pos_ >= records_.size()) return false;
    out = records_[pos_++];
    return true;
  }

 private:
  std::vector<CorpusRecord> records_;
  std::size_t pos_ = 0;
};

// Contiguous chunk of length <= max_len with a uniformly random feasible
// start; identity (no draw) when the sequence already fits.
TokenSequence select_chunk(const TokenSequence& seq, std::uint32_t max_len,
                           RngStream& rng);

// With merge on, concatenates runs of up to merge_batch sequences and cuts
// the result into raw_len pieces; the final short remainder is kept. With
// merge off, each sequence is cut independently.
std::vector<TokenSequence> merge_and_split(
    const std::vector<TokenSequence>& seqs, std::uint32_t raw_len, bool merge,
    std::uint32_t merge_batch = 128);

// Denoiser slot for the record at stream position record_index:
// modular in shard mode, categorical(rates) on the record's own stream in
// sample mode. Pure in (spec, record_index), which is what makes worker
// layouts irrelevant to the output bytes.
std::size_t assign_denoiser(const MixtureSpec& spec, std::uint64_t record_index);

// Per-denoiser segment geometry the assembler will use. Validates that
// every denoiser fits the configured budgets and (for the partition
// strategy) the sentinel supply; throws BudgetError / SentinelError naming
// the offending denoiser.
std::vector<SegmentBudget> plan_segments(const MixtureSpec& spec,
                                         const SpecialVocab& vocab);

// Prepends the paradigm token of the example's denoiser. Deliberately
// exempt from the inputs budget: a mode-tagged example may be one token
// over it.
Example prepend_mode_token(Example ex, const MixtureSpec& spec,
                           const SpecialVocab& vocab);

struct AssembleStats {
  std::uint64_t records_in = 0;
  std::uint64_t examples_out = 0;
  std::uint64_t dropped_short_segments = 0;  // segments of < 2 tokens
  std::vector<std::uint64_t> assignments;    // records routed per denoiser
};

// Runs the full pipeline: assignment, chunking, merge/split, corruption,
// optional mode token. Examples reach the sink ordered by the leading
// record index of their merge group regardless of worker count.
AssembleStats assemble(const MixtureSpec& spec, const SpecialVocab& vocab,
                       RecordSource& source, const AssembleOptions& options,
                       const std::function<void(Example&&)>& sink);

std::vector<Example> assemble_to_vector(const MixtureSpec& spec,
                                        const SpecialVocab& vocab,
                                        const std::vector<CorpusRecord>& records,
                                        const AssembleOptions& options = {});

}  // namespace denmix
