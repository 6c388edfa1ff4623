#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "denmix/denoisers.hpp"
#include "denmix/example.hpp"

namespace denmix::io {

enum class StreamFormat { jsonl, binary };

// Byte-fallback tokenization: token = byte value + 3, with 0/1/2 reserved
// for pad/eos/unk. Base vocabulary size is therefore 259.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kByteOffset = 3;
inline constexpr std::uint32_t kByteVocabSize = 259;

TokenSequence byte_tokenize(std::string_view text);
// Inverse for byte-range ids; specials render as markers when a vocab is
// given ("<X_3>", "</s>", "[R]"), as "<id>" otherwise.
std::string byte_detokenize(const TokenSequence& tokens,
                            const SpecialVocab* vocab = nullptr);

// Serialized example. `denoiser` is the paradigm label; `denoiser_index`
// pins the mixture slot (labels repeat within a mixture). The JSONL field
// order is fixed so re-serialization is byte-exact.
struct ExampleRecord {
  TokenSequence inputs;
  TokenSequence targets;
  std::string denoiser;
  std::uint32_t denoiser_index = 0;
  std::uint64_t record_id = 0;
  std::uint64_t offset = 0;

  bool operator==(const ExampleRecord&) const = default;
};

ExampleRecord to_record(const Example& ex, const MixtureSpec& spec);
Example to_example(const ExampleRecord& rec);

// --- JSONL example streams ---------------------------------------------
// One object per line:
// {"inputs":[...],"targets":[...],"denoiser":"R","denoiser_index":0,
//  "record_id":0,"offset":0}
std::string encode_jsonl_line(const ExampleRecord& rec);
void write_examples_jsonl(std::ostream& out, std::span<const ExampleRecord> recs);
std::vector<ExampleRecord> read_examples_jsonl(std::istream& in);

// --- Binary example streams ---------------------------------------------
// Header: magic "UL2X", version u16 (little-endian). Per record: inputs
// length u32, targets length u32, then that many u32 token ids, all
// little-endian. Carries token payloads only.
inline constexpr char kBinaryMagic[4] = {'U', 'L', '2', 'X'};
inline constexpr std::uint16_t kBinaryVersion = 1;

void write_examples_binary(std::ostream& out, std::span<const ExampleRecord> recs);
std::vector<ExampleRecord> read_examples_binary(std::istream& in);

// Incremental writer used by the mix pipeline.
class ExampleWriter {
 public:
  ExampleWriter(std::ostream& out, StreamFormat format);
  void write(const ExampleRecord& rec);
  std::uint64_t written() const { return written_; }

 private:
  std::ostream& out_;
  StreamFormat format_;
  std::uint64_t written_ = 0;
};

// Sniffs the binary magic, falls back to JSONL.
std::vector<ExampleRecord> read_examples_file(const std::string& path);
StreamFormat detect_format(std::istream& in);  // leaves the stream rewound

// --- Corpora -------------------------------------------------------------
// JSONL corpus: {"id":0,"tokens":[...]} per line, ids strictly increasing.
// Raw text corpus: one record per nonempty line, byte-fallback tokens,
// sequential ids.
std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in);
std::vector<CorpusRecord> read_corpus_text(std::istream& in);
// Dispatches on extension: .jsonl/.json parse as records, anything else is
// raw text.
std::vector<CorpusRecord> read_corpus_file(const std::string& path);
std::string encode_corpus_jsonl_line(const CorpusRecord& rec);

}  // namespace denmix::io
