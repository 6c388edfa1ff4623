#include "denmix/io/records.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "denmix/errors.hpp"

namespace denmix::io {
namespace {

using nlohmann::json;

// Guards resize() against garbage lengths in truncated binary streams.
constexpr std::uint32_t kMaxSequenceLen = 1u << 28;

void append_token_array(std::string& out, const TokenSequence& tokens) {
  out += '[';
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out += ',';
    out += std::to_string(tokens[i]);
  }
  out += ']';
}

void append_json_string(std::string& out, std::string_view s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x",
                        static_cast<unsigned>(static_cast<unsigned char>(c)));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

[[noreturn]] void fail(std::string_view origin, std::size_t line,
                       const std::string& what) {
  throw ParseError(std::string(origin) + " line " + std::to_string(line) +
                   ": " + what);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                std::string_view origin, std::size_t line) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) { known = true; break; }
    }
    if (!known) fail(origin, line, "unknown key \"" + it.key() + "\"");
  }
}

TokenSequence parse_token_array(const json& obj, const char* key,
                                std::string_view origin, std::size_t line) {
  if (!obj.contains(key)) fail(origin, line, std::string("missing \"") + key + "\"");
  const json& arr = obj.at(key);
  if (!arr.is_array()) fail(origin, line, std::string("\"") + key + "\" is not an array");
  TokenSequence out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& v = arr[i];
    if (!v.is_number_unsigned() ||
        v.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
      fail(origin, line, std::string("\"") + key + "\"[" + std::to_string(i) +
                             "] is not a token id");
    }
    out.push_back(static_cast<TokenId>(v.get<std::uint64_t>()));
  }
  return out;
}

std::uint64_t parse_u64_field(const json& obj, const char* key,
                              std::string_view origin, std::size_t line) {
  if (!obj.contains(key)) fail(origin, line, std::string("missing \"") + key + "\"");
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    fail(origin, line, std::string("\"") + key + "\" is not a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

json parse_line_object(const std::string& text, std::string_view origin,
                       std::size_t line) {
  json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded()) fail(origin, line, "invalid JSON");
  if (!obj.is_object()) fail(origin, line, "expected an object");
  return obj;
}

void put_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF),
               static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

TokenSequence read_token_payload(std::istream& in, std::uint32_t len,
                                 std::size_t record) {
  if (len > kMaxSequenceLen) {
    throw ParseError("binary record " + std::to_string(record) +
                     ": implausible sequence length " + std::to_string(len));
  }
  TokenSequence out(len);
  for (std::uint32_t i = 0; i < len; ++i) {
    if (!get_u32(in, out[i])) {
      throw ParseError("binary record " + std::to_string(record) +
                       ": truncated token payload");
    }
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

TokenSequence byte_tokenize(std::string_view text) {
  TokenSequence out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c) + kByteOffset);
  return out;
}

std::string byte_detokenize(const TokenSequence& tokens, const SpecialVocab* vocab) {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t >= kByteOffset && t < kByteVocabSize &&
        (vocab == nullptr || vocab->is_base(t))) {
      out += static_cast<char>(t - kByteOffset);
      continue;
    }
    if (vocab != nullptr) {
      if (t == vocab->eos_id) { out += "</s>"; continue; }
      if (auto k = vocab->sentinel_index(t)) {
        out += "<X_" + std::to_string(*k) + ">";
        continue;
      }
      if (auto p = vocab->paradigm_of(t)) {
        out += paradigm_display(*p);
        continue;
      }
    } else {
      if (t == kPadId) { out += "<pad>"; continue; }
      if (t == kEosId) { out += "</s>"; continue; }
      if (t == kUnkId) { out += "<unk>"; continue; }
    }
    out += "<" + std::to_string(t) + ">";
  }
  return out;
}

ExampleRecord to_record(const Example& ex, const MixtureSpec& spec) {
  if (ex.denoiser_index >= spec.denoisers.size()) {
    throw ValidationError("example refers to denoiser " +
                          std::to_string(ex.denoiser_index) + " but the mixture has " +
                          std::to_string(spec.denoisers.size()));
  }
  ExampleRecord rec;
  rec.inputs = ex.inputs;
  rec.targets = ex.targets;
  rec.denoiser = to_string(spec.denoisers[ex.denoiser_index].label);
  rec.denoiser_index = ex.denoiser_index;
  rec.record_id = ex.provenance.record_id;
  rec.offset = ex.provenance.offset;
  return rec;
}

Example to_example(const ExampleRecord& rec) {
  Example ex;
  ex.inputs = rec.inputs;
  ex.targets = rec.targets;
  ex.denoiser_index = rec.denoiser_index;
  ex.provenance.record_id = rec.record_id;
  ex.provenance.offset = rec.offset;
  return ex;
}

std::string encode_jsonl_line(const ExampleRecord& rec) {
  std::string out = "{\"inputs\":";
  append_token_array(out, rec.inputs);
  out += ",\"targets\":";
  append_token_array(out, rec.targets);
  out += ",\"denoiser\":";
  append_json_string(out, rec.denoiser);
  out += ",\"denoiser_index\":" + std::to_string(rec.denoiser_index);
  out += ",\"record_id\":" + std::to_string(rec.record_id);
  out += ",\"offset\":" + std::to_string(rec.offset);
  out += '}';
  return out;
}

void write_examples_jsonl(std::ostream& out, std::span<const ExampleRecord> recs) {
  for (const ExampleRecord& rec : recs) out << encode_jsonl_line(rec) << '\n';
}

std::vector<ExampleRecord> read_examples_jsonl(std::istream& in) {
  std::vector<ExampleRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    json obj = parse_line_object(line, "examples", lineno);
    check_keys(obj,
               {"inputs", "targets", "denoiser", "denoiser_index", "record_id",
                "offset"},
               "examples", lineno);
    ExampleRecord rec;
    rec.inputs = parse_token_array(obj, "inputs", "examples", lineno);
    rec.targets = parse_token_array(obj, "targets", "examples", lineno);
    if (!obj.contains("denoiser") || !obj.at("denoiser").is_string()) {
      fail("examples", lineno, "missing or non-string \"denoiser\"");
    }
    rec.denoiser = obj.at("denoiser").get<std::string>();
    std::uint64_t idx = parse_u64_field(obj, "denoiser_index", "examples", lineno);
    if (idx > std::numeric_limits<std::uint32_t>::max()) {
      fail("examples", lineno, "\"denoiser_index\" out of range");
    }
    rec.denoiser_index = static_cast<std::uint32_t>(idx);
    rec.record_id = parse_u64_field(obj, "record_id", "examples", lineno);
    rec.offset = parse_u64_field(obj, "offset", "examples", lineno);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_examples_binary(std::ostream& out, std::span<const ExampleRecord> recs) {
  ExampleWriter writer(out, StreamFormat::binary);
  for (const ExampleRecord& rec : recs) writer.write(rec);
}

std::vector<ExampleRecord> read_examples_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    throw ParseError("not a UL2X binary stream (bad magic)");
  }
  std::uint32_t lo = 0;
  unsigned char vb[2];
  if (!in.read(reinterpret_cast<char*>(vb), 2)) {
    throw ParseError("truncated UL2X header");
  }
  lo = static_cast<std::uint32_t>(vb[0]) | (static_cast<std::uint32_t>(vb[1]) << 8);
  if (lo != kBinaryVersion) {
    throw ParseError("unsupported UL2X version " + std::to_string(lo));
  }
  std::vector<ExampleRecord> out;
  for (std::size_t record = 0;; ++record) {
    std::uint32_t in_len = 0;
    if (!get_u32(in, in_len)) break;  // clean end between records
    std::uint32_t tgt_len = 0;
    if (!get_u32(in, tgt_len)) {
      throw ParseError("binary record " + std::to_string(record) +
                       ": truncated header");
    }
    ExampleRecord rec;
    rec.inputs = read_token_payload(in, in_len, record);
    rec.targets = read_token_payload(in, tgt_len, record);
    // The binary format carries token payloads only; attribution fields
    // come back unset.
    rec.denoiser.clear();
    rec.denoiser_index = 0xFFFFFFFFu;
    rec.record_id = record;
    rec.offset = 0;
    out.push_back(std::move(rec));
  }
  return out;
}

ExampleWriter::ExampleWriter(std::ostream& out, StreamFormat format)
    : out_(out), format_(format) {
  if (format_ == StreamFormat::binary) {
    out_.write(kBinaryMagic, 4);
    put_u16(out_, kBinaryVersion);
  }
}

void ExampleWriter::write(const ExampleRecord& rec) {
  if (format_ == StreamFormat::jsonl) {
    out_ << encode_jsonl_line(rec) << '\n';
  } else {
    if (rec.inputs.size() > kMaxSequenceLen || rec.targets.size() > kMaxSequenceLen) {
      throw ValidationError("sequence too long for the binary format");
    }
    put_u32(out_, static_cast<std::uint32_t>(rec.inputs.size()));
    put_u32(out_, static_cast<std::uint32_t>(rec.targets.size()));
    for (TokenId t : rec.inputs) put_u32(out_, t);
    for (TokenId t : rec.targets) put_u32(out_, t);
  }
  ++written_;
}

StreamFormat detect_format(std::istream& in) {
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  bool binary = in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? StreamFormat::binary : StreamFormat::jsonl;
}

std::vector<ExampleRecord> read_examples_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return detect_format(in) == StreamFormat::binary ? read_examples_binary(in)
                                                   : read_examples_jsonl(in);
}

std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool have_prev = false;
  std::uint64_t prev_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    json obj = parse_line_object(line, "corpus", lineno);
    check_keys(obj, {"id", "tokens"}, "corpus", lineno);
    CorpusRecord rec;
    rec.id = parse_u64_field(obj, "id", "corpus", lineno);
    rec.tokens = parse_token_array(obj, "tokens", "corpus", lineno);
    if (have_prev && rec.id <= prev_id) {
      fail("corpus", lineno,
           "record id " + std::to_string(rec.id) + " not greater than previous " +
               std::to_string(prev_id));
    }
    have_prev = true;
    prev_id = rec.id;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CorpusRecord> read_corpus_text(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  std::uint64_t next_id = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    out.push_back({next_id++, byte_tokenize(line)});
  }
  return out;
}

std::vector<CorpusRecord> read_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  bool jsonl = path.ends_with(".jsonl") || path.ends_with(".json");
  return jsonl ? read_corpus_jsonl(in) : read_corpus_text(in);
}

std::string encode_corpus_jsonl_line(const CorpusRecord& rec) {
  std::string out = "{\"id\":" + std::to_string(rec.id) + ",\"tokens\":";
  append_token_array(out, rec.tokens);
  out += '}';
  return out;
}

}  // namespace denmix::io
