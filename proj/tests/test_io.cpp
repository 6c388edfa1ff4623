#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "denmix/errors.hpp"
#include "denmix/io/config.hpp"
#include "denmix/io/records.hpp"
#include "denmix/presets.hpp"
#include "denmix/vocab.hpp"

using namespace denmix;
using namespace denmix::io;

namespace {

ExampleRecord sample_record() {
  ExampleRecord rec;
  rec.inputs = {3, 4, 259, 1};
  rec.targets = {259, 5, 6, 1};
  rec.denoiser = "R";
  rec.denoiser_index = 0;
  rec.record_id = 12;
  rec.offset = 34;
  return rec;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("byte tokenization round trips") {
  const std::string text = "hello, world";
  const TokenSequence tokens = byte_tokenize(text);
  REQUIRE(tokens.size() == text.size());
  CHECK(tokens[0] == static_cast<TokenId>('h') + kByteOffset);
  CHECK(byte_detokenize(tokens) == text);
}

TEST_CASE("detokenization renders specials as markers") {
  const SpecialVocab v = allocate_special_vocab(
      kByteVocabSize, 100, {Paradigm::R, Paradigm::S, Paradigm::X});
  const TokenSequence tokens = {v.paradigm_id(Paradigm::R),
                                static_cast<TokenId>('h') + kByteOffset,
                                v.sentinel(0), v.sentinel(13), v.eos_id};
  CHECK(byte_detokenize(tokens, &v) == "[R]h<X_0><X_13></s>");
  // Without a vocabulary only the reserved low ids have names.
  CHECK(byte_detokenize({kPadId, kEosId, kUnkId, 300}) == "<pad></s><unk><300>");
}

TEST_CASE("jsonl encoding is canonical and byte stable") {
  CHECK(encode_jsonl_line(sample_record()) ==
        "{\"inputs\":[3,4,259,1],\"targets\":[259,5,6,1],\"denoiser\":\"R\","
        "\"denoiser_index\":0,\"record_id\":12,\"offset\":34}");
}

TEST_CASE("jsonl round trips exactly") {
  std::vector<ExampleRecord> recs = {sample_record()};
  recs.push_back(sample_record());
  recs[1].denoiser = "S";
  recs[1].denoiser_index = 2;
  recs[1].inputs = {7};
  recs[1].targets = {8, 1};

  std::ostringstream out;
  write_examples_jsonl(out, recs);
  std::istringstream in(out.str());
  const auto back = read_examples_jsonl(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == recs[0]);
  CHECK(back[1] == recs[1]);

  // Re-serialization reproduces the original bytes.
  std::ostringstream again;
  write_examples_jsonl(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("jsonl reader rejects damage with the line number") {
  const auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_examples_jsonl(in);
  };
  const std::string good = encode_jsonl_line(sample_record());

  CHECK_THROWS_WITH_AS(read(good + "\n{oops\n"), doctest::Contains("line 2"),
                       ParseError);
  CHECK_THROWS_WITH_AS(read("{\"inputs\":[1],\"bogus\":2}"),
                       doctest::Contains("bogus"), ParseError);
  CHECK_THROWS_WITH_AS(read("{\"inputs\":[1]}"), doctest::Contains("targets"),
                       ParseError);
  CHECK_THROWS_AS(read("{\"inputs\":[-1],\"targets\":[1],\"denoiser\":\"R\","
                       "\"denoiser_index\":0,\"record_id\":0,\"offset\":0}"),
                  ParseError);
  CHECK_THROWS_AS(read("[1,2,3]"), ParseError);
  // Blank lines and CRLF endings are tolerated.
  CHECK(read("\n" + good + "\r\n\n").size() == 1);
}

TEST_CASE("binary round trip carries payloads only") {
  std::vector<ExampleRecord> recs = {sample_record()};
  recs.push_back(sample_record());
  recs[1].inputs = {};
  recs[1].targets = {9, 1};

  std::ostringstream out;
  write_examples_binary(out, recs);
  const std::string bytes = out.str();
  CHECK(bytes.substr(0, 4) == "UL2X");

  std::istringstream in(bytes);
  const auto back = read_examples_binary(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].inputs == recs[0].inputs);
  CHECK(back[0].targets == recs[0].targets);
  CHECK(back[1].inputs.empty());
  CHECK(back[1].targets == recs[1].targets);
  // Attribution does not survive the binary format.
  CHECK(back[0].denoiser.empty());
  CHECK(back[0].denoiser_index == 0xFFFFFFFFu);
  CHECK(back[0].record_id == 0);
  CHECK(back[1].record_id == 1);
}

TEST_CASE("binary reader rejects damage") {
  std::vector<ExampleRecord> recs = {sample_record()};
  std::ostringstream out;
  write_examples_binary(out, recs);
  const std::string bytes = out.str();

  const auto read = [](std::string data) {
    std::istringstream in(std::move(data));
    return read_examples_binary(in);
  };
  CHECK_THROWS_WITH_AS(read("NOPE" + bytes.substr(4)), doctest::Contains("magic"),
                       ParseError);
  CHECK_THROWS_WITH_AS(read(std::string("UL2X\x07\x00", 6)),
                       doctest::Contains("version"), ParseError);
  // Cut inside a token payload.
  CHECK_THROWS_WITH_AS(read(bytes.substr(0, bytes.size() - 2)),
                       doctest::Contains("truncated"), ParseError);
  // Cut inside a record header.
  CHECK_THROWS_AS(read(bytes.substr(0, 6 + 4)), ParseError);
  // A clean cut between records is the normal end of stream.
  CHECK(read(bytes).size() == 1);
}

TEST_CASE("format detection sniffs the magic and rewinds") {
  std::vector<ExampleRecord> recs = {sample_record()};
  std::ostringstream bin, text;
  write_examples_binary(bin, recs);
  write_examples_jsonl(text, recs);

  std::istringstream b(bin.str());
  CHECK(detect_format(b) == StreamFormat::binary);
  CHECK(read_examples_binary(b).size() == 1);  // stream was rewound

  std::istringstream t(text.str());
  CHECK(detect_format(t) == StreamFormat::jsonl);
  CHECK(read_examples_jsonl(t).size() == 1);
}

TEST_CASE("records convert to examples and back") {
  const MixtureSpec spec = validate_mixture(preset("t5-sc"));
  Example ex;
  ex.inputs = {3, 259, 1};
  ex.targets = {259, 4, 1};
  ex.denoiser_index = 0;
  ex.provenance = {12, 34, 999};

  const ExampleRecord rec = to_record(ex, spec);
  CHECK(rec.denoiser == "R");
  CHECK(rec.record_id == 12);
  CHECK(rec.offset == 34);

  const Example back = to_example(rec);
  CHECK(back.inputs == ex.inputs);
  CHECK(back.targets == ex.targets);
  CHECK(back.denoiser_index == 0);
  CHECK(back.provenance.record_id == 12);

  Example out_of_range = ex;
  out_of_range.denoiser_index = 9;
  CHECK_THROWS_AS(to_record(out_of_range, spec), ValidationError);
}

TEST_CASE("corpus jsonl parses and enforces increasing ids") {
  const auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_corpus_jsonl(in);
  };
  const auto recs = read("{\"id\":0,\"tokens\":[3,4,5]}\n"
                         "{\"id\":7,\"tokens\":[6]}\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].id == 0);
  CHECK(recs[0].tokens == TokenSequence{3, 4, 5});
  CHECK(recs[1].id == 7);

  CHECK_THROWS_WITH_AS(read("{\"id\":5,\"tokens\":[1]}\n{\"id\":5,\"tokens\":[2]}\n"),
                       doctest::Contains("line 2"), ParseError);
  CHECK_THROWS_WITH_AS(read("{\"id\":0,\"tokens\":[1],\"extra\":1}\n"),
                       doctest::Contains("extra"), ParseError);
  CHECK(encode_corpus_jsonl_line({7, {6}}) == "{\"id\":7,\"tokens\":[6]}");
}

TEST_CASE("text corpora tokenize by byte with sequential ids") {
  std::istringstream in("ab\n\ncd\r\n");
  const auto recs = read_corpus_text(in);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].id == 0);
  CHECK(recs[0].tokens == byte_tokenize("ab"));
  CHECK(recs[1].id == 1);
  CHECK(recs[1].tokens == byte_tokenize("cd"));
}

TEST_CASE("config: a preset expands with overridable budgets") {
  const PipelineConfig cfg = parse_config_text(
      R"({"preset":"ul2","targets_budget":544,"seed":9,
          "vocab":{"base_size":259,"num_sentinels":200}})",
      "test");
  CHECK(cfg.preset_name == "ul2");
  REQUIRE(cfg.mixture.denoisers.size() == 7);
  CHECK(cfg.mixture.inputs_budget == 512);
  CHECK(cfg.mixture.targets_budget == 544);
  CHECK(cfg.mixture.seed == 9);
  CHECK(cfg.vocab.num_sentinels == 200);
  CHECK(cfg.vocab.sentinel(0) == 259);
  CHECK(cfg.toy.vocab_size == cfg.vocab.total_size());
  // The toy window must hold a full mode-tagged prefix example.
  CHECK(cfg.toy.max_len >= 512 + 1 + 544);
}

TEST_CASE("config: explicit denoisers replace the preset list") {
  const PipelineConfig cfg = parse_config_text(
      R"({"preset":"ul2",
          "denoisers":[{"paradigm":"R","mu":3,"rate":0.15},
                       {"paradigm":"S","policy":"full_uniform"}]})",
      "test");
  REQUIRE(cfg.mixture.denoisers.size() == 2);
  CHECK(cfg.mixture.denoisers[0].label == Paradigm::R);
  CHECK(cfg.mixture.denoisers[1].split.mode == SplitPolicy::Mode::full_uniform);
  // The preset's seven rates must not leak into the replacement list.
  CHECK(cfg.mixture.rates == std::vector<double>{0.5, 0.5});
}

TEST_CASE("config: s_policy rewrites every sequential denoiser") {
  const PipelineConfig cfg = parse_config_text(
      R"({"preset":"ul2","s_policy":"full_uniform"})", "test");
  int s_count = 0;
  for (const DenoiserSpec& d : cfg.mixture.denoisers) {
    if (d.label != Paradigm::S) continue;
    ++s_count;
    CHECK(d.split.mode == SplitPolicy::Mode::full_uniform);
  }
  CHECK(s_count == 1);
}

TEST_CASE("config: aliases extend the label table") {
  const PipelineConfig cfg = parse_config_text(
      R"({"denoisers":[{"paradigm":"[NLU]"},{"paradigm":"[CUSTOM]","mu":64}],
          "aliases":{"[CUSTOM]":"X"}})",
      "test");
  REQUIRE(cfg.mixture.denoisers.size() == 2);
  CHECK(cfg.mixture.denoisers[0].label == Paradigm::R);
  CHECK(cfg.mixture.denoisers[1].label == Paradigm::X);
}

TEST_CASE("config: errors name the problem") {
  CHECK_THROWS_WITH_AS(parse_config_text("{\n\"preset\":\"ul2\",\n  oops\n}", "cfg"),
                       doctest::Contains("line 3"), ParseError);
  CHECK_THROWS_WITH_AS(parse_config_text(R"({"preset":"ul2","bogus":1})", "cfg"),
                       doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("{}", "cfg"),
                       doctest::Contains("preset"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"preset":"nope"})", "cfg"), CatalogError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"denoisers":[{"paradigm":"R","rate":-1}]})", "cfg"),
      ValidationError);
  CHECK_THROWS_WITH_AS(
      parse_config_text(
          R"({"denoisers":[{"paradigm":"R","policy":"full_uniform"}]})", "cfg"),
      doctest::Contains("policy"), ConfigError);
  // Mode tokens in play must exist in the vocabulary.
  CHECK_THROWS_WITH_AS(
      parse_config_text(R"({"preset":"ul2","vocab":{"paradigms":["R","S"]}})",
                        "cfg"),
      doctest::Contains("mode token"), ConfigError);
}

TEST_CASE("config: denoiser mu defaults by paradigm while rate is explicit") {
  const PipelineConfig cfg = parse_config_text(
      R"({"denoisers":[{"paradigm":"X","mu":64,"rate":0.5,"span_dist":"normal",
                        "span_count":4,"mode_token":"[NLG]"}],
          "toy":{"d_model":16,"layers":1,"heads":2,"arch":"prefixdec"}})",
      "test");
  const DenoiserSpec& d = cfg.mixture.denoisers[0];
  CHECK(d.mu == 64);
  CHECK(d.rate == 0.5);
  CHECK(d.span_dist == SpanLengthDist::normal);
  CHECK(d.span_count == 4u);
  CHECK(d.effective_mode_token() == Paradigm::X);
  CHECK(cfg.toy.d_model == 16);
  CHECK(cfg.toy.arch == toy::Arch::prefix_lm_decoder);
}

}  // TEST_SUITE
