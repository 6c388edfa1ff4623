#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "denmix/errors.hpp"
#include "denmix/mixture.hpp"
#include "denmix/presets.hpp"
#include "denmix/rng.hpp"
#include "denmix/vocab.hpp"

using namespace denmix;

namespace {

SpecialVocab vocab(std::uint32_t sentinels = 100) {
  return allocate_special_vocab(1000, sentinels,
                                {Paradigm::R, Paradigm::S, Paradigm::X});
}

TokenSequence ramp(std::uint32_t start, std::uint32_t n) {
  TokenSequence t(n);
  std::iota(t.begin(), t.end(), start);
  return t;
}

std::vector<CorpusRecord> ramp_corpus(std::uint32_t records, std::uint32_t len) {
  std::vector<CorpusRecord> out;
  for (std::uint32_t i = 0; i < records; ++i) {
    out.push_back({i, ramp(3 + i, len)});
  }
  return out;
}

bool same_examples(const std::vector<Example>& a, const std::vector<Example>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].inputs != b[i].inputs) return false;
    if (a[i].targets != b[i].targets) return false;
    if (a[i].denoiser_index != b[i].denoiser_index) return false;
    if (a[i].provenance.record_id != b[i].provenance.record_id) return false;
    if (a[i].provenance.offset != b[i].provenance.offset) return false;
    if (a[i].provenance.stream_key != b[i].provenance.stream_key) return false;
  }
  return true;
}

MixtureSpec small_mix() {
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::R, 3, 0.15),
                    make_sequential_denoiser(SplitPolicy::Mode::quarter_mean)};
  spec.inputs_budget = 64;
  spec.targets_budget = 64;
  spec.seed = 7;
  return spec;
}

}  // namespace

TEST_SUITE("mixture") {

TEST_CASE("select_chunk is the identity when the record fits") {
  RngStream rng = RngStream(1).child("chunk");
  const TokenSequence seq = ramp(10, 100);
  CHECK(select_chunk(seq, 100, rng) == seq);
  CHECK(select_chunk(seq, 4000, rng) == seq);
  CHECK_THROWS_AS(select_chunk(seq, 0, rng), ValidationError);
}

TEST_CASE("select_chunk cuts an in-place window from long records") {
  RngStream rng = RngStream(2).child("chunk");
  const TokenSequence seq = ramp(0, 70000);
  const TokenSequence chunk = select_chunk(seq, 65536, rng);
  REQUIRE(chunk.size() == 65536);
  // A ramp source makes contiguity visible: chunk[i] = start + i.
  const TokenId start = chunk.front();
  CHECK(start + 65535 == chunk.back());
  CHECK(start <= 70000 - 65536);
  for (std::size_t i = 0; i < chunk.size(); i += 4096) {
    CHECK(chunk[i] == start + i);
  }
}

TEST_CASE("select_chunk draws nothing for fitting records") {
  RngStream a = RngStream(3).child("chunk");
  RngStream b = RngStream(3).child("chunk");
  const TokenSequence seq = ramp(0, 10);
  (void)select_chunk(seq, 100, a);
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("merge concatenates then splits at the raw length") {
  const std::vector<TokenSequence> seqs = {{1, 2, 3}, {4, 5}};
  const auto out = merge_and_split(seqs, 2, true);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == TokenSequence{1, 2});
  CHECK(out[1] == TokenSequence{3, 4});
  CHECK(out[2] == TokenSequence{5});
}

TEST_CASE("without merging each record splits on its own") {
  const std::vector<TokenSequence> seqs = {{1, 2, 3}, {4, 5}};
  const auto out = merge_and_split(seqs, 2, false);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == TokenSequence{1, 2});
  CHECK(out[1] == TokenSequence{3});
  CHECK(out[2] == TokenSequence{4, 5});
}

TEST_CASE("short records pass through unsplit") {
  const auto out = merge_and_split({{1, 2, 3}}, 5, true);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == TokenSequence{1, 2, 3});
  CHECK(merge_and_split({}, 5, true).empty());
  CHECK_THROWS_AS(merge_and_split({{1}}, 0, true), ValidationError);
}

TEST_CASE("merge batches cap how many records share a buffer") {
  const std::vector<TokenSequence> seqs = {{1}, {2}, {3}, {4}, {5}};
  const auto out = merge_and_split(seqs, 10, true, 2);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == TokenSequence{1, 2});
  CHECK(out[1] == TokenSequence{3, 4});
  CHECK(out[2] == TokenSequence{5});
}

TEST_CASE("shard assignment is exactly modular") {
  MixtureSpec spec = validate_mixture(preset("ul2", 512, 544));
  spec.assignment = AssignmentMode::shard;
  std::vector<int> counts(7, 0);
  for (std::uint64_t i = 0; i < 14; ++i) {
    ++counts[assign_denoiser(spec, i)];
  }
  for (int c : counts) CHECK(c == 2);
  CHECK(assign_denoiser(spec, 0) == 0);
  CHECK(assign_denoiser(spec, 8) == 1);
}

TEST_CASE("sampled assignment follows the rates and only the index") {
  MixtureSpec spec = validate_mixture(preset("ul2", 512, 544));
  spec.assignment = AssignmentMode::sample;
  std::vector<int> counts(7, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const std::size_t d = assign_denoiser(spec, i);
    // Pure in (spec, index): replaying an index replays the slot.
    CHECK(assign_denoiser(spec, i) == d);
    ++counts[d];
  }
  for (int c : counts) {
    CHECK(std::abs(c / static_cast<double>(n) - 1.0 / 7.0) < 0.02);
  }
}

TEST_CASE("segment planning rejects budgets the mixture cannot fit") {
  // The widest mixture needs more target room than a square budget offers:
  // a 50% corruption of a budget-filling segment produces 513 target
  // tokens at 512 input tokens.
  CHECK_THROWS_WITH_AS(plan_segments(preset("ul2", 512, 512), vocab(200)),
                       doctest::Contains("denoisers[3]"), BudgetError);
}

TEST_CASE("segment planning accounts for the sentinel supply") {
  // denoisers[3] (mu=3 at 50%) needs 128 sentinels per segment.
  CHECK_THROWS_WITH_AS(plan_segments(preset("ul2", 512, 544), vocab(100)),
                       doctest::Contains("sentinel"), SentinelError);
  CHECK_NOTHROW(plan_segments(preset("ul2", 512, 544), vocab(200)));
}

TEST_CASE("segment planning reproduces the budget table") {
  const auto plan = plan_segments(preset("ul2", 512, 544), vocab(200));
  REQUIRE(plan.size() == 7);
  const std::uint32_t raws[] = {568, 588, 512, 767, 909, 600, 1007};
  const std::uint32_t targets[] = {114, 100, 544, 513, 513, 92, 513};
  for (int i = 0; i < 7; ++i) {
    CAPTURE(i);
    CHECK(plan[i].raw_tokens_length == raws[i]);
    CHECK(plan[i].targets_length == targets[i]);
    CHECK(plan[i].inputs_length <= 512);
  }
}

TEST_CASE("mode token prepends the denoiser's paradigm id") {
  const SpecialVocab v = vocab();
  MixtureSpec spec = validate_mixture(small_mix());
  Example ex;
  ex.inputs = {10, v.sentinel(0), v.eos_id};
  ex.targets = {v.sentinel(0), 11, v.eos_id};
  ex.denoiser_index = 0;

  const Example tagged = prepend_mode_token(ex, spec, v);
  CHECK(tagged.inputs ==
        TokenSequence{v.paradigm_id(Paradigm::R), 10, v.sentinel(0), v.eos_id});

  ex.denoiser_index = 1;
  const Example s_tagged = prepend_mode_token(ex, spec, v);
  CHECK(s_tagged.inputs.front() == v.paradigm_id(Paradigm::S));

  ex.denoiser_index = 5;
  CHECK_THROWS_AS(prepend_mode_token(ex, spec, v), ValidationError);
}

TEST_CASE("an overridden mode token wins over the label") {
  const SpecialVocab v = vocab();
  MixtureSpec spec = validate_mixture(small_mix());
  spec.denoisers[0].mode_token = Paradigm::X;
  Example ex;
  ex.inputs = {10, v.eos_id};
  ex.targets = {v.sentinel(0), 11, v.eos_id};
  ex.denoiser_index = 0;
  CHECK(prepend_mode_token(ex, spec, v).inputs.front() ==
        v.paradigm_id(Paradigm::X));
}

TEST_CASE("assembled examples respect the budgets and the grammar") {
  const SpecialVocab v = vocab();
  MixtureSpec spec = small_mix();
  spec.prepend_paradigm = true;
  const auto examples = assemble_to_vector(spec, v, ramp_corpus(40, 150));
  REQUIRE(!examples.empty());
  for (const Example& ex : examples) {
    // The mode token is budget-exempt: one extra input token at most.
    CHECK(ex.inputs.size() <= spec.inputs_budget + 1);
    CHECK(ex.targets.size() <= spec.targets_budget);
    CHECK(ex.targets.back() == v.eos_id);
    REQUIRE(ex.denoiser_index < 2);
    CHECK(v.paradigm_of(ex.inputs.front()) ==
          spec.denoisers[ex.denoiser_index].effective_mode_token());
  }
}

TEST_CASE("assembly is deterministic for a fixed seed") {
  const SpecialVocab v = vocab();
  const MixtureSpec spec = small_mix();
  const auto corpus = ramp_corpus(30, 200);
  const auto a = assemble_to_vector(spec, v, corpus);
  const auto b = assemble_to_vector(spec, v, corpus);
  CHECK(same_examples(a, b));
  REQUIRE(!a.empty());

  MixtureSpec other = spec;
  other.seed = 8;
  CHECK_FALSE(same_examples(a, assemble_to_vector(other, v, corpus)));
}

TEST_CASE("worker count never changes the output") {
  const SpecialVocab v = vocab();
  MixtureSpec spec = small_mix();
  spec.prepend_paradigm = true;
  const auto corpus = ramp_corpus(60, 180);

  AssembleOptions serial;
  serial.merge_batch = 4;
  const auto base = assemble_to_vector(spec, v, corpus, serial);
  REQUIRE(!base.empty());

  for (const std::uint32_t workers : {2u, 4u, 7u}) {
    CAPTURE(workers);
    AssembleOptions opt = serial;
    opt.workers = workers;
    CHECK(same_examples(base, assemble_to_vector(spec, v, corpus, opt)));
  }
}

TEST_CASE("emission is ordered by the leading record of each merge group") {
  const SpecialVocab v = vocab();
  MixtureSpec spec = small_mix();
  const auto corpus = ramp_corpus(60, 180);
  AssembleOptions opt;
  opt.merge_batch = 4;
  opt.workers = 4;
  const auto examples = assemble_to_vector(spec, v, corpus, opt);
  REQUIRE(!examples.empty());
  for (std::size_t i = 1; i < examples.size(); ++i) {
    CHECK(examples[i - 1].provenance.record_id <=
          examples[i].provenance.record_id);
  }
}

TEST_CASE("a remainder shorter than two tokens is dropped and counted") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::R, 3, 0.15)};
  spec.inputs_budget = 16;  // raw segment length 17 at this rate
  spec.targets_budget = 16;
  spec.merge_examples = false;

  VectorRecordSource source({{0, ramp(3, 18)}});
  std::vector<Example> out;
  const AssembleStats stats =
      assemble(spec, v, source, {}, [&](Example&& ex) { out.push_back(ex); });
  CHECK(stats.records_in == 1);
  CHECK(stats.examples_out == 1);
  CHECK(stats.dropped_short_segments == 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0].provenance.offset == 0);
}

TEST_CASE("the emitted-example limit cuts the stream short") {
  const SpecialVocab v = vocab();
  const MixtureSpec spec = small_mix();
  AssembleOptions opt;
  opt.limit = 3;
  const auto examples = assemble_to_vector(spec, v, ramp_corpus(40, 150), opt);
  CHECK(examples.size() == 3);
}

TEST_CASE("sequential targets are capped to the targets budget") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_sequential_denoiser(SplitPolicy::Mode::full_uniform)};
  spec.inputs_budget = 64;
  spec.targets_budget = 16;
  const auto examples = assemble_to_vector(spec, v, ramp_corpus(30, 64));
  REQUIRE(!examples.empty());
  for (const Example& ex : examples) {
    CHECK(ex.targets.size() <= 16);
    CHECK(ex.inputs.size() <= 64);
  }
}

TEST_CASE("record ids must increase strictly") {
  const SpecialVocab v = vocab();
  const MixtureSpec spec = small_mix();
  std::vector<CorpusRecord> corpus = {{5, ramp(3, 40)}, {5, ramp(3, 40)}};
  CHECK_THROWS_AS(assemble_to_vector(spec, v, corpus), ValidationError);
}

TEST_CASE("worker exceptions surface with record context") {
  // Planning only pre-checks the partition strategy, so a normal-length
  // denoiser can still exhaust a tiny sentinel supply at corruption time.
  const SpecialVocab tiny = allocate_special_vocab(1000, 2, {Paradigm::R});
  MixtureSpec spec;
  spec.denoisers = {
      make_span_denoiser(Paradigm::X, 1, 0.5, SpanLengthDist::normal)};
  spec.inputs_budget = 32;
  spec.targets_budget = 64;
  AssembleOptions opt;
  opt.workers = 4;
  CHECK_THROWS_WITH_AS(
      assemble_to_vector(spec, tiny, ramp_corpus(20, 128), opt),
      doctest::Contains("record"), SentinelError);
}

TEST_CASE("empty corpus yields empty stats") {
  const SpecialVocab v = vocab();
  const AssembleStats stats = [&] {
    VectorRecordSource source({});
    AssembleStats s{};
    std::vector<Example> out;
    s = assemble(small_mix(), v, source, {}, [&](Example&& ex) {
      out.push_back(ex);
    });
    CHECK(out.empty());
    return s;
  }();
  CHECK(stats.records_in == 0);
  CHECK(stats.examples_out == 0);
}

}  // TEST_SUITE
