#include <benchmark/benchmark.h>

#include <sstream>
#include <vector>

#include "denmix/io/records.hpp"
#include "denmix/mixture.hpp"
#include "denmix/presets.hpp"
#include "denmix/rng.hpp"
#include "denmix/span_corruption.hpp"
#include "denmix/toy/model.hpp"
#include "denmix/vocab.hpp"

namespace {

using namespace denmix;

SpecialVocab bench_vocab() {
  return allocate_special_vocab(32000, 200,
                                {Paradigm::R, Paradigm::S, Paradigm::X});
}

std::vector<CorpusRecord> bench_corpus(std::uint64_t count, std::uint32_t len) {
  std::vector<CorpusRecord> records(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    records[i].id = i;
    records[i].tokens.resize(len);
    for (std::uint32_t j = 0; j < len; ++j) {
      records[i].tokens[j] = 3 + static_cast<TokenId>((i * 31 + j * 7) % 31000);
    }
  }
  return records;
}

void BM_rng_uniform_below(benchmark::State& state) {
  RngStream rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng.uniform_below(1000));
  }
}
BENCHMARK(BM_rng_uniform_below);

void BM_rng_child(benchmark::State& state) {
  RngStream rng(7);
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rng.child("record", i++));
  }
}
BENCHMARK(BM_rng_child);

void BM_segment_lengths(benchmark::State& state) {
  const auto budget = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_segment_lengths(budget, 0.15, 3.0));
  }
}
BENCHMARK(BM_segment_lengths)->Arg(64)->Arg(512)->Arg(4096);

void BM_noise_mask(benchmark::State& state) {
  const auto length = static_cast<std::uint32_t>(state.range(0));
  const SpanLengthDist dist = static_cast<SpanLengthDist>(state.range(1));
  RngStream rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_noise_mask(length, 0.15, 3.0, dist, rng));
  }
  state.SetItemsProcessed(state.iterations() * length);
}
BENCHMARK(BM_noise_mask)
    ->Args({512, 0})
    ->Args({512, 1})
    ->Args({512, 2})
    ->Args({4096, 0});

void BM_corrupt_segment(benchmark::State& state) {
  const SpecialVocab vocab = bench_vocab();
  TokenSequence tokens(512);
  for (std::uint32_t j = 0; j < tokens.size(); ++j) {
    tokens[j] = 3 + (j * 7) % 31000;
  }
  RngStream rng(7);
  for (auto _ : state) {
    const NoiseMask mask =
        sample_noise_mask(512, 0.15, 3.0, SpanLengthDist::partition, rng);
    benchmark::DoNotOptimize(apply_sentinels(tokens, mask, vocab));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_corrupt_segment);

void BM_assemble(benchmark::State& state) {
  const auto workers = static_cast<std::uint32_t>(state.range(0));
  const SpecialVocab vocab = bench_vocab();
  const MixtureSpec spec = preset("ul2", 512, 544);
  const auto records = bench_corpus(256, 2048);
  AssembleOptions options;
  options.workers = workers;
  std::uint64_t tokens = 0;
  for (auto _ : state) {
    const auto examples = assemble_to_vector(spec, vocab, records, options);
    benchmark::DoNotOptimize(examples.data());
    tokens += 256 * 2048;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(tokens));
}
BENCHMARK(BM_assemble)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_binary_writer(benchmark::State& state) {
  io::ExampleRecord rec;
  rec.inputs.assign(512, 17);
  rec.targets.assign(114, 19);
  rec.denoiser = "R";
  for (auto _ : state) {
    std::ostringstream out;
    io::ExampleWriter writer(out, io::StreamFormat::binary);
    for (int i = 0; i < 64; ++i) {
      writer.write(rec);
    }
    benchmark::DoNotOptimize(out.str());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_binary_writer);

void BM_toy_train_step(benchmark::State& state) {
  using namespace denmix::toy;
  ToyConfig cfg;
  cfg.vocab_size = 128;
  cfg.d_model = 32;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_ff = 64;
  cfg.max_len = 64;
  cfg.arch = Arch::encoder_decoder;
  cfg.rel_buckets = 8;
  cfg.rel_max_distance = 16;
  Model model = Model::init(cfg, 7);
  std::vector<Example> batch(4);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int j = 0; j < 24; ++j) {
      batch[i].inputs.push_back(3 + (i * 24 + j) % 120);
    }
    for (int j = 0; j < 8; ++j) {
      batch[i].targets.push_back(3 + (i * 8 + j) % 120);
    }
    batch[i].targets.push_back(1);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_backward(model, batch));
  }
}
BENCHMARK(BM_toy_train_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
