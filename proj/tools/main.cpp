#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "denmix/errors.hpp"
#include "denmix/io/config.hpp"
#include "denmix/io/mix_run.hpp"
#include "denmix/io/records.hpp"
#include "denmix/mixture.hpp"
#include "denmix/prefix_split.hpp"
#include "denmix/presets.hpp"
#include "denmix/span_corruption.hpp"
#include "denmix/stats.hpp"
#include "denmix/toy/train.hpp"

namespace {

using namespace denmix;

std::string join_ids(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out += ' ';
    out += std::to_string(tokens[i]);
  }
  return out;
}

io::StreamFormat parse_format(const std::string& s) {
  if (s == "jsonl") return io::StreamFormat::jsonl;
  if (s == "bin") return io::StreamFormat::binary;
  throw ConfigError("unknown format \"" + s + "\" (expected jsonl or bin)");
}

int run_mix(const std::string& config_path, const std::string& corpus_path,
            const std::string& out_path, const std::string& format,
            std::uint64_t limit, std::uint32_t workers) {
  io::PipelineConfig config = io::parse_config(config_path);
  io::MixRunOptions opts;
  opts.format = parse_format(format);
  opts.limit = limit;
  opts.workers = workers;
  AssembleStats stats = io::mix_corpus_to_file(config, corpus_path, out_path, opts);
  std::cout << "records_in: " << stats.records_in << "\n"
            << "examples_out: " << stats.examples_out << "\n"
            << "dropped_short_segments: " << stats.dropped_short_segments << "\n";
  for (std::size_t i = 0; i < stats.assignments.size(); ++i) {
    const DenoiserSpec& d = config.mixture.denoisers[i];
    std::cout << "denoisers[" << i << "] " << to_string(d.label) << " (mu "
              << d.mu_display() << ", rate " << d.expected_rate()
              << "): " << stats.assignments[i] << " records\n";
  }
  return 0;
}

int run_corrupt(const std::string& denoiser, double mu, double rate,
                std::uint32_t len, std::uint64_t seed, const std::string& dist,
                const std::string& policy, double fraction,
                std::uint32_t base_size, std::uint32_t sentinels) {
  auto label = parse_paradigm(denoiser);
  if (!label) {
    auto& aliases = default_paradigm_aliases();
    if (auto it = aliases.find(denoiser); it != aliases.end()) label = it->second;
  }
  if (!label) throw ConfigError("unknown denoiser label \"" + denoiser + "\"");

  TokenSequence tokens;
  if (len > 0) {
    // Synthetic ramp over the byte range, for quick eyeballing.
    for (std::uint32_t i = 0; i < len; ++i) {
      tokens.push_back(io::kByteOffset + (i % (base_size - io::kByteOffset)));
    }
  } else {
    std::uint64_t v = 0;
    while (std::cin >> v) tokens.push_back(static_cast<TokenId>(v));
    if (tokens.empty()) {
      throw ConfigError("no tokens: pass --len or pipe ids on stdin");
    }
  }

  SpecialVocab vocab = allocate_special_vocab(
      base_size, sentinels, {Paradigm::R, Paradigm::S, Paradigm::X});
  RngStream rng = RngStream(seed).child("corrupt");

  ExampleBody body;
  if (*label == Paradigm::S) {
    SplitPolicy sp;
    if (policy == "quarter_mean") {
      sp.mode = SplitPolicy::Mode::quarter_mean;
    } else if (policy == "full_uniform") {
      sp.mode = SplitPolicy::Mode::full_uniform;
    } else if (policy == "fixed_fraction") {
      sp.mode = SplitPolicy::Mode::fixed_fraction;
    } else {
      throw ConfigError("unknown split policy \"" + policy + "\"");
    }
    sp.fraction = fraction;
    std::uint32_t u = sample_target_length(
        static_cast<std::uint32_t>(tokens.size()), sp, rng);
    body = make_prefix_example(tokens, u, vocab);
  } else {
    auto parsed = parse_span_dist(dist);
    if (!parsed) throw ConfigError("unknown span distribution \"" + dist + "\"");
    NoiseMask mask = sample_noise_mask(static_cast<std::uint32_t>(tokens.size()),
                                       rate, mu, *parsed, rng);
    body = apply_sentinels(tokens, mask, vocab);
  }

  io::ExampleRecord rec;
  rec.inputs = body.inputs;
  rec.targets = body.targets;
  rec.denoiser = to_string(*label);
  std::cout << io::encode_jsonl_line(rec) << "\n";
  return 0;
}

int run_stats(const std::string& in_path, const std::string& config_path,
              bool strict) {
  io::PipelineConfig config = io::parse_config(config_path);
  std::vector<io::ExampleRecord> recs = io::read_examples_file(in_path);
  std::vector<Example> examples;
  examples.reserve(recs.size());
  for (const io::ExampleRecord& r : recs) examples.push_back(io::to_example(r));

  StatsReport report = measure(examples, config.vocab, config.mixture);
  std::vector<Finding> findings = verify(report, config.mixture);
  std::cout << "{\"report\":" << report_to_json(report, config.mixture)
            << ",\"findings\":" << findings_to_json(findings) << "}\n";
  if (!all_pass(findings)) {
    std::cerr << "verification: " << [&] {
      std::size_t failed = 0;
      for (const Finding& f : findings) failed += f.pass ? 0 : 1;
      return std::to_string(failed);
    }() << " of " << findings.size() << " findings failed\n";
    if (strict) return 2;
  }
  return 0;
}

int run_inspect(const std::string& in_path, std::uint64_t n, bool detok,
                const std::string& config_path) {
  SpecialVocab vocab;
  if (!config_path.empty()) {
    vocab = io::parse_config(config_path).vocab;
  } else {
    // Byte-fallback demo layout, matching text-corpus runs.
    vocab = allocate_special_vocab(io::kByteVocabSize, 100,
                                   {Paradigm::R, Paradigm::S, Paradigm::X});
  }
  std::vector<io::ExampleRecord> recs = io::read_examples_file(in_path);
  std::uint64_t count = std::min<std::uint64_t>(n, recs.size());
  for (std::uint64_t i = 0; i < count; ++i) {
    const io::ExampleRecord& r = recs[i];
    std::cout << "example " << i << ": denoiser=" << (r.denoiser.empty() ? "?" : r.denoiser)
              << "[" << (r.denoiser_index == 0xFFFFFFFFu
                             ? std::string("?")
                             : std::to_string(r.denoiser_index))
              << "] record=" << r.record_id << " offset=" << r.offset
              << " inputs=" << r.inputs.size() << " targets=" << r.targets.size()
              << "\n";
    if (detok) {
      std::cout << "  inputs:  " << io::byte_detokenize(r.inputs, &vocab) << "\n";
      std::cout << "  targets: " << io::byte_detokenize(r.targets, &vocab) << "\n";
    } else {
      std::cout << "  inputs:  " << join_ids(r.inputs) << "\n";
      std::cout << "  targets: " << join_ids(r.targets) << "\n";
    }
  }
  std::cout << count << " of " << recs.size() << " examples shown\n";
  return 0;
}

int run_train_toy(const std::string& config_path, const std::string& in_path,
                  std::uint32_t steps, const std::string& arch,
                  const std::string& trace_path, double lr, double momentum,
                  std::uint32_t batch, std::uint64_t seed, std::uint64_t limit) {
  io::PipelineConfig config = io::parse_config(config_path);
  if (!arch.empty()) {
    auto parsed = toy::parse_arch(arch);
    if (!parsed) throw ConfigError("unknown arch \"" + arch + "\"");
    config.toy.arch = *parsed;
  }
  std::vector<io::ExampleRecord> recs = io::read_examples_file(in_path);
  if (limit > 0 && recs.size() > limit) recs.resize(limit);
  std::vector<Example> examples;
  examples.reserve(recs.size());
  for (const io::ExampleRecord& r : recs) examples.push_back(io::to_example(r));

  toy::Model model = toy::Model::init(config.toy, seed);
  toy::TrainOptions opts;
  opts.steps = steps;
  opts.batch_size = batch;
  opts.lr = lr;
  opts.momentum = momentum;
  opts.seed = seed;
  toy::TrainResult result = toy::train_toy(model, std::move(examples), opts);

  std::cout << "arch: " << toy::to_string(config.toy.arch) << "\n"
            << "params: " << model.num_params() << "\n"
            << "steps: " << result.losses.size() << "\n"
            << "initial_loss: " << result.initial_loss << "\n"
            << "final_loss: " << result.final_loss << "\n";
  if (!trace_path.empty()) {
    std::ofstream out(trace_path, std::ios::binary);
    if (!out) throw Error("cannot open " + trace_path + " for writing");
    out << toy::trace_to_csv(result);
  }
  return 0;
}

int run_presets() {
  for (const PresetInfo& info : preset_catalog()) {
    MixtureSpec spec = preset(info.name);
    std::cout << info.name << ": " << info.summary << "\n";
    for (std::size_t i = 0; i < spec.denoisers.size(); ++i) {
      const DenoiserSpec& d = spec.denoisers[i];
      std::cout << "  [" << i << "] " << to_string(d.label) << " mu="
                << d.mu_display() << " rate=" << d.expected_rate() << " weight="
                << spec.rates[i];
      if (d.label == Paradigm::S) {
        std::cout << " policy=" << to_string(d.split.mode);
      } else {
        std::cout << " dist=" << to_string(d.span_dist);
      }
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic denoising-mixture pipeline for span-corruption pretraining"};
  app.require_subcommand(1);

  // mix
  std::string mix_config, mix_corpus, mix_out, mix_format = "jsonl";
  std::uint64_t mix_limit = 0;
  std::uint32_t mix_workers = 1;
  CLI::App* mix = app.add_subcommand("mix", "Corrupt a corpus into an example stream");
  mix->add_option("--config", mix_config, "Pipeline config (JSON)")->required();
  mix->add_option("--corpus", mix_corpus, "Corpus file (JSONL records or raw text)")
      ->required();
  mix->add_option("--out", mix_out, "Output example stream")->required();
  mix->add_option("--format", mix_format, "Output encoding: jsonl or bin");
  mix->add_option("--limit", mix_limit, "Stop after N examples (0 = all)");
  mix->add_option("--workers", mix_workers, "Worker threads (output bytes unchanged)");

  // corrupt
  std::string cr_denoiser = "R", cr_dist = "partition", cr_policy = "quarter_mean";
  double cr_mu = 3.0, cr_rate = 0.15, cr_fraction = 0.25;
  std::uint32_t cr_len = 0, cr_base = 259, cr_sentinels = 100;
  std::uint64_t cr_seed = 7;
  CLI::App* corrupt =
      app.add_subcommand("corrupt", "Run one denoiser over one token sequence");
  corrupt->add_option("--denoiser", cr_denoiser, "R, S, or X (aliases accepted)");
  corrupt->add_option("--mu", cr_mu, "Mean span length (R/X)");
  corrupt->add_option("--rate", cr_rate, "Corruption rate (R/X)");
  corrupt->add_option("--len", cr_len, "Synthesize a ramp of N tokens instead of stdin");
  corrupt->add_option("--seed", cr_seed, "Random seed");
  corrupt->add_option("--dist", cr_dist, "Span lengths: partition, normal, uniform");
  corrupt->add_option("--policy", cr_policy,
                      "S split: quarter_mean, full_uniform, fixed_fraction");
  corrupt->add_option("--fraction", cr_fraction, "fixed_fraction target share");
  corrupt->add_option("--base-size", cr_base, "Base vocabulary size");
  corrupt->add_option("--sentinels", cr_sentinels, "Sentinel count");

  // stats
  std::string st_in, st_config;
  bool st_strict = false;
  CLI::App* stats =
      app.add_subcommand("stats", "Measure an example stream and verify it");
  stats->add_option("--in", st_in, "Example stream (jsonl or bin)")->required();
  stats->add_option("--config", st_config, "Pipeline config the stream claims to follow")
      ->required();
  stats->add_flag("--strict", st_strict, "Exit nonzero when any finding fails");

  // inspect
  std::string in_in, in_config;
  std::uint64_t in_n = 5;
  bool in_detok = false;
  CLI::App* inspect = app.add_subcommand("inspect", "Pretty-print examples");
  inspect->add_option("--in", in_in, "Example stream (jsonl or bin)")->required();
  inspect->add_option("--n", in_n, "Examples to show");
  inspect->add_flag("--detok", in_detok,
                    "Render byte-fallback text with special-token markers");
  inspect->add_option("--config", in_config, "Config for the special-token layout");

  // train-toy
  std::string tt_config, tt_in, tt_arch, tt_trace;
  std::uint32_t tt_steps = 500, tt_batch = 8;
  double tt_lr = 0.1, tt_momentum = 0.9;
  std::uint64_t tt_seed = 7, tt_limit = 0;
  CLI::App* train = app.add_subcommand("train-toy", "Fit the toy model to a stream");
  train->add_option("--config", tt_config, "Pipeline config (JSON)")->required();
  train->add_option("--in", tt_in, "Example stream (jsonl or bin)")->required();
  train->add_option("--steps", tt_steps, "Optimizer steps");
  train->add_option("--arch", tt_arch, "encdec or prefixdec (overrides config)");
  train->add_option("--trace", tt_trace, "Write a step,loss CSV here");
  train->add_option("--lr", tt_lr, "Learning rate");
  train->add_option("--momentum", tt_momentum, "Momentum coefficient");
  train->add_option("--batch", tt_batch, "Batch size");
  train->add_option("--seed", tt_seed, "Init and shuffle seed");
  train->add_option("--limit", tt_limit, "Use only the first N examples (0 = all)");

  // presets
  app.add_subcommand("presets", "List the built-in mixture catalog");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mix->parsed()) {
      return run_mix(mix_config, mix_corpus, mix_out, mix_format, mix_limit,
                     mix_workers);
    }
    if (corrupt->parsed()) {
      return run_corrupt(cr_denoiser, cr_mu, cr_rate, cr_len, cr_seed, cr_dist,
                         cr_policy, cr_fraction, cr_base, cr_sentinels);
    }
    if (stats->parsed()) return run_stats(st_in, st_config, st_strict);
    if (inspect->parsed()) return run_inspect(in_in, in_n, in_detok, in_config);
    if (train->parsed()) {
      return run_train_toy(tt_config, tt_in, tt_steps, tt_arch, tt_trace, tt_lr,
                           tt_momentum, tt_batch, tt_seed, tt_limit);
    }
    return run_presets();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
