#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "denmix/errors.hpp"
#include "denmix/mixture.hpp"
#include "denmix/presets.hpp"
#include "denmix/stats.hpp"
#include "denmix/vocab.hpp"

using namespace denmix;

namespace {

SpecialVocab vocab() {
  return allocate_special_vocab(1000, 100, {Paradigm::R, Paradigm::S, Paradigm::X});
}

MixtureSpec r_only() {
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::R, 3, 0.15)};
  return validate_mixture(spec);
}

Example r_example(const SpecialVocab& v) {
  // Six raw tokens, two of them corrupted in one span.
  Example ex;
  ex.inputs = {10, 11, v.sentinel(0), 14, 15, v.eos_id};
  ex.targets = {v.sentinel(0), 12, 13, v.eos_id};
  ex.denoiser_index = 0;
  return ex;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("a single example measures rate two sixths") {
  const SpecialVocab v = vocab();
  const std::vector<Example> examples = {r_example(v)};
  const StatsReport report = measure(examples, v, r_only());

  CHECK(report.total_examples == 1);
  CHECK(report.malformed_examples == 0);
  CHECK(report.reconstruction_checked == 1);
  CHECK(report.reconstruction_passed == 1);
  REQUIRE(report.per_denoiser.size() == 1);
  const DenoiserStats& s = report.per_denoiser[0];
  CHECK(s.example_count == 1);
  CHECK(s.mean_rate() == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(s.noise_tokens == 2);
  CHECK(s.spans == 1);
  CHECK(s.raw_tokens == 6);
  CHECK(s.mean_span_length() == doctest::Approx(2.0));
  CHECK(s.span_count_hist.at(1) == 1);
}

TEST_CASE("a leading mode token is stripped before measuring") {
  const SpecialVocab v = vocab();
  Example ex = r_example(v);
  ex.inputs.insert(ex.inputs.begin(), v.paradigm_id(Paradigm::R));
  const StatsReport report = measure(std::vector<Example>{ex}, v, r_only());
  CHECK(report.malformed_examples == 0);
  CHECK(report.per_denoiser[0].mean_rate() == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("sentinel-less prefix examples measure as one suffix span") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_sequential_denoiser(SplitPolicy::Mode::quarter_mean)};
  spec.denoisers[0].split.with_sentinel = false;
  spec = validate_mixture(spec);

  Example ex;
  ex.inputs = {10, 11, 12};           // prefix, no EOS
  ex.targets = {13, 14, v.eos_id};    // suffix ++ EOS
  ex.denoiser_index = 0;
  const StatsReport report = measure(std::vector<Example>{ex}, v, spec);

  CHECK(report.reconstruction_checked == 0);  // nothing to invert
  const DenoiserStats& s = report.per_denoiser[0];
  CHECK(s.example_count == 1);
  CHECK(s.raw_tokens == 5);
  CHECK(s.noise_tokens == 2);
  CHECK(s.mean_rate() == doctest::Approx(0.4));
}

TEST_CASE("garbage targets count as malformed and fail reconstruction") {
  const SpecialVocab v = vocab();
  Example bad = r_example(v);
  bad.targets = {v.sentinel(1), 12, v.eos_id};  // opens with the wrong sentinel
  const std::vector<Example> examples = {r_example(v), bad};
  const StatsReport report = measure(examples, v, r_only());

  CHECK(report.total_examples == 2);
  CHECK(report.malformed_examples == 1);
  CHECK(report.reconstruction_checked == 2);
  CHECK(report.reconstruction_passed == 1);
  CHECK(report.per_denoiser[0].example_count == 1);
  CHECK(report.reconstruction_fraction() == doctest::Approx(0.5));
}

TEST_CASE("unattributed examples land in their own bucket") {
  const SpecialVocab v = vocab();
  Example ex = r_example(v);
  ex.denoiser_index = kUnknownDenoiser;
  const StatsReport report = measure(std::vector<Example>{ex}, v, r_only());
  CHECK(report.per_denoiser[0].example_count == 0);
  CHECK(report.unattributed.example_count == 1);
}

TEST_CASE("measure distributes over concatenation") {
  const SpecialVocab big =
      allocate_special_vocab(1000, 200, {Paradigm::R, Paradigm::S, Paradigm::X});
  const MixtureSpec spec = validate_mixture(preset("ul2", 512, 544));
  const auto examples = assemble_to_vector(spec, big, [] {
    std::vector<CorpusRecord> c;
    for (std::uint32_t i = 0; i < 40; ++i) {
      TokenSequence t(700);
      for (std::size_t j = 0; j < t.size(); ++j) {
        t[j] = static_cast<TokenId>(3 + (i * 31 + j) % 900);
      }
      c.push_back({i, t});
    }
    return c;
  }());
  REQUIRE(examples.size() > 4);

  const std::size_t cut = examples.size() / 2;
  const std::vector<Example> left(examples.begin(), examples.begin() + cut);
  const std::vector<Example> right(examples.begin() + cut, examples.end());

  const StatsReport whole = measure(examples, big, spec);
  const StatsReport merged = merge(measure(left, big, spec), measure(right, big, spec));

  CHECK(whole.total_examples == merged.total_examples);
  CHECK(whole.malformed_examples == merged.malformed_examples);
  CHECK(whole.reconstruction_passed == merged.reconstruction_passed);
  REQUIRE(whole.per_denoiser.size() == merged.per_denoiser.size());
  for (std::size_t i = 0; i < whole.per_denoiser.size(); ++i) {
    CHECK(whole.per_denoiser[i].example_count ==
          merged.per_denoiser[i].example_count);
    CHECK(whole.per_denoiser[i].noise_tokens == merged.per_denoiser[i].noise_tokens);
    CHECK(whole.per_denoiser[i].spans == merged.per_denoiser[i].spans);
    CHECK(whole.per_denoiser[i].rate_sum ==
          doctest::Approx(merged.per_denoiser[i].rate_sum).epsilon(1e-12));
  }
  CHECK_THROWS_AS(merge(StatsReport{}, whole), ValidationError);
}

TEST_CASE("verification passes a healthy single-denoiser stream") {
  const SpecialVocab v = vocab();
  // 20 identical, perfectly-formed examples: rate 1/3, one 2-token span.
  std::vector<Example> examples(20, r_example(v));
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::X, 2, 0.34)};
  spec = validate_mixture(spec);

  const StatsReport report = measure(examples, v, spec);
  const auto findings = verify(report, spec);
  REQUIRE(findings.size() == 5);  // proportion, rate, span, reconstruction, malformed
  CHECK(all_pass(findings));
}

TEST_CASE("a drifted proportion fails its finding") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::X, 2, 0.34),
                    make_span_denoiser(Paradigm::X, 2, 0.34)};
  spec.rates = {0.5, 0.5};
  spec = validate_mixture(spec);

  // 55 / 45 split where 50 / 50 was configured: off by 0.05 > 0.02.
  std::vector<Example> examples;
  for (int i = 0; i < 55; ++i) examples.push_back(r_example(v));
  for (int i = 0; i < 45; ++i) {
    Example ex = r_example(v);
    ex.denoiser_index = 1;
    examples.push_back(ex);
  }
  const auto findings = verify(measure(examples, v, spec), spec);
  CHECK_FALSE(all_pass(findings));
  bool saw_proportion_failure = false;
  for (const Finding& f : findings) {
    if (f.metric == "proportion" && !f.pass) saw_proportion_failure = true;
    if (f.metric == "mean_rate") CHECK(f.pass);
  }
  CHECK(saw_proportion_failure);
}

TEST_CASE("shard assignment expects equal shares regardless of rates") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::X, 2, 0.34),
                    make_span_denoiser(Paradigm::X, 2, 0.34)};
  spec.rates = {0.9, 0.1};
  spec.assignment = AssignmentMode::shard;
  spec = validate_mixture(spec);

  std::vector<Example> examples;
  for (int i = 0; i < 50; ++i) examples.push_back(r_example(v));
  for (int i = 0; i < 50; ++i) {
    Example ex = r_example(v);
    ex.denoiser_index = 1;
    examples.push_back(ex);
  }
  const auto findings = verify(measure(examples, v, spec), spec);
  for (const Finding& f : findings) {
    if (f.metric == "proportion") {
      CHECK(f.expected == doctest::Approx(0.5));
      CHECK(f.pass);
    }
  }
}

TEST_CASE("an empty bucket fails with a note instead of passing vacuously") {
  const SpecialVocab v = vocab();
  MixtureSpec spec;
  spec.denoisers = {make_span_denoiser(Paradigm::X, 2, 0.34),
                    make_span_denoiser(Paradigm::R, 3, 0.15)};
  spec = validate_mixture(spec);
  const std::vector<Example> examples = {r_example(v)};
  const auto findings = verify(measure(examples, v, spec), spec);
  bool saw_empty = false;
  for (const Finding& f : findings) {
    if (f.subject == "denoisers[1]" && f.metric == "mean_rate") {
      CHECK_FALSE(f.pass);
      CHECK(!f.note.empty());
      saw_empty = true;
    }
  }
  CHECK(saw_empty);
}

TEST_CASE("imperfect reconstruction fails the stream finding") {
  const SpecialVocab v = vocab();
  std::vector<Example> examples(999, r_example(v));
  Example bad = r_example(v);
  bad.targets.pop_back();  // strip EOS
  bad.targets.push_back(v.sentinel(5));
  bad.targets.push_back(v.eos_id);
  examples.push_back(bad);

  const auto findings = verify(measure(examples, v, r_only()), r_only());
  bool recon_failed = false, malformed_failed = false;
  for (const Finding& f : findings) {
    if (f.metric == "reconstruction_fraction" && !f.pass) recon_failed = true;
    if (f.metric == "malformed_examples" && !f.pass) malformed_failed = true;
  }
  CHECK(recon_failed);
  CHECK(malformed_failed);
}

TEST_CASE("report and findings render as valid JSON") {
  const SpecialVocab v = vocab();
  const std::vector<Example> examples = {r_example(v)};
  const MixtureSpec spec = r_only();
  const StatsReport report = measure(examples, v, spec);

  const auto doc = nlohmann::json::parse(report_to_json(report, spec));
  CHECK(doc.at("examples") == 1);
  CHECK(doc.at("malformed") == 0);
  CHECK(doc.at("reconstruction").at("fraction") == 1.0);
  REQUIRE(doc.at("denoisers").size() == 1);
  CHECK(doc.at("denoisers")[0].at("label") == "R");
  CHECK(doc.at("denoisers")[0].at("stats").at("examples") == 1);

  const auto findings = nlohmann::json::parse(
      findings_to_json(verify(report, spec)));
  REQUIRE(findings.is_array());
  CHECK(findings.size() == 5);
  CHECK(findings[0].contains("subject"));
  CHECK(findings[0].contains("pass"));
}

}  // TEST_SUITE
