#include "denmix/stats.hpp"

#include <cmath>
#include <sstream>

#include "denmix/errors.hpp"
#include "denmix/span_corruption.hpp"

namespace denmix {

double DenoiserStats::mean_rate() const {
  return example_count ? rate_sum / static_cast<double>(example_count) : 0.0;
}
double DenoiserStats::mean_span_length() const {
  return spans ? static_cast<double>(noise_tokens) / static_cast<double>(spans)
               : 0.0;
}
double DenoiserStats::mean_raw_length() const {
  return example_count
             ? static_cast<double>(raw_tokens) / static_cast<double>(example_count)
             : 0.0;
}
double DenoiserStats::mean_targets_length() const {
  return example_count ? static_cast<double>(targets_tokens) /
                             static_cast<double>(example_count)
                       : 0.0;
}

std::vector<double> StatsReport::proportions() const {
  std::vector<double> p(per_denoiser.size(), 0.0);
  if (total_examples == 0) return p;
  for (std::size_t i = 0; i < per_denoiser.size(); ++i) {
    p[i] = static_cast<double>(per_denoiser[i].example_count) /
           static_cast<double>(total_examples);
  }
  return p;
}

double StatsReport::reconstruction_fraction() const {
  if (reconstruction_checked == 0) return 1.0;
  return static_cast<double>(reconstruction_passed) /
         static_cast<double>(reconstruction_checked);
}

namespace {

struct Measured {
  std::uint64_t raw_len = 0;
  std::uint64_t noise = 0;
  std::uint64_t spans = 0;
};

// Inverts one example. Returns false when the grammar does not hold.
bool measure_example(const Example& ex, const SpecialVocab& vocab,
                     bool* used_reconstruct, Measured* out) {
  TokenSequence inputs = ex.inputs;
  if (!inputs.empty() && vocab.paradigm_of(inputs.front())) {
    inputs.erase(inputs.begin());
  }
  if (inputs.empty() || ex.targets.empty()) return false;

  if (vocab.is_sentinel(ex.targets.front())) {
    *used_reconstruct = true;
    TokenSequence original;
    try {
      original = reconstruct(inputs, ex.targets, vocab);
    } catch (const ParseError&) {
      return false;
    }
    std::uint64_t spans = 0;
    for (TokenId t : ex.targets) {
      if (vocab.is_sentinel(t)) ++spans;
    }
    out->raw_len = original.size();
    out->spans = spans;
    out->noise = ex.targets.size() - spans - 1;  // minus sentinels and EOS
    return out->raw_len > 0;
  }

  // Sentinel-less prefix grammar: inputs = prefix, targets = suffix ++ EOS.
  *used_reconstruct = false;
  if (ex.targets.back() != vocab.eos_id || ex.targets.size() < 2) return false;
  out->noise = ex.targets.size() - 1;
  out->raw_len = inputs.size() + out->noise;
  out->spans = 1;
  return true;
}

}  // namespace

StatsReport measure(std::span<const Example> examples, const SpecialVocab& vocab,
                    const MixtureSpec& spec) {
  StatsReport report;
  report.per_denoiser.resize(spec.denoisers.size());

  for (const Example& ex : examples) {
    ++report.total_examples;

    Measured m;
    bool used_reconstruct = false;
    const bool ok = measure_example(ex, vocab, &used_reconstruct, &m);
    if (used_reconstruct) {
      ++report.reconstruction_checked;
      if (ok) ++report.reconstruction_passed;
    }
    DenoiserStats& bucket = ex.denoiser_index < report.per_denoiser.size()
                                ? report.per_denoiser[ex.denoiser_index]
                                : report.unattributed;
    if (!ok) {
      ++report.malformed_examples;
      continue;
    }
    ++bucket.example_count;
    bucket.rate_sum += static_cast<double>(m.noise) / static_cast<double>(m.raw_len);
    bucket.noise_tokens += m.noise;
    bucket.spans += m.spans;
    bucket.raw_tokens += m.raw_len;
    bucket.targets_tokens += ex.targets.size();
    ++bucket.span_count_hist[static_cast<std::uint32_t>(m.spans)];
  }
  return report;
}

namespace {

DenoiserStats merge_stats(DenoiserStats a, const DenoiserStats& b) {
  a.example_count += b.example_count;
  a.rate_sum += b.rate_sum;
  a.noise_tokens += b.noise_tokens;
  a.spans += b.spans;
  a.raw_tokens += b.raw_tokens;
  a.targets_tokens += b.targets_tokens;
  for (const auto& [k, v] : b.span_count_hist) a.span_count_hist[k] += v;
  return a;
}

}  // namespace

StatsReport merge(StatsReport a, const StatsReport& b) {
  if (a.per_denoiser.size() != b.per_denoiser.size()) {
    throw ValidationError("merge: reports cover different mixtures");
  }
  for (std::size_t i = 0; i < a.per_denoiser.size(); ++i) {
    a.per_denoiser[i] = merge_stats(std::move(a.per_denoiser[i]), b.per_denoiser[i]);
  }
  a.unattributed = merge_stats(std::move(a.unattributed), b.unattributed);
  a.total_examples += b.total_examples;
  a.malformed_examples += b.malformed_examples;
  a.reconstruction_checked += b.reconstruction_checked;
  a.reconstruction_passed += b.reconstruction_passed;
  a.dropped_segments += b.dropped_segments;
  return a;
}

std::vector<Finding> verify(const StatsReport& report, const MixtureSpec& spec,
                            const Tolerances& tol) {
  std::vector<Finding> findings;
  const std::size_t k = spec.denoisers.size();
  const std::vector<double> props = report.proportions();

  static const DenoiserStats kEmptyBucket;
  for (std::size_t i = 0; i < k; ++i) {
    const DenoiserSpec& d = spec.denoisers[i];
    const DenoiserStats& s = i < report.per_denoiser.size()
                                 ? report.per_denoiser[i]
                                 : kEmptyBucket;
    const std::string subject = "denoisers[" + std::to_string(i) + "]";

    const double expected_prop = spec.assignment == AssignmentMode::shard
                                     ? 1.0 / static_cast<double>(k)
                                     : spec.rates[i];
    Finding prop;
    prop.subject = subject;
    prop.metric = "proportion";
    prop.expected = expected_prop;
    prop.actual = i < props.size() ? props[i] : 0.0;
    prop.tolerance = tol.proportion_abs;
    prop.pass = std::abs(prop.actual - prop.expected) <= tol.proportion_abs;
    findings.push_back(prop);

    if (s.example_count == 0) {
      Finding empty;
      empty.subject = subject;
      empty.metric = "mean_rate";
      empty.expected = d.expected_rate();
      empty.actual = 0.0;
      empty.tolerance = tol.rate_abs;
      empty.pass = false;
      empty.note = "no examples in this bucket; rate unavailable";
      findings.push_back(empty);
      continue;
    }

    Finding rate;
    rate.subject = subject;
    rate.metric = "mean_rate";
    rate.expected = d.expected_rate();
    rate.actual = s.mean_rate();
    rate.tolerance = tol.rate_abs;
    rate.pass = std::abs(rate.actual - rate.expected) <= tol.rate_abs;
    findings.push_back(rate);

    Finding span;
    span.subject = subject;
    span.metric = "mean_span_length";
    span.expected = d.mu_is_fraction
                        ? d.split.expected_fraction() * s.mean_raw_length()
                        : d.mu;
    span.actual = s.mean_span_length();
    span.tolerance = tol.span_rel;
    span.pass = span.expected > 0.0 &&
                std::abs(span.actual - span.expected) <=
                    tol.span_rel * span.expected;
    findings.push_back(span);
  }

  Finding recon;
  recon.subject = "stream";
  recon.metric = "reconstruction_fraction";
  recon.expected = tol.min_reconstruction;
  recon.actual = report.reconstruction_fraction();
  recon.tolerance = 0.0;
  recon.pass = recon.actual >= tol.min_reconstruction;
  if (report.reconstruction_checked == 0) {
    recon.note = "no sentinel-grammar examples in the stream";
  }
  findings.push_back(recon);

  Finding malformed;
  malformed.subject = "stream";
  malformed.metric = "malformed_examples";
  malformed.expected = 0.0;
  malformed.actual = static_cast<double>(report.malformed_examples);
  malformed.tolerance = 0.0;
  malformed.pass = report.malformed_examples == 0;
  findings.push_back(malformed);

  return findings;
}

bool all_pass(const std::vector<Finding>& findings) {
  for (const Finding& f : findings) {
    if (!f.pass) return false;
  }
  return true;
}

namespace {

void append_denoiser_json(std::ostringstream& os, const DenoiserStats& s) {
  os << "{\"examples\":" << s.example_count << ",\"mean_rate\":" << s.mean_rate()
     << ",\"mean_span_length\":" << s.mean_span_length()
     << ",\"mean_raw_length\":" << s.mean_raw_length()
     << ",\"mean_targets_length\":" << s.mean_targets_length()
     << ",\"span_count_hist\":{";
  bool first = true;
  for (const auto& [spans, count] : s.span_count_hist) {
    if (!first) os << ",";
    first = false;
    os << "\"" << spans << "\":" << count;
  }
  os << "}}";
}

}  // namespace

std::string report_to_json(const StatsReport& report, const MixtureSpec& spec) {
  std::ostringstream os;
  os.precision(12);
  os << "{\"examples\":" << report.total_examples
     << ",\"malformed\":" << report.malformed_examples
     << ",\"dropped_segments\":" << report.dropped_segments
     << ",\"reconstruction\":{\"checked\":" << report.reconstruction_checked
     << ",\"passed\":" << report.reconstruction_passed
     << ",\"fraction\":" << report.reconstruction_fraction() << "}"
     << ",\"denoisers\":[";
  for (std::size_t i = 0; i < report.per_denoiser.size(); ++i) {
    if (i) os << ",";
    const DenoiserSpec& d = spec.denoisers[i];
    os << "{\"index\":" << i << ",\"label\":\"" << to_string(d.label)
       << "\",\"mu\":\"" << d.mu_display() << "\",\"rate\":" << d.rate
       << ",\"stats\":";
    append_denoiser_json(os, report.per_denoiser[i]);
    os << "}";
  }
  os << "],\"unattributed\":";
  append_denoiser_json(os, report.unattributed);
  os << "}";
  return os.str();
}

std::string findings_to_json(const std::vector<Finding>& findings) {
  std::ostringstream os;
  os.precision(12);
  os << "[";
  for (std::size_t i = 0; i < findings.size(); ++i) {
    if (i) os << ",";
    const Finding& f = findings[i];
    os << "{\"subject\":\"" << f.subject << "\",\"metric\":\"" << f.metric
       << "\",\"expected\":" << f.expected << ",\"actual\":" << f.actual
       << ",\"tolerance\":" << f.tolerance
       << ",\"pass\":" << (f.pass ? "true" : "false");
    if (!f.note.empty()) os << ",\"note\":\"" << f.note << "\"";
    os << "}";
  }
  os << "]";
  return os.str();
}

}  // namespace denmix
