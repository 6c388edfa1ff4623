#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "denmix/denoisers.hpp"
#include "denmix/example.hpp"

namespace denmix {

// Examples whose denoiser_index is unknown (e.g. read from the binary
// stream format) land in the report's unattributed bucket.
inline constexpr std::uint32_t kUnknownDenoiser = 0xFFFFFFFFu;

struct DenoiserStats {
  std::uint64_t example_count = 0;
  double rate_sum = 0.0;            // per-example realized corruption rates
  std::uint64_t noise_tokens = 0;
  std::uint64_t spans = 0;
  std::uint64_t raw_tokens = 0;
  std::uint64_t targets_tokens = 0;
  std::map<std::uint32_t, std::uint64_t> span_count_hist;

  double mean_rate() const;
  double mean_span_length() const;
  double mean_raw_length() const;
  double mean_targets_length() const;
};

struct StatsReport {
  std::vector<DenoiserStats> per_denoiser;
  DenoiserStats unattributed;
  std::uint64_t total_examples = 0;
  std::uint64_t malformed_examples = 0;
  std::uint64_t reconstruction_checked = 0;
  std::uint64_t reconstruction_passed = 0;
  std::uint64_t dropped_segments = 0;  // carried over from AssembleStats

  std::vector<double> proportions() const;  // per-denoiser share of total
  double reconstruction_fraction() const;   // 1.0 when nothing was checkable
};

// Measures realized corruption statistics by inverting each example's
// grammar (mode token stripped first). Examples that fail to parse count
// as malformed and as reconstruction failures. Merge-friendly: statistics
// are sums, so measure(A ++ B) == merge(measure(A), measure(B)).
StatsReport measure(std::span<const Example> examples, const SpecialVocab& vocab,
                    const MixtureSpec& spec);

StatsReport merge(StatsReport a, const StatsReport& b);

struct Tolerances {
  double rate_abs = 0.01;         // mean realized rate vs expected, absolute
  double span_rel = 0.10;         // mean span length vs mu, relative
  double proportion_abs = 0.02;   // per-denoiser share vs expectation
  double min_reconstruction = 1.0;
};

struct Finding {
  std::string subject;  // e.g. "denoisers[2]" or "stream"
  std::string metric;   // "mean_rate", "mean_span_length", "proportion", ...
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

// One finding per (denoiser x metric) plus stream-level findings. Expected
// proportions follow the assignment mode: configured rates under sampling,
// 1/k under modular sharding.
std::vector<Finding> verify(const StatsReport& report, const MixtureSpec& spec,
                            const Tolerances& tol = {});

bool all_pass(const std::vector<Finding>& findings);

// Single JSON document with the full report; schema documented in README.
std::string report_to_json(const StatsReport& report, const MixtureSpec& spec);
std::string findings_to_json(const std::vector<Finding>& findings);

}  // namespace denmix
