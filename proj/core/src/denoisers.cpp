#include "denmix/denoisers.hpp"

#include <cmath>
#include <string>

#include "denmix/errors.hpp"

namespace denmix {

const char* to_string(SpanLengthDist d) {
  switch (d) {
    case SpanLengthDist::partition: return "partition";
    case SpanLengthDist::normal: return "normal";
    case SpanLengthDist::uniform: return "uniform";
  }
  return "?";
}

std::optional<SpanLengthDist> parse_span_dist(std::string_view s) {
  if (s == "partition") return SpanLengthDist::partition;
  if (s == "normal") return SpanLengthDist::normal;
  if (s == "uniform") return SpanLengthDist::uniform;
  return std::nullopt;
}

const char* to_string(SplitPolicy::Mode m) {
  switch (m) {
    case SplitPolicy::Mode::quarter_mean: return "quarter_mean";
    case SplitPolicy::Mode::full_uniform: return "full_uniform";
    case SplitPolicy::Mode::fixed_fraction: return "fixed_fraction";
  }
  return "?";
}

double SplitPolicy::expected_fraction() const {
  switch (mode) {
    case Mode::quarter_mean: return 0.25;
    case Mode::full_uniform: return 0.5;
    case Mode::fixed_fraction: return fraction;
  }
  return 0.0;
}

double DenoiserSpec::expected_rate() const {
  if (label == Paradigm::S) return split.expected_fraction();
  return rate;
}

std::string DenoiserSpec::mu_display() const {
  if (mu_is_fraction) {
    if (mu_fraction == 0.25) return "L/4";
    if (mu_fraction == 0.5) return "L/2";
    if (mu_fraction == 1.0) return "L";
    return "L*" + std::to_string(mu_fraction);
  }
  if (mu == std::floor(mu)) return std::to_string(static_cast<long long>(mu));
  return std::to_string(mu);
}

DenoiserSpec make_span_denoiser(Paradigm label, double mu, double rate,
                                SpanLengthDist dist) {
  DenoiserSpec d;
  d.label = label;
  d.mu = mu;
  d.rate = rate;
  d.span_dist = dist;
  return d;
}

DenoiserSpec make_sequential_denoiser(SplitPolicy::Mode mode, double fraction) {
  DenoiserSpec d;
  d.label = Paradigm::S;
  d.split.mode = mode;
  d.split.fraction = fraction;
  d.mu_is_fraction = true;
  d.mu_fraction = d.split.expected_fraction();
  d.rate = d.split.expected_fraction();
  d.span_count = 1;
  // The sampler never consults span_dist for S; uniform documents the
  // "length drawn uniformly" behavior of the split itself.
  d.span_dist = SpanLengthDist::uniform;
  return d;
}

const char* to_string(AssignmentMode m) {
  return m == AssignmentMode::shard ? "shard" : "sample";
}

std::optional<AssignmentMode> parse_assignment_mode(std::string_view s) {
  if (s == "shard") return AssignmentMode::shard;
  if (s == "sample") return AssignmentMode::sample;
  return std::nullopt;
}

namespace {

void validate_denoiser(const DenoiserSpec& d, std::size_t i) {
  const std::string field = "denoisers[" + std::to_string(i) + "]";
  if (!(d.rate > 0.0 && d.rate <= 1.0)) {
    throw ValidationError(field + ".rate must be in (0, 1], got " +
                          std::to_string(d.rate));
  }
  if (d.mu_is_fraction) {
    if (d.label != Paradigm::S) {
      throw ValidationError(field + ".mu: fractional span length is only "
                            "defined for S denoisers");
    }
    if (!(d.mu_fraction > 0.0 && d.mu_fraction <= 1.0)) {
      throw ValidationError(field + ".mu fraction must be in (0, 1]");
    }
  } else if (!(d.mu >= 1.0)) {
    throw ValidationError(field + ".mu must be >= 1, got " + std::to_string(d.mu));
  }
  if (d.span_count && *d.span_count == 0) {
    throw ValidationError(field + ".span_count must be >= 1");
  }

  switch (d.label) {
    case Paradigm::S:
      if (!d.span_count || *d.span_count != 1) {
        throw ValidationError(field + ".span_count: S denoisers corrupt "
                              "exactly one span (span_count must be 1)");
      }
      if (!(d.split.fraction > 0.0 && d.split.fraction <= 1.0) &&
          d.split.mode == SplitPolicy::Mode::fixed_fraction) {
        throw ValidationError(field + ".split.fraction must be in (0, 1]");
      }
      if (d.split.min_target < 1) {
        throw ValidationError(field + ".split.min_target must be >= 1");
      }
      break;
    case Paradigm::R:
      if (!(d.mu < 12.0 && d.rate < 0.3)) {
        throw ValidationError(field + ": R label requires mu < 12 and rate < "
                              "0.3 (mu=" + d.mu_display() + ", rate=" +
                              std::to_string(d.rate) + " would be X)");
      }
      break;
    case Paradigm::X:
      if (!(d.mu >= 12.0 || d.rate >= 0.3)) {
        throw ValidationError(field + ": X label requires mu >= 12 or rate >= "
                              "0.3 (mu=" + d.mu_display() + ", rate=" +
                              std::to_string(d.rate) + " would be R)");
      }
      break;
  }
}

}  // namespace

MixtureSpec validate_mixture(MixtureSpec spec) {
  if (spec.denoisers.empty()) {
    throw ValidationError("denoisers: a mixture needs at least one denoiser");
  }
  if (spec.inputs_budget < 2) {
    throw ValidationError("inputs_budget must be >= 2");
  }
  if (spec.targets_budget < 2) {
    throw ValidationError("targets_budget must be >= 2");
  }

  for (std::size_t i = 0; i < spec.denoisers.size(); ++i) {
    validate_denoiser(spec.denoisers[i], i);
  }

  if (spec.rates.empty()) {
    spec.rates.assign(spec.denoisers.size(), 1.0 / spec.denoisers.size());
  }
  if (spec.rates.size() != spec.denoisers.size()) {
    throw ValidationError("rates: expected " +
                          std::to_string(spec.denoisers.size()) +
                          " entries, got " + std::to_string(spec.rates.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < spec.rates.size(); ++i) {
    if (!(spec.rates[i] > 0.0)) {
      throw ValidationError("rates[" + std::to_string(i) + "] must be positive");
    }
    total += spec.rates[i];
  }
  // Skip renormalization of an already-normalized vector so the operation
  // is exactly idempotent under floating point.
  if (std::abs(total - 1.0) > 1e-9) {
    for (double& r : spec.rates) r /= total;
  }
  return spec;
}

}  // namespace denmix
