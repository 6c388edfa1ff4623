#include "denmix/span_corruption.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "denmix/errors.hpp"

namespace denmix {
namespace {

// Rounding convention used everywhere span geometry is computed:
// half away from zero (llround), not banker's rounding.
std::int64_t round_half_away(double x) { return std::llround(x); }

struct Lengths {
  std::uint64_t inputs = 0;
  std::uint64_t targets = 0;
};

Lengths lengths_for_raw(std::uint64_t raw, double rate, double mu,
                        std::uint32_t extra_in, std::uint32_t extra_tgt) {
  const auto noise = static_cast<std::uint64_t>(
      round_half_away(static_cast<double>(raw) * rate));
  const auto spans = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(
             round_half_away(static_cast<double>(noise) / mu)));
  return {(raw - noise) + spans * extra_in + 1, noise + spans * extra_tgt + 1};
}

}  // namespace

std::uint32_t count_noise(const NoiseMask& mask) {
  std::uint32_t n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

std::uint32_t count_runs(const NoiseMask& mask) {
  std::uint32_t runs = 0;
  bool prev = false;
  for (bool b : mask) {
    if (b && !prev) ++runs;
    prev = b;
  }
  return runs;
}

SpanCounts expected_span_counts(std::uint32_t length, double rate, double mu) {
  if (length < 2) throw ValidationError("expected_span_counts: length must be >= 2");
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ValidationError("expected_span_counts: rate must be in (0, 1]");
  }
  if (!(mu >= 1.0)) throw ValidationError("expected_span_counts: mu must be >= 1");

  const auto raw_noise = round_half_away(static_cast<double>(length) * rate);
  const auto noise = static_cast<std::uint32_t>(std::clamp<std::int64_t>(
      raw_noise, 1, static_cast<std::int64_t>(length) - 1));
  const auto spans = static_cast<std::uint32_t>(std::max<std::int64_t>(
      1, round_half_away(static_cast<double>(noise) / mu)));
  return {noise, spans};
}

SegmentBudget compute_segment_lengths(std::uint32_t inputs_budget, double rate,
                                      double mu, std::uint32_t extra_in,
                                      std::uint32_t extra_tgt) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ValidationError("compute_segment_lengths: rate must be in (0, 1)");
  }
  if (!(mu >= 1.0)) {
    throw ValidationError("compute_segment_lengths: mu must be >= 1");
  }

  const auto fits = [&](std::uint64_t raw) {
    return lengths_for_raw(raw, rate, mu, extra_in, extra_tgt).inputs <=
           inputs_budget;
  };

  if (!fits(1)) {
    throw BudgetError("inputs budget " + std::to_string(inputs_budget) +
                      " cannot host any segment at rate=" + std::to_string(rate) +
                      ", mu=" + std::to_string(mu));
  }

  // inputs(T) is non-decreasing in T, so the feasible set is a prefix:
  // double until infeasible, then binary search for the boundary.
  std::uint64_t lo = 1, hi = 2;
  while (fits(hi)) {
    lo = hi;
    hi *= 2;
    if (hi > (1ull << 40)) {
      throw ValidationError("compute_segment_lengths: unbounded raw length");
    }
  }
  while (lo + 1 < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  const Lengths at = lengths_for_raw(lo, rate, mu, extra_in, extra_tgt);
  SegmentBudget out;
  out.raw_tokens_length = static_cast<std::uint32_t>(lo);
  out.inputs_length = static_cast<std::uint32_t>(at.inputs);
  out.targets_length = static_cast<std::uint32_t>(at.targets);
  return out;
}

std::vector<std::uint32_t> random_segmentation(std::uint32_t total,
                                               std::uint32_t parts,
                                               RngStream& rng) {
  if (parts == 0 || parts > total) {
    throw ValidationError("random_segmentation: need 1 <= parts <= total");
  }
  // A uniformly random arrangement of (parts - 1) cut markers among the
  // (total - 1) gaps between items.
  std::vector<std::uint8_t> cuts(total - 1, 0);
  for (std::uint32_t i = 0; i + 1 < parts; ++i) cuts[i] = 1;
  rng.shuffle(cuts);

  std::vector<std::uint32_t> lengths;
  lengths.reserve(parts);
  std::uint32_t run = 1;
  for (std::uint8_t c : cuts) {
    if (c) {
      lengths.push_back(run);
      run = 1;
    } else {
      ++run;
    }
  }
  lengths.push_back(run);
  return lengths;
}

namespace {

// Uniformly random composition of `total` into `parts` non-negative parts
// (stars and bars): choose the bar positions among total + parts - 1 slots.
std::vector<std::uint32_t> random_composition(std::uint32_t total,
                                              std::uint32_t parts,
                                              RngStream& rng) {
  const std::uint64_t slots = static_cast<std::uint64_t>(total) + parts - 1;
  std::vector<std::uint64_t> idx(slots);
  for (std::uint64_t i = 0; i < slots; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first parts-1 entries become the bar slots.
  for (std::uint32_t i = 0; i + 1 < parts; ++i) {
    const std::uint64_t j = i + rng.uniform_below(slots - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::uint64_t> bars(idx.begin(), idx.begin() + (parts - 1));
  std::sort(bars.begin(), bars.end());

  std::vector<std::uint32_t> out(parts);
  std::uint64_t prev = 0;
  for (std::uint32_t i = 0; i + 1 < parts; ++i) {
    out[i] = static_cast<std::uint32_t>(bars[i] - prev);
    prev = bars[i] + 1;
  }
  out[parts - 1] = static_cast<std::uint32_t>(slots - prev);
  return out;
}

NoiseMask interleave(const std::vector<std::uint32_t>& plain,
                     const std::vector<std::uint32_t>& noise,
                     std::uint32_t length) {
  NoiseMask mask;
  mask.reserve(length);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    mask.insert(mask.end(), plain[i], false);
    mask.insert(mask.end(), noise[i], true);
  }
  if (plain.size() > noise.size()) {
    mask.insert(mask.end(), plain.back(), false);
  }
  return mask;
}

}  // namespace

NoiseMask sample_noise_mask(std::uint32_t length, double rate, double mu,
                            SpanLengthDist dist, RngStream& rng) {
  if (length < 2) {
    throw ValidationError("sample_noise_mask: length must be >= 2");
  }
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ValidationError("sample_noise_mask: rate must be in (0, 1]");
  }
  if (!(mu >= 1.0)) throw ValidationError("sample_noise_mask: mu must be >= 1");

  const auto num_noise = static_cast<std::uint32_t>(std::clamp<std::int64_t>(
      round_half_away(static_cast<double>(length) * rate), 1,
      static_cast<std::int64_t>(length) - 1));
  const std::uint32_t num_plain = length - num_noise;

  if (dist == SpanLengthDist::partition) {
    auto spans = static_cast<std::uint32_t>(std::max<std::int64_t>(
        1, round_half_away(static_cast<double>(num_noise) / mu)));
    // Interleaving k noise runs with k nonempty leading plain runs needs at
    // least k tokens of each class.
    spans = std::min({spans, num_noise, num_plain});
    auto noise_lens = random_segmentation(num_noise, spans, rng);
    auto plain_lens = random_segmentation(num_plain, spans, rng);
    // Leading run is always plain: [plain_0, noise_0, plain_1, noise_1, ...]
    return interleave(plain_lens, noise_lens, length);
  }

  // normal/uniform: draw lengths until the noise budget is consumed, then
  // drop the runs uniformly at random into the sequence (runs may touch).
  std::vector<std::uint32_t> lens;
  std::uint32_t remaining = num_noise;
  const auto span_cap = static_cast<std::int64_t>(
      std::max<std::int64_t>(1, round_half_away(2.0 * mu - 1.0)));
  while (remaining > 0) {
    std::int64_t draw;
    if (dist == SpanLengthDist::normal) {
      draw = round_half_away(rng.normal(mu, mu / 4.0));
    } else {
      draw = rng.uniform_int(1, span_cap);
    }
    const auto l = static_cast<std::uint32_t>(std::clamp<std::int64_t>(
        draw, 1, static_cast<std::int64_t>(remaining)));
    lens.push_back(l);
    remaining -= l;
  }
  auto gaps = random_composition(num_plain,
                                 static_cast<std::uint32_t>(lens.size()) + 1, rng);
  NoiseMask mask;
  mask.reserve(length);
  for (std::size_t i = 0; i < lens.size(); ++i) {
    mask.insert(mask.end(), gaps[i], false);
    mask.insert(mask.end(), lens[i], true);
  }
  mask.insert(mask.end(), gaps.back(), false);
  return mask;
}

ExampleBody apply_sentinels(const TokenSequence& tokens, const NoiseMask& mask,
                            const SpecialVocab& vocab) {
  if (tokens.size() != mask.size()) {
    throw ValidationError("apply_sentinels: mask length " +
                          std::to_string(mask.size()) +
                          " does not match sequence length " +
                          std::to_string(tokens.size()));
  }

  ExampleBody body;
  body.inputs.reserve(tokens.size() + 2);
  body.targets.reserve(tokens.size() + 2);

  std::uint32_t next_sentinel = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!mask[i]) {
      body.inputs.push_back(tokens[i]);
      ++i;
      continue;
    }
    if (next_sentinel >= vocab.num_sentinels) {
      throw SentinelError("mask has more than " +
                          std::to_string(vocab.num_sentinels) +
                          " noise runs; vocabulary ran out of sentinels");
    }
    const TokenId s = vocab.sentinel(next_sentinel++);
    body.inputs.push_back(s);
    body.targets.push_back(s);
    while (i < tokens.size() && mask[i]) {
      body.targets.push_back(tokens[i]);
      ++i;
    }
  }
  body.inputs.push_back(vocab.eos_id);
  body.targets.push_back(vocab.eos_id);
  return body;
}

TokenSequence reconstruct(const TokenSequence& inputs,
                          const TokenSequence& targets,
                          const SpecialVocab& vocab) {
  if (targets.empty() || targets.back() != vocab.eos_id) {
    throw ParseError("reconstruct: targets must end with EOS");
  }

  // Parse targets into sentinel-keyed runs; sentinels must ascend from 0.
  std::vector<TokenSequence> runs;
  std::size_t t = 0;
  const std::size_t t_end = targets.size() - 1;  // EOS stripped
  while (t < t_end) {
    const auto sent = vocab.sentinel_index(targets[t]);
    if (!sent) {
      throw ParseError("reconstruct: expected a sentinel at targets position " +
                       std::to_string(t));
    }
    if (*sent != runs.size()) {
      throw ParseError("reconstruct: sentinel " + std::to_string(*sent) +
                       " at targets position " + std::to_string(t) +
                       " is out of order (expected sentinel " +
                       std::to_string(runs.size()) + ")");
    }
    ++t;
    TokenSequence run;
    while (t < t_end && !vocab.is_sentinel(targets[t])) {
      if (targets[t] == vocab.eos_id || vocab.paradigm_of(targets[t])) {
        throw ParseError("reconstruct: unexpected special token at targets "
                         "position " + std::to_string(t));
      }
      run.push_back(targets[t]);
      ++t;
    }
    runs.push_back(std::move(run));
  }

  // Walk inputs, splicing runs back in. A trailing EOS is optional (the
  // prefix grammar omits it).
  std::size_t in_end = inputs.size();
  if (in_end > 0 && inputs[in_end - 1] == vocab.eos_id) --in_end;

  TokenSequence out;
  out.reserve(inputs.size() + targets.size());
  std::size_t next_run = 0;
  for (std::size_t i = 0; i < in_end; ++i) {
    const TokenId tok = inputs[i];
    const auto sent = vocab.sentinel_index(tok);
    if (sent) {
      if (*sent != next_run) {
        throw ParseError("reconstruct: sentinel " + std::to_string(*sent) +
                         " at inputs position " + std::to_string(i) +
                         " is out of order (expected sentinel " +
                         std::to_string(next_run) + ")");
      }
      if (next_run >= runs.size()) {
        throw ParseError("reconstruct: inputs sentinel " + std::to_string(*sent) +
                         " has no span in targets");
      }
      out.insert(out.end(), runs[next_run].begin(), runs[next_run].end());
      ++next_run;
      continue;
    }
    if (tok == vocab.eos_id || vocab.is_special(tok)) {
      throw ParseError("reconstruct: unexpected special token at inputs "
                       "position " + std::to_string(i));
    }
    out.push_back(tok);
  }
  if (next_run != runs.size()) {
    throw ParseError("reconstruct: targets define " + std::to_string(runs.size()) +
                     " spans but inputs reference only " +
                     std::to_string(next_run));
  }
  return out;
}

}  // namespace denmix
