#include "denmix/mixture.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "denmix/errors.hpp"
#include "denmix/prefix_split.hpp"

namespace denmix {

TokenSequence select_chunk(const TokenSequence& seq, std::uint32_t max_len,
                           RngStream& rng) {
  if (max_len == 0) throw ValidationError("select_chunk: max_len must be >= 1");
  if (seq.size() <= max_len) return seq;  // identity, no draw
  const std::uint64_t start = rng.uniform_below(seq.size() - max_len + 1);
  return TokenSequence(seq.begin() + start, seq.begin() + start + max_len);
}

std::vector<TokenSequence> merge_and_split(
    const std::vector<TokenSequence>& seqs, std::uint32_t raw_len, bool merge,
    std::uint32_t merge_batch) {
  if (raw_len == 0) throw ValidationError("merge_and_split: raw_len must be >= 1");
  if (merge_batch == 0) {
    throw ValidationError("merge_and_split: merge_batch must be >= 1");
  }

  std::vector<TokenSequence> out;
  const auto split_into = [&](const TokenSequence& buf) {
    for (std::size_t off = 0; off < buf.size(); off += raw_len) {
      const std::size_t end = std::min(buf.size(), off + raw_len);
      out.emplace_back(buf.begin() + off, buf.begin() + end);
    }
  };

  if (!merge) {
    for (const auto& s : seqs) split_into(s);
    return out;
  }

  TokenSequence buf;
  std::uint32_t members = 0;
  for (const auto& s : seqs) {
    buf.insert(buf.end(), s.begin(), s.end());
    if (++members == merge_batch) {
      split_into(buf);
      buf.clear();
      members = 0;
    }
  }
  if (members > 0) split_into(buf);
  return out;
}

std::size_t assign_denoiser(const MixtureSpec& spec, std::uint64_t record_index) {
  const std::size_t k = spec.denoisers.size();
  if (k == 0) throw ValidationError("assign_denoiser: empty mixture");
  if (spec.assignment == AssignmentMode::shard) {
    return static_cast<std::size_t>(record_index % k);
  }
  RngStream rng = RngStream(spec.seed).child("record", record_index).child("assign");
  return rng.categorical(spec.rates);
}

std::vector<SegmentBudget> plan_segments(const MixtureSpec& spec,
                                         const SpecialVocab& vocab) {
  std::vector<SegmentBudget> plan;
  plan.reserve(spec.denoisers.size());
  for (std::size_t i = 0; i < spec.denoisers.size(); ++i) {
    const DenoiserSpec& d = spec.denoisers[i];
    const std::string field = "denoisers[" + std::to_string(i) + "]";
    if (d.label == Paradigm::S) {
      // Sequential segments fill the whole inputs budget; the suffix cap
      // below guarantees targets fit.
      const std::uint32_t overhead = d.split.with_sentinel ? 2 : 1;
      if (spec.targets_budget < overhead + 1) {
        throw BudgetError(field + ": targets budget " +
                          std::to_string(spec.targets_budget) +
                          " cannot hold a one-token suffix");
      }
      SegmentBudget b;
      b.raw_tokens_length = spec.inputs_budget;
      b.inputs_length = spec.inputs_budget;
      b.targets_length = spec.targets_budget;
      plan.push_back(b);
      continue;
    }

    SegmentBudget b;
    try {
      b = compute_segment_lengths(spec.inputs_budget, d.rate, d.mu);
    } catch (const BudgetError& e) {
      throw BudgetError(field + ": " + e.what());
    }
    if (b.targets_length > spec.targets_budget) {
      throw BudgetError(field + ": expected targets length " +
                        std::to_string(b.targets_length) +
                        " for span corruption is greater than the configured "
                        "targets budget " + std::to_string(spec.targets_budget));
    }
    if (d.span_dist == SpanLengthDist::partition) {
      const SpanCounts counts =
          expected_span_counts(b.raw_tokens_length, d.rate, d.mu);
      const std::uint32_t spans =
          d.span_count ? *d.span_count : counts.spans;
      if (spans > vocab.num_sentinels) {
        throw SentinelError(field + ": segments of " +
                            std::to_string(b.raw_tokens_length) +
                            " tokens produce " + std::to_string(spans) +
                            " spans but the vocabulary has only " +
                            std::to_string(vocab.num_sentinels) + " sentinels");
      }
    }
    plan.push_back(b);
  }
  return plan;
}

Example prepend_mode_token(Example ex, const MixtureSpec& spec,
                           const SpecialVocab& vocab) {
  if (ex.denoiser_index >= spec.denoisers.size()) {
    throw ValidationError("prepend_mode_token: denoiser index out of range");
  }
  const Paradigm p = spec.denoisers[ex.denoiser_index].effective_mode_token();
  ex.inputs.insert(ex.inputs.begin(), vocab.paradigm_id(p));
  return ex;
}

namespace {

struct GroupTask {
  std::size_t denoiser = 0;
  std::uint64_t leader_index = 0;  // stream position of the first member
  std::uint64_t leader_id = 0;     // declared id of the first member
  TokenSequence tokens;            // concatenated member chunks
};

struct GroupResult {
  std::vector<Example> examples;
  std::uint64_t dropped = 0;
};

GroupResult process_group(const GroupTask& task, const MixtureSpec& spec,
                          const SpecialVocab& vocab,
                          const std::vector<SegmentBudget>& plan,
                          std::uint64_t seed) {
  const DenoiserSpec& d = spec.denoisers[task.denoiser];
  const std::uint32_t raw_len = plan[task.denoiser].raw_tokens_length;
  const RngStream group_rng = RngStream(seed)
                                  .child("denoiser", task.denoiser)
                                  .child("record", task.leader_index);
  GroupResult result;

  std::uint64_t seg_index = 0;
  for (std::size_t off = 0; off < task.tokens.size(); off += raw_len, ++seg_index) {
    const std::size_t len = std::min<std::size_t>(raw_len, task.tokens.size() - off);
    if (len < 2) {
      ++result.dropped;
      continue;
    }
    const TokenSequence segment(task.tokens.begin() + off,
                                task.tokens.begin() + off + len);
    RngStream seg_rng = group_rng.child("segment", seg_index);

    try {
      ExampleBody body;
      if (d.label == Paradigm::S) {
        RngStream split_rng = seg_rng.child("split");
        std::uint32_t u = sample_target_length(
            static_cast<std::uint32_t>(len), d.split, split_rng);
        // Keep the suffix inside the targets budget (sentinel + EOS or just
        // EOS of overhead); only the extreme tail of wide policies is cut.
        const std::uint32_t cap =
            spec.targets_budget - 1 - (d.split.with_sentinel ? 1 : 0);
        u = std::min(u, cap);
        body = make_prefix_example(segment, u, vocab, d.split.with_sentinel);
      } else {
        RngStream mask_rng = seg_rng.child("mask");
        NoiseMask mask;
        if (d.span_count) {
          // Fixed span count: partition both classes into exactly n runs.
          const std::uint32_t L = static_cast<std::uint32_t>(len);
          const SpanCounts counts = expected_span_counts(L, d.rate, d.mu);
          std::uint32_t spans = std::min({*d.span_count, counts.noise_tokens,
                                          L - counts.noise_tokens});
          NoiseMask m;
          auto noise_lens = random_segmentation(counts.noise_tokens, spans, mask_rng);
          auto plain_lens =
              random_segmentation(L - counts.noise_tokens, spans, mask_rng);
          for (std::uint32_t s = 0; s < spans; ++s) {
            m.insert(m.end(), plain_lens[s], false);
            m.insert(m.end(), noise_lens[s], true);
          }
          mask = std::move(m);
        } else {
          mask = sample_noise_mask(static_cast<std::uint32_t>(len), d.rate,
                                   d.mu, d.span_dist, mask_rng);
        }
        body = apply_sentinels(segment, mask, vocab);
      }

      Example ex;
      ex.inputs = std::move(body.inputs);
      ex.targets = std::move(body.targets);
      ex.denoiser_index = static_cast<std::uint32_t>(task.denoiser);
      ex.provenance = {task.leader_id, off, seg_rng.key()};
      if (spec.prepend_paradigm) {
        ex = prepend_mode_token(std::move(ex), spec, vocab);
      }
      result.examples.push_back(std::move(ex));
    } catch (const Error& e) {
      const std::string ctx = "record " + std::to_string(task.leader_id) +
                              " (denoiser " + std::to_string(task.denoiser) +
                              ", segment " + std::to_string(seg_index) +
                              "): " + e.what();
      // Keep the error category so callers can still distinguish budget,
      // sentinel, and validation failures.
      if (dynamic_cast<const SentinelError*>(&e)) throw SentinelError(ctx);
      if (dynamic_cast<const BudgetError*>(&e)) throw BudgetError(ctx);
      if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(ctx);
      throw Error(ctx);
    }
  }
  return result;
}

}  // namespace

AssembleStats assemble(const MixtureSpec& spec_in, const SpecialVocab& vocab,
                       RecordSource& source, const AssembleOptions& options,
                       const std::function<void(Example&&)>& sink) {
  const MixtureSpec spec = validate_mixture(spec_in);
  if (options.chunk_max_len == 0) {
    throw ValidationError("assemble: chunk_max_len must be >= 1");
  }
  if (options.merge_batch == 0) {
    throw ValidationError("assemble: merge_batch must be >= 1");
  }
  const std::vector<SegmentBudget> plan = plan_segments(spec, vocab);
  const std::size_t k = spec.denoisers.size();
  const RngStream root(spec.seed);

  AssembleStats stats;
  stats.assignments.assign(k, 0);

  struct Pending {
    TokenSequence buf;
    std::uint64_t leader_index = 0;
    std::uint64_t leader_id = 0;
    std::uint32_t members = 0;
  };
  std::vector<Pending> pending(k);

  // Emission is ordered by group leader index. Work items become futures;
  // results wait in `ready` until every earlier leader has been emitted.
  std::set<std::uint64_t> open;  // leaders of still-filling groups
  std::map<std::uint64_t, std::future<GroupResult>> inflight;
  std::map<std::uint64_t, GroupResult> ready;
  const bool parallel = options.workers > 1;
  const std::size_t max_inflight = parallel ? options.workers * 2 : 1;
  bool done = false;  // limit reached

  const auto emit_group = [&](GroupResult&& r) {
    stats.dropped_short_segments += r.dropped;
    for (Example& ex : r.examples) {
      if (options.limit != 0 && stats.examples_out >= options.limit) {
        done = true;
        return;
      }
      ++stats.examples_out;
      sink(std::move(ex));
    }
  };

  // Emits every group that is next in leader order and already computed;
  // blocks on a future only when it holds the next leader.
  const auto pump = [&] {
    while (!done) {
      const std::uint64_t min_open =
          open.empty() ? UINT64_MAX : *open.begin();
      const std::uint64_t min_ready =
          ready.empty() ? UINT64_MAX : ready.begin()->first;
      const std::uint64_t min_inflight =
          inflight.empty() ? UINT64_MAX : inflight.begin()->first;
      const std::uint64_t next = std::min({min_open, min_ready, min_inflight});
      if (next == UINT64_MAX || next == min_open) break;
      if (next == min_ready) {
        emit_group(std::move(ready.begin()->second));
        ready.erase(ready.begin());
      } else {
        auto it = inflight.begin();
        GroupResult r = it->second.get();
        inflight.erase(it);
        ready.emplace(next, std::move(r));
      }
    }
  };

  const auto close_group = [&](std::size_t d) {
    Pending& p = pending[d];
    GroupTask task{d, p.leader_index, p.leader_id, std::move(p.buf)};
    open.erase(p.leader_index);
    p = Pending{};
    const auto run = [task = std::move(task), &spec, &vocab, &plan,
                      seed = spec.seed]() {
      return process_group(task, spec, vocab, plan, seed);
    };
    if (parallel) {
      while (inflight.size() >= max_inflight) {
        auto it = inflight.begin();
        ready.emplace(it->first, it->second.get());
        inflight.erase(it);
      }
      inflight.emplace(task.leader_index, std::async(std::launch::async, run));
    } else {
      ready.emplace(task.leader_index, run());
    }
    pump();
  };

  CorpusRecord rec;
  std::uint64_t index = 0;
  std::optional<std::uint64_t> prev_id;
  while (!done && source.next(rec)) {
    if (prev_id && rec.id <= *prev_id) {
      throw ValidationError("assemble: corpus record ids must be strictly "
                            "increasing (record " + std::to_string(rec.id) +
                            " after " + std::to_string(*prev_id) + ")");
    }
    prev_id = rec.id;
    ++stats.records_in;

    const std::size_t d = assign_denoiser(spec, index);
    ++stats.assignments[d];

    TokenSequence chunk;
    if (!rec.tokens.empty()) {
      RngStream chunk_rng = root.child("record", index).child("chunk");
      chunk = select_chunk(rec.tokens, options.chunk_max_len, chunk_rng);
    }

    Pending& p = pending[d];
    if (p.members == 0) {
      p.leader_index = index;
      p.leader_id = rec.id;
      open.insert(index);
    }
    p.buf.insert(p.buf.end(), chunk.begin(), chunk.end());
    ++p.members;

    if (!spec.merge_examples || p.members >= options.merge_batch) {
      close_group(d);
    }
    ++index;
  }

  if (!done) {
    // Flush leftovers in leader order; pump() sequences the emission.
    std::vector<std::size_t> leftovers;
    for (std::size_t d = 0; d < k; ++d) {
      if (pending[d].members > 0) leftovers.push_back(d);
    }
    std::sort(leftovers.begin(), leftovers.end(),
              [&](std::size_t a, std::size_t b) {
                return pending[a].leader_index < pending[b].leader_index;
              });
    for (std::size_t d : leftovers) close_group(d);
    pump();
  }

  // Drain abandoned futures (limit reached) so worker exceptions surface.
  for (auto& [leader, fut] : inflight) {
    if (done) {
      fut.wait();
    } else {
      fut.get();
    }
  }
  return stats;
}

std::vector<Example> assemble_to_vector(const MixtureSpec& spec,
                                        const SpecialVocab& vocab,
                                        const std::vector<CorpusRecord>& records,
                                        const AssembleOptions& options) {
  VectorRecordSource source(records);
  std::vector<Example> out;
  assemble(spec, vocab, source, options,
           [&](Example&& ex) { out.push_back(std::move(ex)); });
  return out;
}

}  // namespace denmix
