#include "denmix/io/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "denmix/errors.hpp"
#include "denmix/presets.hpp"

namespace denmix::io {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

void check_keys(const json& obj, const std::string& origin, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; })) {
      bad(origin, where + ": unknown key \"" + it.key() + "\"");
    }
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_double(const json& v, const std::string& origin, const std::string& path) {
  if (!v.is_number()) bad(origin, path + " must be a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& origin, const std::string& path) {
  if (!v.is_boolean()) bad(origin, path + " must be true or false");
  return v.get<bool>();
}

std::uint64_t get_u64(const json& v, const std::string& origin,
                      const std::string& path) {
  if (!v.is_number_unsigned()) bad(origin, path + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& v, const std::string& origin,
                      const std::string& path) {
  std::uint64_t x = get_u64(v, origin, path);
  if (x > std::numeric_limits<std::uint32_t>::max()) bad(origin, path + " out of range");
  return static_cast<std::uint32_t>(x);
}

std::string get_string(const json& v, const std::string& origin,
                       const std::string& path) {
  if (!v.is_string()) bad(origin, path + " must be a string");
  return v.get<std::string>();
}

Paradigm resolve_paradigm(const std::string& s,
                          const std::map<std::string, Paradigm, std::less<>>& aliases,
                          const std::string& origin, const std::string& path) {
  if (auto p = parse_paradigm(s)) return *p;
  if (auto it = aliases.find(s); it != aliases.end()) return it->second;
  bad(origin, path + ": unknown paradigm label \"" + s + "\"");
}

SplitPolicy::Mode resolve_split_mode(const std::string& s, const std::string& origin,
                                     const std::string& path) {
  if (s == "quarter_mean") return SplitPolicy::Mode::quarter_mean;
  if (s == "full_uniform") return SplitPolicy::Mode::full_uniform;
  if (s == "fixed_fraction") return SplitPolicy::Mode::fixed_fraction;
  bad(origin, path + ": unknown split policy \"" + s + "\"");
}

DenoiserSpec parse_denoiser(const json& obj, std::size_t index,
                            const std::map<std::string, Paradigm, std::less<>>& aliases,
                            const std::string& origin) {
  std::string where = "denoisers[" + std::to_string(index) + "]";
  if (!obj.is_object()) bad(origin, where + " must be an object");
  const json* pv = find(obj, "paradigm");
  if (pv == nullptr) bad(origin, where + ": missing \"paradigm\"");
  Paradigm label = resolve_paradigm(get_string(*pv, origin, where + ".paradigm"),
                                    aliases, origin, where + ".paradigm");

  DenoiserSpec d;
  if (label == Paradigm::S) {
    check_keys(obj, origin, where,
               {"paradigm", "policy", "fraction", "min_target", "with_sentinel",
                "mode_token"});
    SplitPolicy::Mode mode = SplitPolicy::Mode::quarter_mean;
    if (const json* v = find(obj, "policy")) {
      mode = resolve_split_mode(get_string(*v, origin, where + ".policy"), origin,
                                where + ".policy");
    }
    double fraction = 0.25;
    if (const json* v = find(obj, "fraction")) {
      fraction = get_double(*v, origin, where + ".fraction");
    }
    d = make_sequential_denoiser(mode, fraction);
    if (const json* v = find(obj, "min_target")) {
      d.split.min_target = get_u32(*v, origin, where + ".min_target");
    }
    if (const json* v = find(obj, "with_sentinel")) {
      d.split.with_sentinel = get_bool(*v, origin, where + ".with_sentinel");
    }
  } else {
    check_keys(obj, origin, where,
               {"paradigm", "mu", "rate", "span_count", "span_dist", "mode_token"});
    double mu = 3.0;
    double rate = 0.15;
    SpanLengthDist dist = SpanLengthDist::partition;
    if (const json* v = find(obj, "mu")) mu = get_double(*v, origin, where + ".mu");
    if (const json* v = find(obj, "rate")) rate = get_double(*v, origin, where + ".rate");
    if (const json* v = find(obj, "span_dist")) {
      std::string s = get_string(*v, origin, where + ".span_dist");
      auto parsed = parse_span_dist(s);
      if (!parsed) bad(origin, where + ".span_dist: unknown distribution \"" + s + "\"");
      dist = *parsed;
    }
    d = make_span_denoiser(label, mu, rate, dist);
    if (const json* v = find(obj, "span_count")) {
      d.span_count = get_u32(*v, origin, where + ".span_count");
    }
  }
  if (const json* v = find(obj, "mode_token")) {
    d.mode_token = resolve_paradigm(get_string(*v, origin, where + ".mode_token"),
                                    aliases, origin, where + ".mode_token");
  }
  return d;
}

VocabConfig parse_vocab_section(const json& obj,
                                const std::map<std::string, Paradigm, std::less<>>& aliases,
                                const std::string& origin) {
  if (!obj.is_object()) bad(origin, "vocab must be an object");
  check_keys(obj, origin, "vocab",
             {"base_size", "num_sentinels", "paradigms", "eos_id", "reserved_ids"});
  VocabConfig vc;
  if (const json* v = find(obj, "base_size")) {
    vc.base_size = get_u32(*v, origin, "vocab.base_size");
  }
  if (const json* v = find(obj, "num_sentinels")) {
    vc.num_sentinels = get_u32(*v, origin, "vocab.num_sentinels");
  }
  if (const json* v = find(obj, "paradigms")) {
    if (!v->is_array()) bad(origin, "vocab.paradigms must be an array");
    vc.paradigm_labels.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      std::string path = "vocab.paradigms[" + std::to_string(i) + "]";
      vc.paradigm_labels.push_back(
          resolve_paradigm(get_string((*v)[i], origin, path), aliases, origin, path));
    }
  }
  if (const json* v = find(obj, "eos_id")) {
    vc.eos_id = get_u32(*v, origin, "vocab.eos_id");
  }
  if (const json* v = find(obj, "reserved_ids")) {
    if (!v->is_array()) bad(origin, "vocab.reserved_ids must be an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      vc.reserved_ids.push_back(
          get_u32((*v)[i], origin, "vocab.reserved_ids[" + std::to_string(i) + "]"));
    }
  }
  return vc;
}

toy::ToyConfig parse_toy_section(const json& obj, const std::string& origin) {
  if (!obj.is_object()) bad(origin, "toy must be an object");
  check_keys(obj, origin, "toy",
             {"d_model", "layers", "heads", "d_ff", "max_len", "arch", "rel_buckets",
              "rel_max_distance", "start_id"});
  toy::ToyConfig tc;
  if (const json* v = find(obj, "d_model")) tc.d_model = get_u32(*v, origin, "toy.d_model");
  if (const json* v = find(obj, "layers")) tc.layers = get_u32(*v, origin, "toy.layers");
  if (const json* v = find(obj, "heads")) tc.heads = get_u32(*v, origin, "toy.heads");
  if (const json* v = find(obj, "d_ff")) tc.d_ff = get_u32(*v, origin, "toy.d_ff");
  if (const json* v = find(obj, "max_len")) tc.max_len = get_u32(*v, origin, "toy.max_len");
  if (const json* v = find(obj, "arch")) {
    std::string s = get_string(*v, origin, "toy.arch");
    auto parsed = toy::parse_arch(s);
    if (!parsed) bad(origin, "toy.arch: unknown architecture \"" + s + "\"");
    tc.arch = *parsed;
  }
  if (const json* v = find(obj, "rel_buckets")) {
    tc.rel_buckets = get_u32(*v, origin, "toy.rel_buckets");
  }
  if (const json* v = find(obj, "rel_max_distance")) {
    tc.rel_max_distance = get_u32(*v, origin, "toy.rel_max_distance");
  }
  if (const json* v = find(obj, "start_id")) {
    tc.start_id = get_u32(*v, origin, "toy.start_id");
  }
  return tc;
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    byte = std::min(byte, text.size());
    std::size_t line =
        1 + static_cast<std::size_t>(
                std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
    throw ParseError(origin + " line " + std::to_string(line) + ": JSON syntax error");
  }
  if (!root.is_object()) bad(origin, "top level must be an object");
  check_keys(root, origin, "config",
             {"preset", "denoisers", "rates", "inputs_budget", "targets_budget",
              "seed", "merge_examples", "assignment", "prepend_paradigm", "s_policy",
              "vocab", "toy", "aliases"});

  PipelineConfig out;
  out.aliases = default_paradigm_aliases();
  if (const json* v = find(root, "aliases")) {
    if (!v->is_object()) bad(origin, "aliases must be an object");
    for (auto it = v->begin(); it != v->end(); ++it) {
      std::string path = "aliases[\"" + it.key() + "\"]";
      out.aliases[it.key()] =
          resolve_paradigm(get_string(*it, origin, path), out.aliases, origin, path);
    }
  }

  MixtureSpec spec;
  bool have_spec = false;
  if (const json* v = find(root, "preset")) {
    out.preset_name = get_string(*v, origin, "preset");
    spec = preset(out.preset_name);
    have_spec = true;
  }
  if (const json* v = find(root, "denoisers")) {
    if (!v->is_array() || v->empty()) {
      bad(origin, "denoisers must be a nonempty array");
    }
    spec.denoisers.clear();
    spec.rates.clear();  // uniform unless "rates" follows
    for (std::size_t i = 0; i < v->size(); ++i) {
      spec.denoisers.push_back(parse_denoiser((*v)[i], i, out.aliases, origin));
    }
    have_spec = true;
  }
  if (!have_spec) bad(origin, "needs \"preset\" or \"denoisers\"");

  if (const json* v = find(root, "rates")) {
    if (!v->is_array()) bad(origin, "rates must be an array");
    spec.rates.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      spec.rates.push_back(get_double((*v)[i], origin, "rates[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = find(root, "inputs_budget")) {
    spec.inputs_budget = get_u32(*v, origin, "inputs_budget");
  }
  if (const json* v = find(root, "targets_budget")) {
    spec.targets_budget = get_u32(*v, origin, "targets_budget");
  }
  if (const json* v = find(root, "seed")) spec.seed = get_u64(*v, origin, "seed");
  if (const json* v = find(root, "merge_examples")) {
    spec.merge_examples = get_bool(*v, origin, "merge_examples");
  }
  if (const json* v = find(root, "assignment")) {
    std::string s = get_string(*v, origin, "assignment");
    auto parsed = parse_assignment_mode(s);
    if (!parsed) bad(origin, "assignment: unknown mode \"" + s + "\"");
    spec.assignment = *parsed;
  }
  if (const json* v = find(root, "prepend_paradigm")) {
    spec.prepend_paradigm = get_bool(*v, origin, "prepend_paradigm");
  }
  if (const json* v = find(root, "s_policy")) {
    SplitPolicy::Mode mode = resolve_split_mode(get_string(*v, origin, "s_policy"),
                                                origin, "s_policy");
    for (DenoiserSpec& d : spec.denoisers) {
      if (d.label != Paradigm::S) continue;
      DenoiserSpec swapped = make_sequential_denoiser(mode, d.split.fraction);
      swapped.split.min_target = d.split.min_target;
      swapped.split.with_sentinel = d.split.with_sentinel;
      swapped.mode_token = d.mode_token;
      d = swapped;
    }
  }
  out.mixture = validate_mixture(std::move(spec));

  if (const json* v = find(root, "vocab")) {
    out.vocab_config = parse_vocab_section(*v, out.aliases, origin);
  }
  out.vocab = allocate_special_vocab(out.vocab_config.base_size,
                                     out.vocab_config.num_sentinels,
                                     out.vocab_config.paradigm_labels,
                                     out.vocab_config.eos_id,
                                     out.vocab_config.reserved_ids);
  for (const DenoiserSpec& d : out.mixture.denoisers) {
    if (out.mixture.prepend_paradigm && !out.vocab.has_paradigm(d.effective_mode_token())) {
      bad(origin, "vocab.paradigms is missing the \"" +
                      std::string(to_string(d.effective_mode_token())) +
                      "\" mode token used by the mixture");
    }
  }

  if (const json* v = find(root, "toy")) {
    out.toy = parse_toy_section(*v, origin);
  }
  out.toy.vocab_size = out.vocab.total_size();
  // The paradigm token rides on top of the inputs budget, and the prefix
  // architecture concatenates inputs and targets into one window.
  std::uint32_t longest = out.mixture.inputs_budget +
                          (out.mixture.prepend_paradigm ? 1u : 0u) +
                          out.mixture.targets_budget;
  out.toy.max_len = std::max(out.toy.max_len, longest);
  return out;
}

PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace denmix::io
