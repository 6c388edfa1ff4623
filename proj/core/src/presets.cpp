#include "denmix/presets.hpp"

#include <algorithm>
#include <cmath>

#include "denmix/errors.hpp"

namespace denmix {
namespace {

// Paradigm of a span denoiser follows from its parameters: extreme when the
// mean span is long (>= 12 tokens) or the rate is high (>= 30%).
Paradigm classify_span_denoiser(double mu, double rate) {
  return (mu >= 12.0 || rate >= 0.3) ? Paradigm::X : Paradigm::R;
}

DenoiserSpec span_denoiser(double mu, double rate) {
  return make_span_denoiser(classify_span_denoiser(mu, rate), mu, rate);
}

DenoiserSpec clm_denoiser() {
  // Full-sequence continuation: fixed fraction 1 clamps to u = L-1, i.e. a
  // one-token prefix for every segment length.
  return make_sequential_denoiser(SplitPolicy::Mode::fixed_fraction, 1.0);
}

DenoiserSpec plm_denoiser() {
  return make_sequential_denoiser(SplitPolicy::Mode::full_uniform);
}

DenoiserSpec quarter_denoiser() {
  return make_sequential_denoiser(SplitPolicy::Mode::quarter_mean);
}

// One row of the mixture-composition ablation grid: the cartesian product
// of span means and rates (spans outer, rates inner), plus one sequential
// denoiser holding sd_share of the mixture weight when sd_share > 0.
struct VarRow {
  const char* name;
  std::vector<double> spans;
  std::vector<double> rates;
  double sd_share;  // in [0, 1]
};

const std::vector<VarRow>& var_rows() {
  static const std::vector<VarRow> rows = {
      {"var-a", {}, {}, 1.00},
      {"var-b", {3}, {0.5}, 0.00},
      {"var-c", {3, 8, 12}, {0.15, 0.5}, 0.14},
      {"var-d", {3, 8, 12, 32}, {0.15, 0.5}, 0.11},
      {"var-e", {3, 8, 32, 64}, {0.15, 0.5}, 0.11},
      {"var-f", {3, 8, 64}, {0.15, 0.5}, 0.17},
      {"var-g", {3, 8, 32, 64}, {0.15}, 0.25},
      {"var-h", {8, 64}, {0.15}, 0.25},
      {"var-i", {3, 8, 12, 32}, {0.15, 0.5}, 0.50},
      {"var-j", {3, 8, 64}, {0.15, 0.5}, 0.50},
      {"var-k", {3, 8, 12}, {0.15, 0.5}, 0.00},
      {"var-l", {3, 8, 64}, {0.15, 0.5}, 0.00},
  };
  return rows;
}

MixtureSpec var_mixture(const VarRow& row) {
  MixtureSpec spec;
  spec.prepend_paradigm = true;
  const std::size_t span_count = row.spans.size() * row.rates.size();
  for (double mu : row.spans) {
    for (double rate : row.rates) {
      spec.denoisers.push_back(span_denoiser(mu, rate));
    }
  }
  if (row.sd_share > 0.0) {
    spec.denoisers.push_back(quarter_denoiser());
  }
  if (span_count > 0) {
    const double span_share =
        (1.0 - row.sd_share) / static_cast<double>(span_count);
    spec.rates.assign(span_count, span_share);
    if (row.sd_share > 0.0) spec.rates.push_back(row.sd_share);
  } else {
    spec.rates.assign(1, 1.0);
  }
  return spec;
}

std::string var_summary(const VarRow& row) {
  auto join = [](const std::vector<double>& xs, bool pct) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(static_cast<long long>(pct ? xs[i] * 100 : xs[i]));
      if (pct) s += "%";
    }
    return s;
  };
  if (row.spans.empty()) return "ablation grid: sequential only";
  return "ablation grid: spans {" + join(row.spans, false) + "}, rates {" +
         join(row.rates, true) + "}, " +
         std::to_string(static_cast<long long>(row.sd_share * 100)) +
         "% sequential";
}

MixtureSpec base_mixture(std::string_view name) {
  MixtureSpec spec;
  if (name == "ul2") {
    // Reference mixture: two R, one S, four X components, uniform weights.
    spec.denoisers = {
        span_denoiser(3, 0.15),  span_denoiser(8, 0.15), quarter_denoiser(),
        span_denoiser(3, 0.5),   span_denoiser(8, 0.5),  span_denoiser(64, 0.15),
        span_denoiser(64, 0.5),
    };
    spec.prepend_paradigm = true;
    return spec;
  }
  if (name == "t5-sc") {
    spec.denoisers = {span_denoiser(3, 0.15)};
    return spec;
  }
  if (name == "clm") {
    spec.denoisers = {clm_denoiser()};
    return spec;
  }
  if (name == "plm") {
    spec.denoisers = {plm_denoiser()};
    return spec;
  }
  if (name == "sclm") {
    spec.denoisers = {span_denoiser(3, 0.15), clm_denoiser()};
    return spec;
  }
  if (name == "unilm") {
    // Equal thirds: causal, prefix, and i.i.d. single-token corruption.
    spec.denoisers = {clm_denoiser(), plm_denoiser(), span_denoiser(1, 0.15)};
    return spec;
  }
  for (const VarRow& row : var_rows()) {
    if (name == row.name) return var_mixture(row);
  }

  std::string names;
  for (const auto& info : preset_catalog()) {
    if (!names.empty()) names += ", ";
    names += info.name;
  }
  throw CatalogError("unknown preset \"" + std::string(name) +
                     "\"; valid names: " + names);
}

}  // namespace

const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> catalog = [] {
    std::vector<PresetInfo> c = {
        {"ul2", "reference 7-denoiser mixture (2 R + 1 S + 4 X, uniform weights, "
                "mode tokens on)"},
        {"t5-sc", "single span-corruption denoiser R(mu=3, r=0.15)"},
        {"clm", "causal language modeling: full-sequence continuation"},
        {"plm", "prefix language modeling: uniform split point"},
        {"sclm", "equal mix of span corruption and causal continuation"},
        {"unilm", "equal thirds: causal, prefix, i.i.d. single-token corruption"},
    };
    for (const VarRow& row : var_rows()) {
      c.push_back({row.name, var_summary(row)});
    }
    return c;
  }();
  return catalog;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& info : preset_catalog()) names.push_back(info.name);
  return names;
}

bool is_preset_name(std::string_view name) {
  const auto& catalog = preset_catalog();
  return std::any_of(catalog.begin(), catalog.end(),
                     [&](const PresetInfo& p) { return p.name == name; });
}

MixtureSpec preset(std::string_view name, std::uint32_t inputs_budget,
                   std::uint32_t targets_budget) {
  MixtureSpec spec = base_mixture(name);
  spec.inputs_budget = inputs_budget;
  spec.targets_budget = targets_budget;
  return validate_mixture(std::move(spec));
}

}  // namespace denmix
