#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "denmix/denoisers.hpp"

namespace denmix {

struct PresetInfo {
  std::string name;
  std::string summary;
};

// Catalog order is the listing order of the `presets` subcommand.
const std::vector<PresetInfo>& preset_catalog();
std::vector<std::string> preset_names();
bool is_preset_name(std::string_view name);

// Builds the named mixture at the given budgets. Throws CatalogError for
// unknown names (the message lists the valid ones). The result has passed
// validate_mixture.
//
// Names: "ul2" (the reference 7-denoiser mixture), "t5-sc" (single
// span-corruption denoiser), "clm", "plm", "sclm", "unilm" (objective
// baselines), and "var-a" .. "var-l" (the 12-row mixture-composition
// ablation grid).
MixtureSpec preset(std::string_view name, std::uint32_t inputs_budget = 512,
                   std::uint32_t targets_budget = 512);

}  // namespace denmix
