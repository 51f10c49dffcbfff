#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gplm/model/panel.hpp"

namespace gplm::io {

struct PanelFile {
    model::ProviderPanel panel;
    std::vector<std::string> covariate_names;
};

struct PanelStats {
    std::size_t providers = 0;
    std::size_t rows = 0;
    std::size_t min_provider_rows = 0;
    std::size_t max_provider_rows = 0;
};

// CSV schema: header `provider_id,outcome,<covariate...>`; rows grouped by
// provider in first-appearance order. Family-specific outcome domains are
// validated; parse errors carry the 1-based row number.
PanelFile load_panel(const std::filesystem::path& path, model::Family family);

PanelStats panel_stats(const model::ProviderPanel& panel);

void save_panel(const PanelFile& file, const std::filesystem::path& path);

// content hash over the canonical CSV serialization
std::uint64_t panel_hash(const PanelFile& file);

}  // namespace gplm::io
