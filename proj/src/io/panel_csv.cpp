#include "gplm/io/panel_csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "gplm/io/csv.hpp"

namespace gplm::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_number(const std::string& cell, std::size_t row, const char* what) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw std::invalid_argument("row " + std::to_string(row) + ": " + what +
                                    " '" + cell + "' is not numeric");
    return v;
}

}  // namespace

PanelFile load_panel(const std::filesystem::path& path, model::Family family) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open panel file: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("panel file is empty: " + path.string());
    auto header = split_line(line);
    if (header.size() < 3 || header[0] != "provider_id" || header[1] != "outcome")
        throw std::invalid_argument(
            "panel header must be provider_id,outcome,<covariates...>");

    PanelFile out;
    out.covariate_names.assign(header.begin() + 2, header.end());
    const std::size_t p0 = out.covariate_names.size();
    out.panel.p0 = p0;

    std::unordered_map<std::string, std::size_t> index;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != p0 + 2)
            throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                        std::to_string(p0 + 2) + " cells, found " +
                                        std::to_string(cells.size()));
        const std::string& id = cells[0];
        if (id.empty())
            throw std::invalid_argument("row " + std::to_string(row) +
                                        ": empty provider_id");
        auto [it, inserted] = index.try_emplace(id, out.panel.providers.size());
        if (inserted) {
            out.panel.providers.push_back({});
            out.panel.providers.back().provider_id = id;
        }
        auto& blk = out.panel.providers[it->second];

        const double y = parse_number(cells[1], row, "outcome");
        if (family == model::Family::bernoulli && y != 0.0 && y != 1.0)
            throw std::invalid_argument("row " + std::to_string(row) +
                                        ": bernoulli outcome must be 0 or 1");
        if (family == model::Family::poisson && (y < 0.0 || y != std::floor(y)))
            throw std::invalid_argument("row " + std::to_string(row) +
                                        ": poisson outcome must be a nonnegative integer");
        if (!std::isfinite(y))
            throw std::invalid_argument("row " + std::to_string(row) +
                                        ": outcome is not finite");
        blk.outcomes.push_back(y);
        for (std::size_t c = 0; c < p0; ++c) {
            const double z = parse_number(cells[2 + c], row,
                                          out.covariate_names[c].c_str());
            if (!std::isfinite(z))
                throw std::invalid_argument("row " + std::to_string(row) + ": covariate " +
                                            out.covariate_names[c] + " is not finite");
            blk.covariates.push_back(z);
        }
    }
    if (out.panel.providers.empty())
        throw std::invalid_argument("panel file has no data rows: " + path.string());
    return out;
}

PanelStats panel_stats(const model::ProviderPanel& panel) {
    PanelStats s;
    s.providers = panel.provider_count();
    s.min_provider_rows = std::size_t(-1);
    for (const auto& blk : panel.providers) {
        s.rows += blk.size();
        s.min_provider_rows = std::min(s.min_provider_rows, blk.size());
        s.max_provider_rows = std::max(s.max_provider_rows, blk.size());
    }
    return s;
}

namespace {

std::string serialize_panel(const PanelFile& file) {
    std::string text = "provider_id,outcome";
    for (const auto& name : file.covariate_names) text += "," + name;
    text += '\n';
    const std::size_t p0 = file.panel.p0;
    for (const auto& blk : file.panel.providers) {
        for (std::size_t j = 0; j < blk.size(); ++j) {
            text += blk.provider_id;
            text += ',';
            text += fmt_exact(blk.outcomes[j]);
            for (std::size_t c = 0; c < p0; ++c) {
                text += ',';
                text += fmt_exact(blk.covariates[j * p0 + c]);
            }
            text += '\n';
        }
    }
    return text;
}

}  // namespace

void save_panel(const PanelFile& file, const std::filesystem::path& path) {
    atomic_write(path, serialize_panel(file));
}

std::uint64_t panel_hash(const PanelFile& file) { return fnv1a(serialize_panel(file)); }

}  // namespace gplm::io
