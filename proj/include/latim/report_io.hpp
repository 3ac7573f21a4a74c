#pragma once

#include "latim/metrics.hpp"
#include "latim/tensor.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace latim {

// Attribution CSV dialect: '#'-prefixed "key=value" metadata lines, then a
// header row "target\source,<pos>:<id>,...", then one row per target
// "<pos>:<id>,<values>". Values use the shortest decimal form that reads back
// to the same double; cells above the diagonal are written as "0".
struct csv_matrix {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<int> tokens;
    matrix<double> values;

    // Empty string when the key is absent.
    std::string meta(const std::string& key) const;
};

std::string format_number(double v);

std::string to_csv(const csv_matrix& m, bool causal = true);
csv_matrix parse_csv(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Rasterizes |C| with each row scaled by its own max (display only) onto a
// fixed viridis-like palette, `cell` pixels per entry.
void write_heatmap_png(const std::filesystem::path& path, const matrix<double>& c, int cell = 0);

} // namespace latim
