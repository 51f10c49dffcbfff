#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gplm::io {

// Locale-independent numeric formatting for report files: 6 significant
// digits, shortest form; infinities as inf/-inf, NaN as NA.
std::string fmt_number(double v);
// full-precision variant for values meant to round-trip
std::string fmt_exact(double v);

std::string join_csv(const std::vector<std::string>& cells);

// write-temp-then-rename so partially written files never appear
void atomic_write(const std::filesystem::path& path, const std::string& contents);

// FNV-1a over the file/string bytes; used for fixture comparisons
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace gplm::io
