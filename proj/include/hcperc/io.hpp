#pragma once

// Small text and file helpers shared by the writers.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hcperc {

/// Shortest text that parses back to the same double (%.17g, "nan", "inf").
std::string format_double(double v);
double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

/// Writes through a temporary sibling file and renames it over `path`, so
/// readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer,
                       bool binary = false);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace hcperc
