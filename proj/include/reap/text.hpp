#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace reap {

// Collapses every run of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view text);

std::string to_lower(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

// FNV-1a 64-bit over the raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

std::string to_hex(std::uint64_t value);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace reap
