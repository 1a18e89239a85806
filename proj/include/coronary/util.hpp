#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace coronary {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Derives an independent stream seed from a master seed (SplitMix64 step).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace coronary
