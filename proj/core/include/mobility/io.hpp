#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace mobility {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames; readers never observe a
// partially written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a, for manifest change detection.
std::uint64_t content_hash(std::string_view data);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t hash);

}  // namespace mobility
