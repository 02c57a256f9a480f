#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tsrisk {

/// Writes content to a sibling temporary file and renames it into place, so
/// readers see either the old file, the complete new file, or nothing.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a digest as 16 hex digits.
std::string content_hash(std::string_view text);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> files;  // names relative to the run directory
};

/// Writes manifest.json into dir (atomically).
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace tsrisk
