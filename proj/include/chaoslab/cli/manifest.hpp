#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chaoslab::cli {

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;

  bool operator==(const ManifestEntry&) const = default;
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

// Entries for the given files (relative to dir), sorted by path.
std::vector<ManifestEntry> build_manifest(const std::string& dir, std::vector<std::string> files);
// One line per artifact: relative_path<TAB>sha256<TAB>bytes.
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace chaoslab::cli
