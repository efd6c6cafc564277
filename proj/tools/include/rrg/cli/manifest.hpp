#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

namespace rrg::cli {

inline constexpr const char* kManifestName = "run_manifest.json";
inline constexpr const char* kConfigSnapshotName = "config.ini";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 of every regular file under `root`, keyed by generic relative
/// path. The run manifest itself is skipped.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& root);

/// Writes `record` plus the file hashes as the run manifest of `run_dir` and
/// returns the manifest's own SHA-256.
std::string write_run_manifest(const std::filesystem::path& run_dir, nlohmann::json record);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace rrg::cli
