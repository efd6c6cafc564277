#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrg/model/study.hpp"

namespace rrg::corpus {

inline constexpr int kDatasetFormatVersion = 1;

struct SplitManifest {
  std::string name;
  std::size_t study_count = 0;
  std::size_t filtered_count = 0;
  std::map<std::string, std::size_t> finding_counts;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::uint64_t generator_seed = 0;
  std::vector<SplitManifest> splits;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

SplitManifest summarise_split(const std::string& name,
                              const std::vector<model::StudyRecord>& studies,
                              std::size_t filtered = 0);

/// One JSON object per line in `<dir>/<name>.jsonl`; images (priors included)
/// are written as P5 files at their recorded relative paths.
void save_split(const std::filesystem::path& dir, const std::string& name,
                const std::vector<model::StudyRecord>& studies);
std::vector<model::StudyRecord> load_split(const std::filesystem::path& dir,
                                           const std::string& name);

void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& dir);

}  // namespace rrg::corpus
