#include "rrg/corpus/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rrg/corpus/image.hpp"

namespace rrg::corpus {

using json = nlohmann::json;
using model::StudyRecord;

namespace {

json to_json(const StudyRecord& s) {
  json sections = json::object();
  for (model::Section sec : model::kAllSections) {
    if (const auto& text = s.sections.get(sec)) sections[std::string(model::to_string(sec))] = *text;
  }
  json images = json::array();
  for (const auto& img : s.images) {
    images.push_back({{"path", img.path}, {"view", std::string(model::to_string(img.view))}});
  }
  return {{"study_id", s.study_id},
          {"patient_id", s.patient_id},
          {"timestamp", s.timestamp},
          {"sections", sections},
          {"images", images},
          {"findings", s.findings},
          {"prior", s.prior ? to_json(*s.prior) : json(nullptr)}};
}

StudyRecord from_json(const json& j, const std::filesystem::path& dir) {
  StudyRecord s;
  s.study_id = j.at("study_id").get<std::string>();
  s.patient_id = j.at("patient_id").get<std::string>();
  s.timestamp = j.at("timestamp").get<std::int64_t>();
  for (const auto& [key, value] : j.at("sections").items()) {
    const auto sec = model::section_from_string(key);
    if (!sec) throw std::runtime_error("dataset: unknown section '" + key + "'");
    s.sections.get(*sec) = value.get<std::string>();
  }
  for (const auto& img : j.at("images")) {
    model::StudyImage si;
    si.path = img.at("path").get<std::string>();
    si.view = model::view_from_string(img.at("view").get<std::string>());
    si.pixels = read_pgm(dir / si.path);
    s.images.push_back(std::move(si));
  }
  s.findings = j.at("findings").get<std::vector<std::string>>();
  if (!j.at("prior").is_null()) {
    s.prior = std::make_shared<StudyRecord>(from_json(j.at("prior"), dir));
  }
  return s;
}

void write_images(const std::filesystem::path& dir, const StudyRecord& s) {
  for (const auto& img : s.images) {
    if (img.path.empty()) throw std::runtime_error("dataset: image of " + s.study_id + " has no path");
    const auto path = dir / img.path;
    std::filesystem::create_directories(path.parent_path());
    write_pgm(path, img.pixels);
  }
  if (s.prior) write_images(dir, *s.prior);
}

}  // namespace

SplitManifest summarise_split(const std::string& name, const std::vector<StudyRecord>& studies,
                              std::size_t filtered) {
  SplitManifest m;
  m.name = name;
  m.study_count = studies.size();
  m.filtered_count = filtered;
  for (const auto& s : studies) {
    for (const auto& f : s.findings) ++m.finding_counts[f];
  }
  return m;
}

void save_split(const std::filesystem::path& dir, const std::string& name,
                const std::vector<StudyRecord>& studies) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (name + ".jsonl"), std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write split " + name);
  for (const auto& s : studies) {
    write_images(dir, s);
    out << to_json(s).dump() << '\n';
  }
}

std::vector<StudyRecord> load_split(const std::filesystem::path& dir, const std::string& name) {
  std::ifstream in(dir / (name + ".jsonl"));
  if (!in) throw std::runtime_error("dataset: cannot read split " + (dir / (name + ".jsonl")).string());
  std::vector<StudyRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(json::parse(line), dir));
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset: " + name + ".jsonl line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return out;
}

void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  json splits = json::array();
  for (const auto& s : manifest.splits) {
    splits.push_back({{"name", s.name},
                      {"study_count", s.study_count},
                      {"filtered_count", s.filtered_count},
                      {"finding_counts", s.finding_counts}});
  }
  const json j{{"format_version", manifest.format_version},
               {"generator_seed", manifest.generator_seed},
               {"splits", splits}};
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write manifest");
  out << j.dump() << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("dataset: cannot read " + (dir / "manifest.json").string());
  const json j = json::parse(in);
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kDatasetFormatVersion) {
    throw std::runtime_error("dataset: unsupported format version " +
                             std::to_string(m.format_version));
  }
  m.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  for (const auto& s : j.at("splits")) {
    SplitManifest sm;
    sm.name = s.at("name").get<std::string>();
    sm.study_count = s.at("study_count").get<std::size_t>();
    sm.filtered_count = s.at("filtered_count").get<std::size_t>();
    sm.finding_counts = s.at("finding_counts").get<std::map<std::string, std::size_t>>();
    m.splits.push_back(std::move(sm));
  }
  return m;
}

}  // namespace rrg::corpus
