#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rrg::model {

/// Row-major grayscale pixel grid.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

enum class View { frontal, lateral };

std::string_view to_string(View v);
View view_from_string(std::string_view s);

struct StudyImage {
  GrayImage pixels;
  View view = View::frontal;
  std::string path;  // relative to the dataset directory; empty when in-memory only

  friend bool operator==(const StudyImage&, const StudyImage&) = default;
};

enum class Section { indication, history, comparison, technique, findings, impression };

inline constexpr std::array<Section, 6> kAllSections{Section::indication, Section::history,
                                                     Section::comparison, Section::technique,
                                                     Section::findings,   Section::impression};

std::string_view to_string(Section s);
std::optional<Section> section_from_string(std::string_view s);

struct ReportSections {
  std::array<std::optional<std::string>, 6> text;

  const std::optional<std::string>& get(Section s) const { return text[static_cast<int>(s)]; }
  std::optional<std::string>& get(Section s) { return text[static_cast<int>(s)]; }
  bool has(Section s) const { return get(s).has_value(); }

  friend bool operator==(const ReportSections&, const ReportSections&) = default;
};

/// One imaging examination with its report and an optional earlier study.
struct StudyRecord {
  std::string study_id;
  std::string patient_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  std::vector<StudyImage> images;
  ReportSections sections;
  std::vector<std::string> findings;  // planted labels
  std::shared_ptr<const StudyRecord> prior;

  bool has_training_target() const {
    return sections.has(Section::findings) && sections.has(Section::impression);
  }
};

/// Deep equality, following prior links.
bool same_study(const StudyRecord& a, const StudyRecord& b);

}  // namespace rrg::model
