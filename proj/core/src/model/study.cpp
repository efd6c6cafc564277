#include "rrg/model/study.hpp"

#include <stdexcept>
#include <string>

namespace rrg::model {

std::string_view to_string(View v) { return v == View::frontal ? "frontal" : "lateral"; }

View view_from_string(std::string_view s) {
  if (s == "frontal") return View::frontal;
  if (s == "lateral") return View::lateral;
  throw std::invalid_argument("unknown view '" + std::string(s) + "'");
}

std::string_view to_string(Section s) {
  switch (s) {
    case Section::indication: return "indication";
    case Section::history: return "history";
    case Section::comparison: return "comparison";
    case Section::technique: return "technique";
    case Section::findings: return "findings";
    case Section::impression: return "impression";
  }
  return "?";
}

std::optional<Section> section_from_string(std::string_view s) {
  for (Section sec : kAllSections) {
    if (to_string(sec) == s) return sec;
  }
  return std::nullopt;
}

bool same_study(const StudyRecord& a, const StudyRecord& b) {
  if (a.study_id != b.study_id || a.patient_id != b.patient_id || a.timestamp != b.timestamp ||
      a.images != b.images || a.sections != b.sections || a.findings != b.findings) {
    return false;
  }
  if (static_cast<bool>(a.prior) != static_cast<bool>(b.prior)) return false;
  return !a.prior || same_study(*a.prior, *b.prior);
}

}  // namespace rrg::model
