#include "rrg/corpus/catalogue.hpp"

#include <map>
#include <stdexcept>

#include "rrg/model/tokenizer.hpp"

namespace rrg::corpus {

std::string_view finding_name(Finding f) {
  switch (f) {
    case Finding::atelectasis: return "atelectasis";
    case Finding::cardiomegaly: return "cardiomegaly";
    case Finding::no_finding: return "no-finding";
    case Finding::pneumonia: return "pneumonia";
    case Finding::pulmonary_congestion: return "pulmonary-congestion";
    case Finding::pulmonary_edema: return "pulmonary-edema";
    case Finding::pleural_effusion: return "pleural-effusion";
    case Finding::pneumothorax: return "pneumothorax";
  }
  return "?";
}

std::optional<Finding> finding_from_name(std::string_view name) {
  for (Finding f : kCatalogue) {
    if (finding_name(f) == name) return f;
  }
  return std::nullopt;
}

std::vector<std::string> catalogue_names() {
  std::vector<std::string> out;
  for (Finding f : kCatalogue) out.emplace_back(finding_name(f));
  return out;
}

std::string_view to_string(Severity s) { return s == Severity::mild ? "mild" : "moderate"; }

std::string_view to_string(Interval i) {
  switch (i) {
    case Interval::none: return "";
    case Interval::new_finding: return "new";
    case Interval::unchanged: return "unchanged";
    case Interval::worsened: return "worsened";
    case Interval::improved: return "improved";
  }
  return "?";
}

std::vector<std::string> ReportPlan::labels() const {
  if (present.empty()) return {std::string(finding_name(Finding::no_finding))};
  std::vector<std::string> out;
  for (const auto& p : present) out.emplace_back(finding_name(p.finding));
  return out;
}

Motif motif(Finding f) {
  switch (f) {
    case Finding::atelectasis: return {3, 0, Pattern::horizontal_stripes};
    case Finding::cardiomegaly: return {2, 1, Pattern::disc};
    case Finding::pneumonia: return {0, 3, Pattern::checker};
    case Finding::pulmonary_congestion: return {1, 1, Pattern::vertical_stripes};
    case Finding::pulmonary_edema: return {1, 2, Pattern::diagonal};
    case Finding::pleural_effusion: return {3, 3, Pattern::solid};
    case Finding::pneumothorax: return {0, 0, Pattern::ring};
    case Finding::no_finding: break;
  }
  throw std::invalid_argument("no-finding has no image motif");
}

namespace {

// Short name used by the impression and by resolution sentences.
std::string_view short_name(Finding f) {
  switch (f) {
    case Finding::atelectasis: return "atelectasis";
    case Finding::cardiomegaly: return "cardiomegaly";
    case Finding::pneumonia: return "consolidation";
    case Finding::pulmonary_congestion: return "vascular congestion";
    case Finding::pulmonary_edema: return "pulmonary edema";
    case Finding::pleural_effusion: return "pleural effusion";
    case Finding::pneumothorax: return "pneumothorax";
    case Finding::no_finding: break;
  }
  return "";
}

std::string finding_sentence(const PlantedFinding& p) {
  const std::string sev(to_string(p.severity));
  std::string s;
  switch (p.finding) {
    case Finding::atelectasis: s = sev + " atelectasis at the left base"; break;
    case Finding::cardiomegaly:
      s = std::string("the heart is ") + (p.severity == Severity::mild ? "mildly" : "moderately") +
          " enlarged";
      break;
    case Finding::pneumonia: s = sev + " consolidation in the right upper lobe"; break;
    case Finding::pulmonary_congestion: s = sev + " pulmonary vascular congestion"; break;
    case Finding::pulmonary_edema: s = sev + " interstitial pulmonary edema"; break;
    case Finding::pleural_effusion: s = sev + " right pleural effusion"; break;
    case Finding::pneumothorax: s = sev + " left apical pneumothorax"; break;
    case Finding::no_finding: throw std::invalid_argument("no-finding is not a planted finding");
  }
  if (p.interval != Interval::none) s += std::string(" , ") + std::string(to_string(p.interval));
  return s + " .";
}

std::string resolved_sentence(Finding f) {
  return "previously seen " + std::string(short_name(f)) + " has resolved .";
}

constexpr std::string_view kClear = "the lungs are clear .";

std::string normalised(std::string_view sentence) {
  const auto words = model::split_words(sentence);
  return model::join_words(words);
}

struct Parsed {
  bool clear = false;
  std::optional<PlantedFinding> present;
  std::optional<Finding> resolved;
};

const std::map<std::string, Parsed>& sentence_table() {
  static const std::map<std::string, Parsed> table = [] {
    std::map<std::string, Parsed> t;
    t[normalised(kClear)] = {true, std::nullopt, std::nullopt};
    for (Finding f : kCatalogue) {
      if (f == Finding::no_finding) continue;
      t[normalised(resolved_sentence(f))] = {false, std::nullopt, f};
      for (Severity s : {Severity::mild, Severity::moderate}) {
        for (Interval i : {Interval::none, Interval::new_finding, Interval::unchanged,
                           Interval::worsened, Interval::improved}) {
          const PlantedFinding p{f, s, i};
          t[normalised(finding_sentence(p))] = {false, p, std::nullopt};
        }
      }
    }
    return t;
  }();
  return table;
}

}  // namespace

std::string render_findings(const ReportPlan& plan) {
  std::vector<std::string> sentences;
  if (plan.present.empty()) sentences.emplace_back(kClear);
  for (const auto& p : plan.present) sentences.push_back(finding_sentence(p));
  for (Finding f : plan.resolved) sentences.push_back(resolved_sentence(f));
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string render_impression(const ReportPlan& plan) {
  if (plan.present.empty() && plan.resolved.empty()) return "no acute cardiopulmonary process .";
  std::string out;
  auto append = [&out](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  for (const auto& p : plan.present) {
    std::string s;
    if (p.interval != Interval::none) s = std::string(to_string(p.interval)) + " ";
    append(s + std::string(to_string(p.severity)) + " " + std::string(short_name(p.finding)) +
           " .");
  }
  for (Finding f : plan.resolved) append("resolved " + std::string(short_name(f)) + " .");
  return out;
}

ReportPlan parse_findings(std::string_view text) {
  const auto words = model::split_words(text);
  ReportPlan plan;
  bool clear = false;
  std::vector<std::string> sentence;
  auto flush = [&] {
    const std::string key = model::join_words(sentence);
    sentence.clear();
    const auto& table = sentence_table();
    const auto it = table.find(key);
    if (it == table.end()) throw std::invalid_argument("unrecognised findings sentence '" + key + "'");
    if (it->second.clear) clear = true;
    if (it->second.present) plan.present.push_back(*it->second.present);
    if (it->second.resolved) plan.resolved.push_back(*it->second.resolved);
  };
  for (const auto& w : words) {
    sentence.push_back(w);
    if (w == ".") flush();
  }
  if (!sentence.empty()) flush();
  if (clear && !plan.present.empty()) {
    throw std::invalid_argument("findings state both clear lungs and a finding");
  }
  return plan;
}

}  // namespace rrg::corpus
