#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rrg::corpus {

/// The eight findings of the synthetic corpus, in catalogue order. The order
/// is the tie-break used by stratified sampling.
enum class Finding {
  atelectasis,
  cardiomegaly,
  no_finding,
  pneumonia,
  pulmonary_congestion,
  pulmonary_edema,
  pleural_effusion,
  pneumothorax,
};

inline constexpr std::array<Finding, 8> kCatalogue{
    Finding::atelectasis,          Finding::cardiomegaly,    Finding::no_finding,
    Finding::pneumonia,            Finding::pulmonary_congestion, Finding::pulmonary_edema,
    Finding::pleural_effusion,     Finding::pneumothorax};

std::string_view finding_name(Finding f);
std::optional<Finding> finding_from_name(std::string_view name);
std::vector<std::string> catalogue_names();

enum class Severity { mild, moderate };

/// Change relative to the prior study; `none` when there is no prior.
enum class Interval { none, new_finding, unchanged, worsened, improved };

std::string_view to_string(Severity s);
std::string_view to_string(Interval i);

struct PlantedFinding {
  Finding finding = Finding::atelectasis;
  Severity severity = Severity::mild;
  Interval interval = Interval::none;

  friend bool operator==(const PlantedFinding&, const PlantedFinding&) = default;
};

/// Everything the report grammar says about one study. `present` never holds
/// no_finding; an empty `present` means the study is normal.
struct ReportPlan {
  std::vector<PlantedFinding> present;  // catalogue order
  std::vector<Finding> resolved;        // seen on the prior, gone now; catalogue order

  std::vector<std::string> labels() const;  // {"no-finding"} when present is empty
  friend bool operator==(const ReportPlan&, const ReportPlan&) = default;
};

/// Planted image pattern of a finding: a 16-pixel cell of the 4x4 grid.
enum class Pattern { horizontal_stripes, disc, checker, vertical_stripes, diagonal, solid, ring };

struct Motif {
  std::size_t cell_row = 0;
  std::size_t cell_col = 0;
  Pattern pattern = Pattern::solid;
};

/// Throws std::invalid_argument for no_finding, which has no motif.
Motif motif(Finding f);

std::string render_findings(const ReportPlan& plan);
std::string render_impression(const ReportPlan& plan);

/// Inverts render_findings. Throws std::invalid_argument on any sentence the
/// grammar cannot produce.
ReportPlan parse_findings(std::string_view text);

}  // namespace rrg::corpus
