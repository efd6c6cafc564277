#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "rrg/stats/glm.hpp"

namespace rrg::stats {

enum class Preference { radiologist, generated, none };
enum class Reason { precision, recall, readability };

std::string_view to_string(Preference p);
std::string_view to_string(Reason r);

/// One rater's verdict on one study.
struct RatingRecord {
  std::string rater;
  std::string study;
  Preference preference = Preference::none;
  std::vector<Reason> reasons;        // empty iff preference is none
  std::vector<std::string> findings;  // labels of the study

  /// Y = 1 when the generated report is preferred or there is no preference.
  bool acceptable() const { return preference != Preference::radiologist; }
  /// Throws std::invalid_argument on a broken reasons/preference pairing.
  void validate() const;
};

/// Tab-separated with a header line: rater_id, study_id, preference, reasons,
/// findings. Lists are comma-separated; "-" or an empty field is an empty list.
std::vector<RatingRecord> parse_ratings(std::istream& in);
std::vector<RatingRecord> read_ratings(const std::filesystem::path& path);
void write_ratings(std::ostream& out, const std::vector<RatingRecord>& records);

/// Seeded synthetic ratings: every rater rates every study. Each study gets
/// one to three labels from `labels`; a rating is acceptable with probability
/// `p_acceptable`, split evenly between "generated" and "none", and preferred
/// reports cite one or two reasons.
std::vector<RatingRecord> simulate_ratings(std::size_t studies,
                                           const std::vector<std::string>& raters,
                                           const std::vector<std::string>& labels,
                                           double p_acceptable, std::uint64_t seed);

/// Logistic design over ratings: one row per (rating, reason, finding). A
/// rating without preference carries all three reasons. Terms in order:
/// reason, rater, finding, reason x rater, reason x finding, rater x finding,
/// reference-coded on readability, the first rater id and "no-finding".
struct RatingsDesign {
  std::vector<TermGroup> terms;
  std::vector<double> y;
};

RatingsDesign ratings_design(const std::vector<RatingRecord>& records);

/// Main effects plus the listed number of leading interaction terms, as one
/// design with an intercept.
DesignMatrix main_design(const RatingsDesign& d, std::size_t interactions = 0);

/// Preference matrix for agreement: studies (sorted) x raters (sorted), with
/// categories 0 radiologist, 1 generated, 2 none. Every rater must rate every
/// study exactly once.
struct PreferenceMatrix {
  std::vector<std::string> studies;
  std::vector<std::string> raters;
  std::vector<std::vector<int>> ratings;
};

PreferenceMatrix preference_matrix(const std::vector<RatingRecord>& records);

}  // namespace rrg::stats
