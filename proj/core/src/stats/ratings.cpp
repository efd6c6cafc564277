#include "rrg/stats/ratings.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rrg::stats {

std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::radiologist: return "radiologist";
    case Preference::generated: return "generated";
    case Preference::none: return "none";
  }
  return "?";
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::precision: return "precision";
    case Reason::recall: return "recall";
    case Reason::readability: return "readability";
  }
  return "?";
}

void RatingRecord::validate() const {
  if ((preference == Preference::none) != reasons.empty()) {
    throw std::invalid_argument("rating " + rater + "/" + study +
                                ": reasons must be given exactly when a report is preferred");
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> list_field(const std::string& s) {
  if (s.empty() || s == "-") return {};
  return split(s, ',');
}

Preference preference_from(const std::string& s) {
  if (s == "radiologist") return Preference::radiologist;
  if (s == "generated") return Preference::generated;
  if (s == "none") return Preference::none;
  throw std::invalid_argument("unknown preference '" + s + "'");
}

Reason reason_from(const std::string& s) {
  if (s == "precision") return Reason::precision;
  if (s == "recall") return Reason::recall;
  if (s == "readability") return Reason::readability;
  throw std::invalid_argument("unknown reason '" + s + "'");
}

std::string join(const std::vector<std::string>& v) {
  if (v.empty()) return "-";
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

std::vector<RatingRecord> parse_ratings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("ratings: empty input");
  if (line != "rater_id\tstudy_id\tpreference\treasons\tfindings") {
    throw std::invalid_argument("ratings: unexpected header '" + line + "'");
  }
  std::vector<RatingRecord> out;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) {
      throw std::invalid_argument("ratings line " + std::to_string(number) + ": expected 5 fields, got " +
                                  std::to_string(f.size()));
    }
    RatingRecord r;
    r.rater = f[0];
    r.study = f[1];
    try {
      r.preference = preference_from(f[2]);
      for (const auto& s : list_field(f[3])) r.reasons.push_back(reason_from(s));
      r.findings = list_field(f[4]);
      r.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("ratings line " + std::to_string(number) + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RatingRecord> read_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read ratings file " + path.string());
  return parse_ratings(in);
}

void write_ratings(std::ostream& out, const std::vector<RatingRecord>& records) {
  out << "rater_id\tstudy_id\tpreference\treasons\tfindings\n";
  for (const auto& r : records) {
    std::vector<std::string> reasons;
    for (Reason x : r.reasons) reasons.emplace_back(to_string(x));
    out << r.rater << '\t' << r.study << '\t' << to_string(r.preference) << '\t' << join(reasons)
        << '\t' << join(r.findings) << '\n';
  }
}

RatingsDesign ratings_design(const std::vector<RatingRecord>& records) {
  std::vector<std::string> reason, rater, finding;
  RatingsDesign d;
  for (const auto& r : records) {
    r.validate();
    std::vector<Reason> reasons = r.reasons;
    if (reasons.empty()) reasons = {Reason::precision, Reason::recall, Reason::readability};
    const std::vector<std::string> findings =
        r.findings.empty() ? std::vector<std::string>{"no-finding"} : r.findings;
    for (Reason x : reasons) {
      for (const auto& f : findings) {
        reason.emplace_back(to_string(x));
        rater.push_back(r.rater);
        finding.push_back(f);
        d.y.push_back(r.acceptable() ? 1.0 : 0.0);
      }
    }
  }
  if (d.y.empty()) throw std::invalid_argument("ratings design: no ratings");
  const std::string first_rater = *std::min_element(rater.begin(), rater.end());
  const auto reason_cols = dummy_columns("reason", reason, "readability");
  const auto rater_cols = dummy_columns("rater", rater, first_rater);
  const auto finding_cols = dummy_columns("finding", finding, "no-finding");
  d.terms = {{"reason", reason_cols},
             {"rater", rater_cols},
             {"finding", finding_cols},
             {"reason:rater", interaction_columns(reason_cols, rater_cols)},
             {"reason:finding", interaction_columns(reason_cols, finding_cols)},
             {"rater:finding", interaction_columns(rater_cols, finding_cols)}};
  return d;
}

DesignMatrix main_design(const RatingsDesign& d, std::size_t interactions) {
  std::vector<DesignColumn> cols{{"(intercept)", std::vector<double>(d.y.size(), 1.0)}};
  const std::size_t count = std::min<std::size_t>(3 + interactions, d.terms.size());
  for (std::size_t t = 0; t < count; ++t) {
    cols.insert(cols.end(), d.terms[t].columns.begin(), d.terms[t].columns.end());
  }
  return DesignMatrix::from_columns(cols);
}

PreferenceMatrix preference_matrix(const std::vector<RatingRecord>& records) {
  std::set<std::string> studies, raters;
  for (const auto& r : records) {
    studies.insert(r.study);
    raters.insert(r.rater);
  }
  PreferenceMatrix m;
  m.studies.assign(studies.begin(), studies.end());
  m.raters.assign(raters.begin(), raters.end());
  std::map<std::string, std::size_t> si, ri;
  for (std::size_t i = 0; i < m.studies.size(); ++i) si[m.studies[i]] = i;
  for (std::size_t i = 0; i < m.raters.size(); ++i) ri[m.raters[i]] = i;
  m.ratings.assign(m.studies.size(), std::vector<int>(m.raters.size(), -1));
  for (const auto& r : records) {
    int& cell = m.ratings[si[r.study]][ri[r.rater]];
    if (cell != -1) {
      throw std::invalid_argument("preference matrix: rater " + r.rater + " rated study " +
                                  r.study + " twice");
    }
    cell = static_cast<int>(r.preference);
  }
  for (std::size_t i = 0; i < m.studies.size(); ++i) {
    for (std::size_t j = 0; j < m.raters.size(); ++j) {
      if (m.ratings[i][j] == -1) {
        throw std::invalid_argument("preference matrix: rater " + m.raters[j] +
                                    " did not rate study " + m.studies[i]);
      }
    }
  }
  return m;
}

std::vector<RatingRecord> simulate_ratings(std::size_t studies,
                                           const std::vector<std::string>& raters,
                                           const std::vector<std::string>& labels,
                                           double p_acceptable, std::uint64_t seed) {
  if (labels.empty()) throw std::invalid_argument("simulate ratings: no finding labels");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, labels.size() - 1);
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_int_distribution<int> reason(0, 2);
  std::vector<RatingRecord> out;
  for (std::size_t s = 0; s < studies; ++s) {
    std::set<std::string> findings;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) findings.insert(labels[label(rng)]);
    for (const auto& r : raters) {
      RatingRecord rec;
      rec.rater = r;
      rec.study = "study" + std::to_string(s);
      rec.findings.assign(findings.begin(), findings.end());
      if (u(rng) < p_acceptable) {
        rec.preference = u(rng) < 0.5 ? Preference::generated : Preference::none;
      } else {
        rec.preference = Preference::radiologist;
      }
      if (rec.preference != Preference::none) {
        std::set<int> chosen{reason(rng)};
        if (u(rng) < 0.4) chosen.insert(reason(rng));
        for (int c : chosen) rec.reasons.push_back(static_cast<Reason>(c));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace rrg::stats
