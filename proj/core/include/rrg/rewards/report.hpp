#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrg/rewards/significance.hpp"

namespace rrg::rewards {

/// Scores of several models on one study list, per component.
struct MetricReport {
  std::vector<std::string> metrics;
  std::vector<std::string> study_ids;
  // model -> study -> component score, components in `metrics` order
  std::map<std::string, std::vector<std::vector<double>>> scores;
  // model -> component mean
  std::map<std::string, std::vector<double>> means;
  // metric -> significance across models (absent with a single model)
  std::map<std::string, SignificanceTable> significance;
};

MetricReport build_metric_report(
    const std::vector<std::string>& metrics, const std::vector<std::string>& study_ids,
    const std::map<std::string, std::vector<std::vector<double>>>& scores, double alpha = 0.05);

/// `<stem>.tsv`: metric, model, mean, ANOVA F and p, then one Tukey p-value
/// column per model ("NA" where not run). `<stem>.json`: the full report.
void write_metric_report(const std::filesystem::path& dir, const std::string& stem,
                         const MetricReport& report);

}  // namespace rrg::rewards
