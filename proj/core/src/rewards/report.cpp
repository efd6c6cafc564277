#include "rrg/rewards/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rrg::rewards {

MetricReport build_metric_report(
    const std::vector<std::string>& metrics, const std::vector<std::string>& study_ids,
    const std::map<std::string, std::vector<std::vector<double>>>& scores, double alpha) {
  MetricReport r;
  r.metrics = metrics;
  r.study_ids = study_ids;
  r.scores = scores;
  for (const auto& [model, rows] : scores) {
    if (rows.size() != study_ids.size()) {
      throw std::invalid_argument("metric report: model " + model + " has " +
                                  std::to_string(rows.size()) + " scored studies, expected " +
                                  std::to_string(study_ids.size()));
    }
    std::vector<double> mean(metrics.size(), 0.0);
    for (const auto& row : rows) {
      if (row.size() != metrics.size()) throw std::invalid_argument("metric report: ragged scores");
      for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
    }
    for (double& m : mean) m /= rows.empty() ? 1.0 : static_cast<double>(rows.size());
    r.means[model] = mean;
  }
  if (scores.size() >= 2 && study_ids.size() >= 2) {
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      std::map<std::string, std::vector<double>> column;
      for (const auto& [model, rows] : scores) {
        for (const auto& row : rows) column[model].push_back(row[k]);
      }
      r.significance[metrics[k]] = paired_significance(column, alpha);
    }
  }
  return r;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

void write_metric_report(const std::filesystem::path& dir, const std::string& stem,
                         const MetricReport& report) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> models;
  for (const auto& [m, _] : report.means) models.push_back(m);

  std::ofstream tsv(dir / (stem + ".tsv"), std::ios::trunc);
  if (!tsv) throw std::runtime_error("metric report: cannot write " + stem + ".tsv");
  tsv << "metric\tmodel\tmean\tanova_f\tanova_p";
  for (const auto& m : models) tsv << "\tp_vs_" << m;
  tsv << '\n';
  for (std::size_t k = 0; k < report.metrics.size(); ++k) {
    const auto& metric = report.metrics[k];
    const auto sig = report.significance.find(metric);
    for (std::size_t a = 0; a < models.size(); ++a) {
      tsv << metric << '\t' << models[a] << '\t' << fmt(report.means.at(models[a])[k]);
      if (sig == report.significance.end()) {
        tsv << "\tNA\tNA";
      } else {
        tsv << '\t' << fmt(sig->second.anova.f) << '\t' << fmt(sig->second.anova.p);
      }
      for (std::size_t b = 0; b < models.size(); ++b) {
        std::string cell = "NA";
        if (sig != report.significance.end()) {
          for (const auto& c : sig->second.pairs) {
            if ((c.a == a && c.b == b) || (c.a == b && c.b == a)) cell = fmt(c.p);
          }
        }
        tsv << '\t' << cell;
      }
      tsv << '\n';
    }
  }

  using json = nlohmann::json;
  json j;
  j["metrics"] = report.metrics;
  j["study_ids"] = report.study_ids;
  j["scores"] = report.scores;
  j["means"] = report.means;
  json sig = json::object();
  for (const auto& [metric, table] : report.significance) {
    json pairs = json::array();
    for (const auto& c : table.pairs) {
      pairs.push_back({{"a", table.models[c.a]},
                       {"b", table.models[c.b]},
                       {"mean_diff", c.mean_diff},
                       {"q", c.q},
                       {"p", c.p}});
    }
    sig[metric] = {{"models", table.models},
                   {"anova",
                    {{"f", table.anova.f},
                     {"df_between", table.anova.df_between},
                     {"df_within", table.anova.df_within},
                     {"p", table.anova.p}}},
                   {"post_hoc", table.post_hoc},
                   {"pairs", pairs}};
  }
  j["significance"] = sig;
  std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
  if (!out) throw std::runtime_error("metric report: cannot write " + stem + ".json");
  out << j.dump() << '\n';
}

}  // namespace rrg::rewards
