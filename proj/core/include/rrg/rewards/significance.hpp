#pragma once

#include <map>
#include <string>
#include <vector>

namespace rrg::rewards {

struct AnovaResult {
  double ss_between = 0.0;
  double ss_within = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double f = 0.0;
  double p = 1.0;
};

/// One-way ANOVA. Needs at least two groups and more observations than groups.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

/// P(Q <= q) for the studentized range of k means with df error degrees of
/// freedom, by adaptive quadrature of the double-integral form.
double studentized_range_cdf(double q, double k, double df);

struct TukeyComparison {
  std::size_t a = 0;
  std::size_t b = 0;
  double mean_diff = 0.0;  // mean(a) - mean(b)
  double q = 0.0;
  double p = 1.0;
};

/// Tukey HSD (Tukey-Kramer for unequal sizes) over every pair of groups.
std::vector<TukeyComparison> tukey_hsd(const std::vector<std::vector<double>>& groups);

struct SignificanceTable {
  std::vector<std::string> models;  // sorted
  AnovaResult anova;
  bool post_hoc = false;
  std::vector<TukeyComparison> pairs;  // indices into `models`
};

/// Per-study scores of each model on the same studies. Runs the ANOVA and,
/// when its p-value is at most alpha, Tukey HSD.
SignificanceTable paired_significance(const std::map<std::string, std::vector<double>>& scores,
                                      double alpha = 0.05);

}  // namespace rrg::rewards
