#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace rrg::stats {

struct KappaResult {
  double agreement = 0.0;  // mean observed pairwise agreement
  double kappa = 0.0;
  double se = 0.0;  // standard error under the null of no agreement beyond chance
  double z = 0.0;
  double p = 1.0;  // two-sided normal
};

class UndefinedKappa : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fleiss' kappa from per-item category counts (items x categories); every
/// item must have the same number (>= 2) of ratings. The null standard error
/// is the large-sample one of Fleiss, Nee and Landis.
/// Throws UndefinedKappa when chance agreement is 1 (one category throughout).
KappaResult fleiss_kappa_counts(const std::vector<std::vector<std::size_t>>& counts);

/// ratings[item][rater] holds a category id in [0, categories). `raters`
/// selects a subset of columns (all when empty).
KappaResult fleiss_kappa(const std::vector<std::vector<int>>& ratings, std::size_t categories,
                         const std::vector<std::size_t>& raters = {});

/// Cohen's kappa of two raters over the same items.
double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, std::size_t categories);

struct PairwiseKappa {
  std::size_t rater_a = 0;
  std::size_t rater_b = 0;
  KappaResult result;
};

/// Fleiss' kappa for every pair of raters.
std::vector<PairwiseKappa> pairwise_kappa(const std::vector<std::vector<int>>& ratings,
                                          std::size_t categories);

}  // namespace rrg::stats
