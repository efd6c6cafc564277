#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrg/numkit/array.hpp"

namespace rrg::stats {

struct DesignColumn {
  std::string name;
  std::vector<double> values;
};

/// Column-named design matrix, rows are observations.
struct DesignMatrix {
  std::vector<std::string> names;
  numkit::Array x;  // [n x p]

  static DesignMatrix from_columns(const std::vector<DesignColumn>& columns);
};

class RankDeficient : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Separation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlmFit {
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> se;
  std::vector<double> z;
  std::vector<double> p;
  std::vector<double> odds_ratios;
  std::vector<double> ci_low;   // exp(b - 1.96 se)
  std::vector<double> ci_high;  // exp(b + 1.96 se)
  numkit::Array covariance;     // [p x p]
  double deviance = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Binomial deviance -2 sum[y log mu + (1-y) log(1-mu)] of a logit model.
double logistic_deviance(const DesignMatrix& design, std::span<const double> y,
                         std::span<const double> beta);

/// Logit maximum likelihood by iteratively reweighted least squares, stopping
/// when max |delta b| < 1e-8 or after 100 iterations. Throws RankDeficient when
/// the design lacks full column rank and Separation when a coefficient exceeds
/// 15 in magnitude (or the fit diverges).
GlmFit glm_fit_logistic(const DesignMatrix& design, std::span<const double> y);

/// Named group of columns entering a model together.
struct TermGroup {
  std::string name;
  std::vector<DesignColumn> columns;
};

struct DevianceRow {
  std::string term;
  std::size_t df = 0;
  double delta = 0.0;
  std::size_t residual_df = 0;
  double residual_deviance = 0.0;
  double p = 1.0;
};

struct DevianceTable {
  std::size_t null_df = 0;
  double null_deviance = 0.0;
  std::vector<DevianceRow> rows;
};

/// Sequential (Type I) likelihood-ratio tests: an intercept-only model, then
/// each term group added in order. Throws RankDeficient when a group adds no
/// new direction and std::runtime_error if the deviance rises by more than 1e-8.
DevianceTable anova_deviance(const std::vector<TermGroup>& terms, std::span<const double> y);

/// Reference-coded indicator columns ("name[level]") for every level except
/// `reference`; levels appear in sorted order.
std::vector<DesignColumn> dummy_columns(const std::string& name,
                                        const std::vector<std::string>& values,
                                        const std::string& reference);

/// Pairwise products of two column groups ("a:b").
std::vector<DesignColumn> interaction_columns(const std::vector<DesignColumn>& a,
                                              const std::vector<DesignColumn>& b);

}  // namespace rrg::stats
