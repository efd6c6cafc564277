#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrg/model/study.hpp"

namespace rrg::corpus {

class PoolExhausted : public std::runtime_error {
 public:
  PoolExhausted(const std::string& finding, const std::string& what)
      : std::runtime_error(what), finding_(finding) {}
  const std::string& finding() const { return finding_; }

 private:
  std::string finding_;
};

/// Iterative patient-level stratified sampling. Each round takes the target
/// with the fewest selected studies (ties: earlier in `targets`), draws
/// uniformly a pool study positive for it whose patient is not yet selected,
/// and updates the count of every target the study carries. Returns pool
/// indices in selection order.
std::vector<std::size_t> stratified_sample(const std::vector<model::StudyRecord>& pool,
                                           const std::vector<std::string>& targets,
                                           std::size_t n, std::uint64_t seed);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  std::vector<model::StudyRecord> train;
  std::vector<model::StudyRecord> validation;
  std::vector<model::StudyRecord> test;
  // studies dropped from train/validation for lacking findings or impression
  std::size_t train_filtered = 0;
  std::size_t validation_filtered = 0;
};

/// Patient-disjoint split. Patients are shuffled under the seed and cut by
/// the fractions; train and validation keep only studies with both findings
/// and impression (priors are not filtered).
DatasetSplits split_dataset(const std::vector<model::StudyRecord>& corpus,
                            const SplitFractions& fractions, std::uint64_t seed);

}  // namespace rrg::corpus
