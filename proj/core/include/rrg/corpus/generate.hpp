#pragma once

#include <cstdint>
#include <vector>

#include "rrg/corpus/catalogue.hpp"
#include "rrg/model/study.hpp"

namespace rrg::corpus {

struct CorpusOptions {
  std::size_t n_studies = 100;
  double prior_probability = 0.5;
  std::uint64_t seed = 0;
  std::size_t image_size = 64;
  double repeat_patient_probability = 0.2;  // a study reuses the previous patient
};

/// Synthetic studies with planted findings, normalised images and grammar
/// reports. Prior-bearing reports describe interval change. Deterministic
/// under the seed.
std::vector<model::StudyRecord> generate_corpus(const CorpusOptions& options);

/// Every text section of the studies and their priors, for building a vocabulary.
std::vector<std::string> corpus_texts(const std::vector<model::StudyRecord>& studies);

/// Reconstructs the plan of a generated study from its findings section.
ReportPlan recover_plan(const model::StudyRecord& study);

}  // namespace rrg::corpus
