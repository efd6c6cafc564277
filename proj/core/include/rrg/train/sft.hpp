#pragma once

#include <span>
#include <string>
#include <vector>

#include "rrg/model/config.hpp"
#include "rrg/model/network.hpp"
#include "rrg/model/prompt.hpp"
#include "rrg/model/study.hpp"
#include "rrg/model/tokenizer.hpp"
#include "rrg/numkit/parameter.hpp"
#include "rrg/rewards/composite.hpp"
#include "rrg/train/optimizer.hpp"

namespace rrg::train {

/// One study ready for training: its prompt, the teacher-forcing target
/// (findings SEP impression EOS) and the reference text for rewards.
struct Example {
  std::string study_id;
  model::PromptBundle bundle;
  std::vector<int> target;
  rewards::ReportText reference;
};

std::vector<int> report_target(const std::string& findings, const std::string& impression,
                               const model::Vocabulary& vocab);

/// Studies without both findings and impression are dropped.
std::vector<Example> prepare_examples(std::span<const model::StudyRecord> studies,
                                      const model::Vocabulary& vocab,
                                      const model::PatchEncoder& encoder,
                                      const model::ModelConfig& config,
                                      const model::AssembleOptions& options = {});

/// Token-level cross-entropy averaged over every target token of the batch.
/// Prompt positions carry no loss. Throws std::invalid_argument on an empty batch.
numkit::Tensor sft_loss(std::span<const Example> batch, const numkit::ParameterSet& params,
                        const model::ModelConfig& config);

/// One optimiser step on `batch`; returns the loss before the update.
double sft_step(std::span<const Example> batch, numkit::ParameterSet& params, AdamW& optimizer,
                double lr, const model::ModelConfig& config);

struct TokenAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Fraction of target tokens that are the argmax prediction under teacher forcing.
TokenAccuracy teacher_forced_accuracy(std::span<const Example> examples,
                                      const numkit::ParameterSet& params,
                                      const model::ModelConfig& config);

}  // namespace rrg::train
