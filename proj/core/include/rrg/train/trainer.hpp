#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrg/model/config.hpp"
#include "rrg/model/tokenizer.hpp"
#include "rrg/numkit/parameter.hpp"
#include "rrg/rewards/composite.hpp"
#include "rrg/train/grpo.hpp"
#include "rrg/train/optimizer.hpp"
#include "rrg/train/sft.hpp"

namespace rrg::train {

struct SftConfig {
  double peak_lr = 3e-3;
  std::size_t warmup = 20;
  std::size_t epochs = 8;
  std::size_t cycles = 1;
  std::size_t batch_size = 8;
  std::string selection_metric = "composite";  // or "accuracy"
  std::uint64_t seed = 0;
  AdamWConfig adamw{};

  /// 5 epochs, 5 cycles, warm-up 500, peak 5e-5, batch 16.
  static SftConfig paper_preset();
  void validate() const;
};

/// Constant 1e-6 after a 500-step warm-up, at most 2 epochs, 8 prompts per step.
GrpoConfig grpo_paper_preset();

/// Index of the best score; ties go to the earliest. Throws
/// std::invalid_argument on empty input.
std::size_t select_checkpoint(std::span<const double> scores);

/// Outer steps (1-based) after which GRPO validates: `per_epoch` evenly
/// spaced points per epoch, the last one on the epoch's final step.
std::vector<std::size_t> validation_schedule(std::size_t steps_per_epoch, std::size_t epochs,
                                             std::size_t per_epoch);

/// Loads a model snapshot and re-freezes the patch encoder projection.
numkit::ParameterSet load_checkpoint(const std::filesystem::path& path);

struct GeneratedReport {
  std::string study_id;
  std::vector<int> tokens;  // emitted tokens, no BOS
  std::optional<rewards::ReportText> text;
};

struct Evaluation {
  std::vector<GeneratedReport> reports;
  std::vector<std::vector<double>> scores;  // per example, reward components
  std::vector<double> component_means;
  double mean_reward = 0.0;  // weighted composite
  double invalid_fraction = 0.0;
};

/// Greedy decoding of every example, scored against its reference.
Evaluation evaluate_greedy(std::span<const Example> examples, const numkit::ParameterSet& params,
                           const model::ModelConfig& model, const model::Vocabulary& vocab,
                           const rewards::RewardSpec& reward, std::size_t max_tokens);

struct CheckpointRecord {
  std::string id;
  std::filesystem::path path;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double accuracy = 0.0;  // teacher-forced, validation
  double reward = 0.0;    // greedy composite, validation
};

struct SftResult {
  std::vector<CheckpointRecord> checkpoints;
  std::size_t best = 0;
};

/// Trains in place, writing sft_config.ini, sft_log.tsv, sft_validation.tsv and
/// checkpoints/sft_epoch<k>.cxl2 under `run_dir`. `params` ends at the last
/// epoch; the selected checkpoint is named by `best`.
SftResult run_sft(std::span<const Example> train, std::span<const Example> validation,
                  numkit::ParameterSet& params, const model::ModelConfig& model,
                  const model::Vocabulary& vocab, const rewards::RewardSpec& reward,
                  const SftConfig& config, const std::filesystem::path& run_dir);

struct GrpoValidation {
  std::size_t step = 0;
  double reward = 0.0;
  double invalid_fraction = 0.0;
};

struct GrpoResult {
  std::vector<GrpoValidation> validations;  // step 0 is the starting point
  std::size_t steps = 0;
  std::size_t skipped_groups = 0;
  std::filesystem::path final_checkpoint;
};

/// Optimises `policy` against the frozen `reference`, writing grpo_config.ini,
/// grpo_log.tsv, grpo_validation.tsv and checkpoints/grpo_final.cxl2.
/// A non-zero `prompts_per_epoch` restricts each epoch to a seeded subset.
GrpoResult run_grpo(std::span<const Example> train, std::span<const Example> validation,
                    numkit::ParameterSet& policy, const numkit::ParameterSet& reference,
                    const model::ModelConfig& model, const model::Vocabulary& vocab,
                    const rewards::RewardSpec& reward, const GrpoConfig& config,
                    std::uint64_t seed, const std::filesystem::path& run_dir);

}  // namespace rrg::train
