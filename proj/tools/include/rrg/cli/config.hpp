#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrg/corpus/generate.hpp"
#include "rrg/corpus/sampling.hpp"
#include "rrg/model/config.hpp"
#include "rrg/rewards/composite.hpp"
#include "rrg/train/grpo.hpp"
#include "rrg/train/trainer.hpp"

namespace rrg::cli {

/// Bad flags, bad config keys, missing seeds or missing input paths. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSettings {
  std::size_t studies = 2000;
  double prior_probability = 0.5;
  std::size_t image_size = 64;
  double repeat_patient_probability = 0.2;
  corpus::SplitFractions fractions{};
  std::size_t image_limit = 5;  // per timepoint
};

/// Preset plus optional shape overrides.
struct ModelSettings {
  std::string preset = "toy";  // toy | paper-shapes
  std::optional<std::size_t> d_model;
  std::optional<std::size_t> decoder_layers;
  std::optional<std::size_t> heads;
  std::optional<std::size_t> ff_dim;
  std::optional<std::size_t> query_count;
  std::optional<std::size_t> adapter_layers;
  std::optional<std::size_t> adapter_heads;
  std::optional<std::size_t> max_generated_tokens;

  /// Throws std::invalid_argument on an unknown preset or inconsistent shapes.
  model::ModelConfig resolve(std::size_t vocab_size) const;
};

struct NamedCheckpoint {
  std::string name;
  std::filesystem::path path;
};

struct RunConfig {
  std::string command;
  std::optional<std::uint64_t> seed;

  std::filesystem::path out;         // run directory
  std::filesystem::path data;        // dataset directory written by gen-data
  std::filesystem::path checkpoint;  // generate; train-grpo reference
  std::filesystem::path sft_run;     // train-grpo: take the selected SFT checkpoint from here
  std::filesystem::path ratings;     // stats kappa / glm
  std::vector<NamedCheckpoint> models;  // eval-metrics
  std::string split = "test";

  DataSettings data_settings;
  ModelSettings model;
  train::SftConfig sft;
  train::GrpoConfig grpo;
  rewards::RewardSpec reward = rewards::RewardSpec::defaults();
};

/// Applies an INI file on top of `config`. Unknown sections or keys and
/// unparsable values raise UsageError.
void apply_ini(const std::filesystem::path& path, RunConfig& config);

/// Canonical INI text of every setting that affects results. Output paths
/// are left out so that relocated runs snapshot identically.
std::string to_ini(const RunConfig& config);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Checks the model, SFT, GRPO and reward settings before any work starts.
/// Throws UsageError naming the first problem.
void validate_settings(const RunConfig& config);

/// Throws UsageError when the seed is absent.
std::uint64_t require_seed(const RunConfig& config);

/// Throws UsageError when `path` does not exist.
void require_exists(const std::filesystem::path& path, const std::string& what);

}  // namespace rrg::cli
