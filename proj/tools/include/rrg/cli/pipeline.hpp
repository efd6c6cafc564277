#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "rrg/cli/commands.hpp"
#include "rrg/cli/config.hpp"

namespace rrg::cli {

class StageFailure : public std::runtime_error {
 public:
  StageFailure(const std::string& stage, const std::string& what)
      : std::runtime_error("stage " + stage + " failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineResult {
  nlohmann::json manifest;
  std::string manifest_sha256;
  std::vector<std::string> reused;  // stages skipped on resume
};

/// gen-data -> train-sft -> select-checkpoint -> train-grpo -> eval-metrics
/// under `config.out`, one subdirectory per stage. A stage whose marker,
/// key (config and upstream manifests) and file hashes all check out is
/// reused; any other stage directory is cleared and rerun. A rerun of a
/// directory written under a different config is refused.
PipelineResult run_pipeline(const RunConfig& config, Io io);

}  // namespace rrg::cli
