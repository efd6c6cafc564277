#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rrg/model/config.hpp"
#include "rrg/model/decoder.hpp"
#include "rrg/model/tokenizer.hpp"
#include "rrg/numkit/parameter.hpp"
#include "rrg/rewards/composite.hpp"
#include "rrg/train/optimizer.hpp"
#include "rrg/train/sft.hpp"

namespace rrg::train {

struct GrpoConfig {
  std::size_t group_size = 4;
  double beta = 0.04;       // KL coefficient
  double clip_eps = 0.2;
  std::size_t inner_steps = 3;
  double temperature = 1.0;
  std::size_t max_completion_tokens = 320;
  double learning_rate = 3e-5;  // toy scale; the paper preset uses 1e-6
  std::size_t warmup = 0;
  std::size_t epochs = 1;
  std::size_t prompts_per_step = 8;
  std::size_t prompts_per_epoch = 0;  // 0: every training prompt
  std::size_t validations_per_epoch = 5;

  /// Throws std::invalid_argument unless G >= 2, eps in (0, 1), beta >= 0,
  /// inner steps >= 1 and prompts per step >= 1.
  void validate() const;
};

struct CompletionValidity {
  bool valid = false;
  std::vector<int> mask;  // one entry per token after the leading BOS
};

/// `stream` is [BOS, completion...]. Valid iff it holds exactly one BOS (at
/// the front), one SEP and one EOS (last, after the SEP). Invalid streams get
/// an all-zero mask.
CompletionValidity completion_validity_mask(std::span<const int> stream,
                                            const model::SpecialTokens& special);

/// Per-component standardised rewards a[i][k] = (r[i][k] - mean_k) / sd_k with
/// the population sd; a column with sd 0 is all zeros.
std::vector<std::vector<double>> normalised_components(const std::vector<std::vector<double>>& r);

/// A_i = sum_k w_k a[i][k]. Throws std::invalid_argument on fewer than two
/// rows or a width that differs from the weights.
std::vector<double> group_normalised_advantages(const std::vector<std::vector<double>>& r,
                                                std::span<const double> weights);

/// ratio - log(ratio) - 1 with ratio = exp(logp_ref - logp); never negative.
/// Throws numkit::NumericError on non-finite input.
double kl_estimate(double logp, double logp_ref);

/// Raised when every token of a group is masked out; the caller skips the group.
class EmptyGroup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clipped surrogate with a KL penalty, averaged over live tokens:
/// -(sum m [min(rho A, clip(rho, 1-eps, 1+eps) A) - beta kl]) / sum m,
/// rho = exp(logp - logp_old). `logp[i]` is a differentiable vector with one
/// entry per completion token (it may be undefined when mask i is all zero).
numkit::Tensor grpo_loss(std::span<const numkit::Tensor> logp,
                         std::span<const std::vector<double>> logp_old,
                         std::span<const std::vector<double>> logp_ref,
                         std::span<const double> advantages,
                         std::span<const std::vector<int>> masks, double beta, double eps);

/// log p(completion[t] | prompt, completion[<t]) for every completion token.
numkit::Tensor completion_log_probs(const model::PromptCache& cache,
                                    std::span<const int> completion,
                                    const numkit::ParameterSet& params,
                                    const model::ModelConfig& config);

/// Splits and detokenises a completion (emitted tokens, no BOS); nullopt when
/// the completion is invalid.
std::optional<rewards::ReportText> completion_text(std::span<const int> completion,
                                                   const model::Vocabulary& vocab,
                                                   const model::SpecialTokens& special);

struct GroupSample {
  std::size_t prompt = 0;
  std::vector<std::vector<int>> completions;  // emitted tokens, no BOS
  std::vector<std::vector<double>> logp_old;
  std::vector<std::vector<double>> logp_ref;
  std::vector<std::vector<int>> masks;
  std::vector<bool> valid;
  std::vector<std::vector<double>> rewards;  // G x K
  std::vector<double> advantages;
};

struct GrpoContext {
  const model::ModelConfig& model;
  const model::Vocabulary& vocab;
  const rewards::RewardSpec& reward;
  const GrpoConfig& config;
};

/// Samples a group for one prompt and scores it under the behaviour and
/// reference policies.
GroupSample sample_group(const Example& prompt, std::size_t prompt_index,
                         const numkit::ParameterSet& policy,
                         const numkit::ParameterSet& reference, const GrpoContext& ctx,
                         std::uint64_t seed);

struct GrpoDiagnostics {
  std::vector<double> losses;          // per inner step, mean over live groups
  double first_step_max_ratio_error = 0.0;  // max |rho - 1| at the first inner step
  double mean_kl = 0.0;                // at the last inner step, over live tokens
  double mean_reward = 0.0;            // weighted, over all completions
  std::vector<double> component_means;
  double invalid_fraction = 0.0;
  std::size_t skipped_groups = 0;
  std::size_t groups = 0;
};

/// Samples G completions per prompt of `batch`, freezes them with their behaviour and
/// reference log-probabilities, then runs the inner optimisation steps on the
/// decoder parameters only.
GrpoDiagnostics grpo_outer_step(std::span<const Example> batch, numkit::ParameterSet& policy,
                                const numkit::ParameterSet& reference, AdamW& optimizer,
                                double lr, const GrpoContext& ctx, std::uint64_t seed);

}  // namespace rrg::train
