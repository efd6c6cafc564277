#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rrg/model/config.hpp"
#include "rrg/model/prompt.hpp"
#include "rrg/numkit/ops.hpp"
#include "rrg/numkit/parameter.hpp"

namespace rrg::model {

/// Prompt rows see every prompt column and no generated column; generated
/// row t sees every prompt column and generated columns <= t.
numkit::AttentionMask hybrid_attention_mask(std::size_t prompt_len, std::size_t gen_len);

/// Source of each input of a generated stream starting at BOS: findings up to
/// and including the separator, impression afterwards.
std::vector<SourceId> generated_sources(std::span<const int> stream, const SpecialTokens& special);

/// Logits for the generated stream [BOS, tokens...] decoded after the prompt
/// under the hybrid mask. Row t predicts the token following input t, so the
/// result has tokens.size() + 1 rows.
numkit::Tensor decoder_forward(const PromptBundle& bundle, std::span<const int> tokens,
                               const numkit::ParameterSet& params, const ModelConfig& config);

/// Per-layer keys and values of an encoded prompt. Prompt rows never attend to
/// generated rows, so one encoding serves any number of continuations.
struct PromptCache {
  std::size_t length = 0;
  std::vector<numkit::Tensor> keys;
  std::vector<numkit::Tensor> values;
};

PromptCache encode_prompt(const PromptBundle& bundle, const numkit::ParameterSet& params,
                          const ModelConfig& config);

/// Same logits as decoder_forward, computed from a cached prompt.
numkit::Tensor decode_continuation(const PromptCache& cache, std::span<const int> tokens,
                                   const numkit::ParameterSet& params, const ModelConfig& config);

enum class DecodeMode { greedy, sample };

struct GenerationOptions {
  DecodeMode mode = DecodeMode::greedy;
  double temperature = 1.0;
  std::size_t max_tokens = 320;
};

/// Autoregressive decoding after BOS until EOS or `max_tokens`. Returns the
/// emitted tokens (BOS excluded). Greedy ties go to the lowest token id;
/// sampling draws from softmax(logits / temperature) without truncation.
/// Runs without recording gradients.
std::vector<int> generate(const PromptCache& cache, const numkit::ParameterSet& params,
                          const ModelConfig& config, const GenerationOptions& options,
                          std::mt19937_64& rng);

std::vector<int> generate(const PromptBundle& bundle, const numkit::ParameterSet& params,
                          const ModelConfig& config, const GenerationOptions& options,
                          std::uint64_t seed);

class InvalidCompletion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportTokens {
  std::vector<int> findings;
  std::vector<int> impression;
};

/// Splits [BOS?, findings..., SEP, impression..., EOS] at its single
/// separator. Throws InvalidCompletion on zero or several separators, a
/// missing or non-final EOS, or a BOS anywhere but the front.
ReportTokens split_sections(std::span<const int> tokens, const SpecialTokens& special);

struct ComplexityRatio {
  double ratio = 0.0;      // (L / L0)^2
  double reduction = 0.0;  // 1 - ratio
};

/// Self-attention cost of a prompt of length L relative to a baseline L0.
ComplexityRatio relative_complexity(double prompt_len, double baseline_len);

}  // namespace rrg::model
