#include "rrg/model/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "block.hpp"

namespace rrg::model {

using numkit::Array;
using numkit::AttentionMask;
using numkit::Shape;
using numkit::Tensor;

AttentionMask hybrid_attention_mask(std::size_t prompt_len, std::size_t gen_len) {
  const std::size_t n = prompt_len + gen_len;
  AttentionMask mask(n, n, false);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < prompt_len; ++c) mask.set(r, c, true);
    if (r >= prompt_len) {
      for (std::size_t c = prompt_len; c <= r; ++c) mask.set(r, c, true);
    }
  }
  return mask;
}

std::vector<SourceId> generated_sources(std::span<const int> stream,
                                        const SpecialTokens& special) {
  std::vector<SourceId> out;
  out.reserve(stream.size());
  bool after_sep = false;
  for (int t : stream) {
    out.push_back(after_sep ? SourceId::generated_impression : SourceId::generated_findings);
    if (t == special.sep) after_sep = true;
  }
  return out;
}

namespace {

void check_tokens(std::span<const int> tokens, const ModelConfig& config) {
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config.vocab_size) {
      throw std::out_of_range("decoder: token id " + std::to_string(t) +
                              " outside vocabulary of " + std::to_string(config.vocab_size));
    }
  }
}

void check_length(std::size_t prompt_len, std::size_t stream_len, const ModelConfig& config) {
  if (prompt_len + stream_len > config.max_sequence_length) {
    throw std::length_error("decoder: sequence of " + std::to_string(prompt_len + stream_len) +
                            " positions exceeds the maximum of " +
                            std::to_string(config.max_sequence_length));
  }
}

/// Input stream [BOS, tokens...].
std::vector<int> input_stream(std::span<const int> tokens, const SpecialTokens& special) {
  std::vector<int> in;
  in.reserve(tokens.size() + 1);
  in.push_back(special.bos);
  in.insert(in.end(), tokens.begin(), tokens.end());
  return in;
}

Tensor embed_generated(std::span<const int> stream, const numkit::ParameterSet& params,
                       const ModelConfig& config) {
  std::vector<int> sources;
  sources.reserve(stream.size());
  for (SourceId id : generated_sources(stream, config.special)) {
    sources.push_back(static_cast<int>(id));
  }
  return numkit::add(numkit::gather_rows(params.get("decoder.token_embedding"), stream),
                     numkit::gather_rows(params.get("decoder.source_embedding"), sources));
}

Tensor lm_logits(const Tensor& hidden, const numkit::ParameterSet& params,
                 const ModelConfig& config) {
  const Tensor& head = params.get("decoder.lm_head");
  if (head.cols() != config.vocab_size) {
    throw numkit::ShapeError("decoder: lm_head has " + std::to_string(head.cols()) +
                             " columns, vocabulary is " + std::to_string(config.vocab_size));
  }
  return numkit::add_row(
      numkit::matmul(numkit::rms_norm(hidden, params.get("decoder.norm")), head),
      params.get("decoder.lm_bias"));
}

std::vector<int> range_ids(std::size_t begin, std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(begin + i);
  return ids;
}

/// Generated rows see every cached column plus a causal block of their own.
AttentionMask continuation_mask(std::size_t prefix, std::size_t rows, std::size_t cached_gen) {
  AttentionMask mask(rows, prefix + cached_gen + rows, false);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c <= prefix + cached_gen + r; ++c) mask.set(r, c, true);
  }
  return mask;
}

detail::BlockWeights decoder_layer(const numkit::ParameterSet& params, std::size_t i) {
  return detail::block_weights(params, "decoder.layers." + std::to_string(i) + ".");
}

}  // namespace

Tensor decoder_forward(const PromptBundle& bundle, std::span<const int> tokens,
                       const numkit::ParameterSet& params, const ModelConfig& config) {
  check_tokens(tokens, config);
  const std::size_t L = bundle.length();
  const std::vector<int> stream = input_stream(tokens, config.special);
  check_length(L, stream.size(), config);

  Tensor x = numkit::concat({embed_prompt(bundle, params, config),
                             embed_generated(stream, params, config)},
                            0);
  std::vector<int> positions = bundle.position_ids();
  const std::vector<int> gen_positions = range_ids(L, stream.size());
  positions.insert(positions.end(), gen_positions.begin(), gen_positions.end());
  const AttentionMask mask = hybrid_attention_mask(L, stream.size());
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    detail::KeyValues kv;
    x = detail::block_forward(x, positions, decoder_layer(params, i), {}, mask, config.heads,
                              config.rotary_base, kv);
  }
  return lm_logits(numkit::slice_rows(x, L, L + stream.size()), params, config);
}

PromptCache encode_prompt(const PromptBundle& bundle, const numkit::ParameterSet& params,
                          const ModelConfig& config) {
  const std::size_t L = bundle.length();
  check_length(L, 1, config);
  Tensor x = embed_prompt(bundle, params, config);
  const std::vector<int> positions = bundle.position_ids();
  const AttentionMask mask(L, L, true);
  PromptCache cache;
  cache.length = L;
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    detail::KeyValues kv;
    x = detail::block_forward(x, positions, decoder_layer(params, i), {}, mask, config.heads,
                              config.rotary_base, kv);
    cache.keys.push_back(kv.k);
    cache.values.push_back(kv.v);
  }
  return cache;
}

Tensor decode_continuation(const PromptCache& cache, std::span<const int> tokens,
                           const numkit::ParameterSet& params, const ModelConfig& config) {
  check_tokens(tokens, config);
  const std::vector<int> stream = input_stream(tokens, config.special);
  check_length(cache.length, stream.size(), config);
  Tensor x = embed_generated(stream, params, config);
  const std::vector<int> positions = range_ids(cache.length, stream.size());
  const AttentionMask mask = continuation_mask(cache.length, stream.size(), 0);
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    detail::KeyValues kv;
    x = detail::block_forward(x, positions, decoder_layer(params, i),
                              {cache.keys[i], cache.values[i]}, mask, config.heads,
                              config.rotary_base, kv);
  }
  return lm_logits(x, params, config);
}

namespace {

int pick_token(std::span<const double> logits, const GenerationOptions& options,
               std::mt19937_64& rng) {
  if (options.mode == DecodeMode::greedy) {
    // max_element returns the first maximum, i.e. the lowest id on ties
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  if (!(options.temperature > 0.0)) {
    throw std::invalid_argument("generate: temperature must be positive");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    z += (w[j] = std::exp((logits[j] - mx) / options.temperature));
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * z;
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    acc += w[j];
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(w.size() - 1);
}

}  // namespace

std::vector<int> generate(const PromptCache& cache, const numkit::ParameterSet& params,
                          const ModelConfig& config, const GenerationOptions& options,
                          std::mt19937_64& rng) {
  if (options.max_tokens == 0) throw std::invalid_argument("generate: max_tokens must be >= 1");
  const numkit::ParameterSet frozen = params.detached();
  std::vector<detail::KeyValues> kv(config.decoder_layers);
  std::vector<detail::BlockWeights> layers;
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    kv[i] = {cache.keys[i].detach(), cache.values[i].detach()};
    layers.push_back(decoder_layer(frozen, i));
  }
  // every emitted token but the last is fed back as an input
  const std::size_t budget = std::min(options.max_tokens, config.max_sequence_length - cache.length);
  std::vector<int> emitted;
  int current = config.special.bos;
  bool after_sep = false;
  for (std::size_t step = 0; step < budget; ++step) {
    const int src = static_cast<int>(after_sep ? SourceId::generated_impression
                                               : SourceId::generated_findings);
    const int tok[1] = {current};
    const int srcs[1] = {src};
    Tensor x = numkit::add(numkit::gather_rows(frozen.get("decoder.token_embedding"), tok),
                           numkit::gather_rows(frozen.get("decoder.source_embedding"), srcs));
    const int pos[1] = {static_cast<int>(cache.length + step)};
    const AttentionMask mask(1, cache.length + step + 1, true);
    for (std::size_t i = 0; i < config.decoder_layers; ++i) {
      detail::KeyValues next;
      x = detail::block_forward(x, pos, layers[i], kv[i], mask, config.heads, config.rotary_base,
                                next);
      kv[i] = std::move(next);
    }
    const Tensor logits = lm_logits(x, frozen, config);
    const int token = pick_token(logits.value().data(), options, rng);
    emitted.push_back(token);
    if (token == config.special.eos) break;
    if (current == config.special.sep) after_sep = true;
    current = token;
  }
  return emitted;
}

std::vector<int> generate(const PromptBundle& bundle, const numkit::ParameterSet& params,
                          const ModelConfig& config, const GenerationOptions& options,
                          std::uint64_t seed) {
  const numkit::ParameterSet frozen = params.detached();
  std::mt19937_64 rng(seed);
  return generate(encode_prompt(bundle, frozen, config), frozen, config, options, rng);
}

ReportTokens split_sections(std::span<const int> tokens, const SpecialTokens& special) {
  std::size_t begin = 0;
  if (!tokens.empty() && tokens.front() == special.bos) begin = 1;
  if (tokens.size() <= begin || tokens.back() != special.eos) {
    throw InvalidCompletion("completion has no terminating end-of-sequence token");
  }
  const std::size_t end = tokens.size() - 1;
  std::size_t sep_at = end;
  std::size_t seps = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const int t = tokens[i];
    if (t == special.sep) {
      ++seps;
      sep_at = i;
    } else if (t == special.bos || t == special.eos) {
      throw InvalidCompletion("completion has a misplaced special token at index " +
                              std::to_string(i));
    }
  }
  if (seps == 0) throw InvalidCompletion("completion has no separator");
  if (seps > 1) throw InvalidCompletion("completion has " + std::to_string(seps) + " separators");
  ReportTokens out;
  out.findings.assign(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                      tokens.begin() + static_cast<std::ptrdiff_t>(sep_at));
  out.impression.assign(tokens.begin() + static_cast<std::ptrdiff_t>(sep_at + 1),
                        tokens.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

ComplexityRatio relative_complexity(double prompt_len, double baseline_len) {
  if (!(baseline_len > 0.0)) {
    throw std::invalid_argument("relative_complexity: baseline length must be positive");
  }
  if (!(prompt_len >= 0.0)) {
    throw std::invalid_argument("relative_complexity: prompt length must be non-negative");
  }
  const double r = prompt_len / baseline_len;
  return {r * r, 1.0 - r * r};
}

}  // namespace rrg::model
