#pragma once

#include <cstddef>
#include <cstdint>

namespace rrg::model {

struct SpecialTokens {
  int pad = 0;
  int bos = 1;
  int sep = 2;
  int eos = 3;
};

/// Shapes of the encoder stub, the latent-query adapter and the decoder.
struct ModelConfig {
  // decoder
  std::size_t d_model = 32;
  std::size_t decoder_layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 64;
  std::size_t vocab_size = 0;
  SpecialTokens special{};

  // frozen patch encoder stub
  std::size_t image_size = 64;  // square input, pixels per side
  std::size_t patch_count = 16;  // n_p, a perfect square
  std::size_t patch_dim = 32;    // d_v

  // latent-query adapter
  std::size_t query_count = 8;  // n_q
  std::size_t adapter_layers = 2;
  std::size_t adapter_heads = 2;
  std::size_t adapter_ff_dim = 64;

  std::size_t time_delta_inner = 32;
  double rotary_base = 10000.0;
  std::size_t max_generated_tokens = 320;
  std::size_t source_count = 10;
  std::size_t max_sequence_length = 2048;
  std::uint64_t encoder_seed = 17;

  /// Throws std::invalid_argument on inconsistent fields.
  void validate() const;

  std::size_t patch_grid() const;   // patches per side
  std::size_t patch_pixels() const;  // pixels per patch
};

/// Small configuration used for training on the synthetic corpus.
ModelConfig toy_config(std::size_t vocab_size);

/// Full-size shapes (1369 patches of 768 features, 128 queries, 3072 hidden).
/// Only practical for shape checks.
ModelConfig paper_shape_config(std::size_t vocab_size);

}  // namespace rrg::model
