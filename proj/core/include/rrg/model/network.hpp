#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rrg/model/config.hpp"
#include "rrg/model/study.hpp"
#include "rrg/numkit/parameter.hpp"

namespace rrg::model {

/// Frozen stand-in for a pretrained patch encoder: each image is tiled into
/// n_p square patches, and every flattened patch (pixels scaled by 1/255) is
/// multiplied by a fixed Gaussian projection drawn from `encoder_seed`.
class PatchEncoder {
 public:
  explicit PatchEncoder(const ModelConfig& config);

  /// [n_p x d_v] features, patches in row-major grid order.
  numkit::Array encode(const GrayImage& image) const;
  const numkit::Array& projection() const { return projection_; }

 private:
  std::size_t image_size_;
  std::size_t grid_;
  std::size_t side_;
  numkit::Array projection_;  // [patch_pixels x d_v]
};

numkit::Array encode_patches(const GrayImage& image, const ModelConfig& config);

/// All parameters of the model. The encoder projection is registered frozen
/// under "encoder.projection"; everything else is trainable and lives under
/// "adapter.", "time_delta." or "decoder.".
numkit::ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Adapter parameters only, for checks at shapes where a full model would not fit.
numkit::ParameterSet init_adapter_parameters(const ModelConfig& config, std::uint64_t seed);

inline bool is_decoder_parameter(std::string_view name) { return name.starts_with("decoder."); }

/// Latent-query compression: concat(queries, V) -> encoder layers -> first
/// n_q rows -> projection to d_model.
numkit::Tensor qadapter_forward(const numkit::Tensor& patches, const numkit::ParameterSet& params,
                                const ModelConfig& config);

/// (delta/3600 + 1)^(-1/2); throws std::invalid_argument when delta < 0.
double time_delta_feature(double delta_seconds);

/// GELU(feature(delta) * W1) * W2 as a [1 x d_model] row.
numkit::Tensor time_delta_embedding(double delta_seconds, const numkit::ParameterSet& params);

}  // namespace rrg::model
