#include "rrg/model/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "block.hpp"
#include "rrg/numkit/ops.hpp"

namespace rrg::model {

using numkit::Array;
using numkit::Shape;
using numkit::Tensor;

namespace {

Array gaussian(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Array a(std::move(shape), 0.0);
  for (double& v : a.data()) v = dist(rng);
  return a;
}

Array encoder_projection(const ModelConfig& config) {
  std::mt19937_64 rng(config.encoder_seed);
  const std::size_t pixels = config.patch_pixels();
  return gaussian({pixels, config.patch_dim}, 1.0 / std::sqrt(static_cast<double>(pixels)), rng);
}

std::vector<int> iota_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

}  // namespace

PatchEncoder::PatchEncoder(const ModelConfig& config)
    : image_size_(config.image_size),
      grid_(config.patch_grid()),
      side_(config.image_size / config.patch_grid()),
      projection_(encoder_projection(config)) {}

Array PatchEncoder::encode(const GrayImage& image) const {
  if (image.height != image_size_ || image.width != image_size_) {
    throw numkit::ShapeError("encode_patches: image is " + std::to_string(image.height) + "x" +
                             std::to_string(image.width) + ", expected " +
                             std::to_string(image_size_) + "x" + std::to_string(image_size_) +
                             " (" + std::to_string(grid_ * grid_) + " patches of " +
                             std::to_string(side_) + " pixels)");
  }
  const std::size_t n_p = grid_ * grid_;
  Array flat(Shape{n_p, side_ * side_}, 0.0);
  for (std::size_t gr = 0; gr < grid_; ++gr) {
    for (std::size_t gc = 0; gc < grid_; ++gc) {
      auto row = flat.row(gr * grid_ + gc);
      for (std::size_t r = 0; r < side_; ++r) {
        for (std::size_t c = 0; c < side_; ++c) {
          row[r * side_ + c] = image.at(gr * side_ + r, gc * side_ + c) / 255.0;
        }
      }
    }
  }
  return numkit::matmul(Tensor::constant(std::move(flat)), Tensor::constant(projection_))
      .value();
}

Array encode_patches(const GrayImage& image, const ModelConfig& config) {
  return PatchEncoder(config).encode(image);
}

namespace {

void add_adapter_parameters(numkit::ParameterSet& p, const ModelConfig& config,
                            std::mt19937_64& rng) {
  const std::size_t d = config.d_model, dv = config.patch_dim;
  p.add("adapter.queries", gaussian({config.query_count, dv}, 1.0, rng));
  for (std::size_t i = 0; i < config.adapter_layers; ++i) {
    detail::add_block_parameters(p, "adapter.layers." + std::to_string(i) + ".", dv,
                                 config.adapter_ff_dim, config.adapter_layers, rng);
  }
  p.add("adapter.out.weight", gaussian({dv, d}, 1.0 / std::sqrt(static_cast<double>(dv)), rng));
  p.add("adapter.out.bias", Array(Shape{d}, 0.0));
}

}  // namespace

numkit::ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  numkit::ParameterSet p;
  std::mt19937_64 rng(seed);
  const std::size_t d = config.d_model;

  p.add("encoder.projection", encoder_projection(config), /*frozen=*/true);
  add_adapter_parameters(p, config, rng);

  p.add("time_delta.w1", gaussian({1, config.time_delta_inner}, 1.0, rng));
  p.add("time_delta.w2",
        gaussian({config.time_delta_inner, d},
                 1.0 / std::sqrt(static_cast<double>(config.time_delta_inner)), rng));

  p.add("decoder.token_embedding", gaussian({config.vocab_size, d}, 1.0, rng));
  p.add("decoder.source_embedding", gaussian({config.source_count, d}, 1.0, rng));
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    detail::add_block_parameters(p, "decoder.layers." + std::to_string(i) + ".", d,
                                 config.ff_dim, config.decoder_layers, rng);
  }
  p.add("decoder.norm", Array(Shape{d}, 1.0));
  p.add("decoder.lm_head",
        gaussian({d, config.vocab_size}, 1.0 / std::sqrt(static_cast<double>(d)), rng));
  p.add("decoder.lm_bias", Array(Shape{config.vocab_size}, 0.0));
  return p;
}

numkit::ParameterSet init_adapter_parameters(const ModelConfig& config, std::uint64_t seed) {
  numkit::ParameterSet p;
  std::mt19937_64 rng(seed);
  add_adapter_parameters(p, config, rng);
  return p;
}

Tensor qadapter_forward(const Tensor& patches, const numkit::ParameterSet& params,
                        const ModelConfig& config) {
  const Tensor& queries = params.get("adapter.queries");
  if (patches.value().rank() != 2 || patches.cols() != queries.cols()) {
    throw numkit::ShapeError("qadapter_forward: patch features " +
                             numkit::shape_string(patches.shape()) + " do not match d_v=" +
                             std::to_string(queries.cols()));
  }
  const std::size_t n_q = queries.rows();
  Tensor x = numkit::concat({queries, patches}, 0);
  const std::vector<int> positions = iota_ids(x.rows());
  const numkit::AttentionMask full(x.rows(), x.rows(), true);
  for (std::size_t i = 0; i < config.adapter_layers; ++i) {
    const auto w = detail::block_weights(params, "adapter.layers." + std::to_string(i) + ".");
    detail::KeyValues kv;
    x = detail::block_forward(x, positions, w, {}, full, config.adapter_heads, config.rotary_base,
                              kv);
  }
  const Tensor kept = numkit::slice_rows(x, 0, n_q);
  return numkit::add_row(numkit::matmul(kept, params.get("adapter.out.weight")),
                         params.get("adapter.out.bias"));
}

double time_delta_feature(double delta_seconds) {
  if (!(delta_seconds >= 0.0)) {
    throw std::invalid_argument("time delta must be non-negative, got " +
                                std::to_string(delta_seconds));
  }
  return 1.0 / std::sqrt(delta_seconds / 3600.0 + 1.0);
}

Tensor time_delta_embedding(double delta_seconds, const numkit::ParameterSet& params) {
  const double f = time_delta_feature(delta_seconds);
  const Tensor hidden = numkit::gelu(numkit::scale(params.get("time_delta.w1"), f));
  return numkit::matmul(hidden, params.get("time_delta.w2"));
}

}  // namespace rrg::model
