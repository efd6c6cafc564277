#include "rrg/model/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace rrg::model {

std::size_t ModelConfig::patch_grid() const {
  const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(patch_count))));
  return g;
}

std::size_t ModelConfig::patch_pixels() const {
  const std::size_t side = image_size / patch_grid();
  return side * side;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("model config: " + why); };
  if (d_model == 0 || heads == 0 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if ((d_model / heads) % 2 != 0) fail("decoder head dimension must be even for rotary embeddings");
  if (patch_dim == 0 || adapter_heads == 0 || patch_dim % adapter_heads != 0 ||
      (patch_dim / adapter_heads) % 2 != 0) {
    fail("patch_dim must split into even-width adapter heads");
  }
  if (query_count < 1) fail("query_count must be >= 1");
  if (decoder_layers < 1) fail("decoder_layers must be >= 1");
  const std::size_t g = patch_grid();
  if (g * g != patch_count) fail("patch_count must be a perfect square");
  if (image_size % g != 0) fail("image_size must divide into the patch grid");
  const std::set<int> ids{special.pad, special.bos, special.sep, special.eos};
  if (ids.size() != 4) fail("special token ids must be distinct");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      fail("special token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  if (source_count != 10) fail("exactly ten source embeddings are defined");
  if (max_generated_tokens < 1) fail("max_generated_tokens must be >= 1");
}

ModelConfig toy_config(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 48;
  c.decoder_layers = 2;
  c.heads = 4;
  c.ff_dim = 96;
  c.patch_count = 16;
  c.patch_dim = 32;
  c.query_count = 4;
  c.adapter_layers = 1;
  c.adapter_heads = 2;
  c.adapter_ff_dim = 64;
  c.time_delta_inner = 16;
  c.max_generated_tokens = 96;
  return c;
}

ModelConfig paper_shape_config(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 3072;
  c.heads = 24;
  c.ff_dim = 8192;
  c.decoder_layers = 28;
  c.image_size = 518;
  c.patch_count = 1369;
  c.patch_dim = 768;
  c.query_count = 128;
  c.adapter_layers = 2;
  c.adapter_heads = 12;
  c.adapter_ff_dim = 3072;
  c.time_delta_inner = 3072;
  c.max_generated_tokens = 320;
  return c;
}

}  // namespace rrg::model
