#include "block.hpp"

#include <cmath>

namespace rrg::model::detail {

using numkit::Array;
using numkit::Shape;
using numkit::Tensor;

BlockWeights block_weights(const numkit::ParameterSet& params, const std::string& prefix) {
  auto p = [&](const char* leaf) { return params.get(prefix + leaf); };
  return {p("norm1"), p("wq"), p("wk"), p("wv"), p("wo"), p("norm2"), p("w1"), p("w2")};
}

namespace {

Array gaussian(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Array a(std::move(shape), 0.0);
  for (double& v : a.data()) v = dist(rng);
  return a;
}

}  // namespace

void add_block_parameters(numkit::ParameterSet& params, const std::string& prefix,
                          std::size_t width, std::size_t ff, std::size_t layers,
                          std::mt19937_64& rng) {
  const double in_std = 1.0 / std::sqrt(static_cast<double>(width));
  // residual branches scaled down so the stack starts near identity
  const double out_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(layers));
  params.add(prefix + "norm1", Array(Shape{width}, 1.0));
  params.add(prefix + "wq", gaussian({width, width}, in_std, rng));
  params.add(prefix + "wk", gaussian({width, width}, in_std, rng));
  params.add(prefix + "wv", gaussian({width, width}, in_std, rng));
  params.add(prefix + "wo", gaussian({width, width}, in_std * out_scale, rng));
  params.add(prefix + "norm2", Array(Shape{width}, 1.0));
  params.add(prefix + "w1", gaussian({width, ff}, in_std, rng));
  params.add(prefix + "w2",
             gaussian({ff, width}, out_scale / std::sqrt(static_cast<double>(ff)), rng));
}

Tensor block_forward(const Tensor& x, std::span<const int> positions, const BlockWeights& w,
                     const KeyValues& prefix, const numkit::AttentionMask& mask,
                     std::size_t heads, double rotary_base, KeyValues& out_kv) {
  using namespace numkit;
  const Tensor h = rms_norm(x, w.norm1);
  const Tensor q = rotary_apply(matmul(h, w.wq), positions, rotary_base, heads);
  const Tensor k = rotary_apply(matmul(h, w.wk), positions, rotary_base, heads);
  const Tensor v = matmul(h, w.wv);
  KeyValues kv;
  if (prefix.rows() > 0) {
    kv.k = concat({prefix.k, k}, 0);
    kv.v = concat({prefix.v, v}, 0);
  } else {
    kv.k = k;
    kv.v = v;
  }
  const Tensor attended = attention(q, kv.k, kv.v, mask, heads);
  const Tensor x1 = add(x, matmul(attended, w.wo));
  const Tensor ff = matmul(gelu(matmul(rms_norm(x1, w.norm2), w.w1)), w.w2);
  out_kv = std::move(kv);
  return add(x1, ff);
}

}  // namespace rrg::model::detail
