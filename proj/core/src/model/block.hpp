#pragma once

// Pre-norm transformer layer shared by the adapter and the decoder.

#include <random>
#include <span>
#include <string>

#include "rrg/numkit/ops.hpp"
#include "rrg/numkit/parameter.hpp"

namespace rrg::model::detail {

struct BlockWeights {
  numkit::Tensor norm1, wq, wk, wv, wo, norm2, w1, w2;
};

BlockWeights block_weights(const numkit::ParameterSet& params, const std::string& prefix);

void add_block_parameters(numkit::ParameterSet& params, const std::string& prefix,
                          std::size_t width, std::size_t ff, std::size_t layers,
                          std::mt19937_64& rng);

/// Rotated keys and values of every row seen so far by one layer.
struct KeyValues {
  numkit::Tensor k;
  numkit::Tensor v;
  std::size_t rows() const { return k.defined() ? k.rows() : 0; }
};

/// Runs the layer on the new rows `x`. Keys/values of earlier rows come from
/// `prefix` (may be empty); `mask` is rows(x) x (prefix rows + rows(x)).
/// On return `out_kv` holds the prefix extended by the new rows.
numkit::Tensor block_forward(const numkit::Tensor& x, std::span<const int> positions,
                             const BlockWeights& w, const KeyValues& prefix,
                             const numkit::AttentionMask& mask, std::size_t heads,
                             double rotary_base, KeyValues& out_kv);

}  // namespace rrg::model::detail
