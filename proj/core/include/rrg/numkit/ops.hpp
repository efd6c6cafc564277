#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rrg/numkit/tensor.hpp"

namespace rrg::numkit {

/// Row-major boolean matrix; `allowed(r, c)` means row r may attend to column c.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t rows, std::size_t cols, bool fill);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Linear algebra (rank-2 operands).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Element-wise, shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a[m x n] + row[n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Structural.
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
/// Embedding lookup: rows of `table` selected by `ids`.
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

// Activations and normalisation.
/// Exact x * Phi(x) with Phi the standard normal CDF.
Tensor gelu(const Tensor& x);
/// Shift-stable softmax over the last axis.
Tensor softmax_last(const Tensor& x);
/// x / sqrt(mean(x^2) + eps) * weight, per row.
Tensor rms_norm(const Tensor& x, const Tensor& weight, double eps = 1e-6);

/// Rotates each consecutive (even, odd) column pair of every row by
/// position * base^(-2j/head_dim). With heads > 1 the rotation is applied
/// independently inside each head's column block.
Tensor rotary_apply(const Tensor& x, std::span<const int> position_ids, double base,
                    std::size_t heads = 1);

/// Multi-head scaled dot-product attention. q is [m x d], k and v are [n x d];
/// the mask is m x n. Each row must be allowed at least one column.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionMask& mask, std::size_t heads = 1);

/// Mean over rows with mask == 1 of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const int> mask);

/// Per-row log softmax(logits)[target], as a length-T vector.
Tensor token_log_probs(const Tensor& logits, std::span<const int> targets);

// Scalar helpers shared with the statistics code.
double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace rrg::numkit
