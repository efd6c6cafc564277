#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rrg::rewards {

using Tokens = std::vector<std::string>;

/// 1 - max over n in {2,3,4} of (1 - distinct n-grams / total n-grams);
/// orders with fewer than n tokens contribute 0. Empty text scores 1.
double arn(std::span<const std::string> tokens);
double arn(std::string_view text);

/// Sentence BLEU-4: geometric mean of clipped n-gram precisions (add-one
/// smoothing for n >= 2) times exp(min(0, 1 - ref_len / hyp_len)).
/// An empty hypothesis scores 0.
double bleu4(std::span<const std::string> hypothesis, std::span<const std::string> reference);
double bleu4(std::string_view hypothesis, std::string_view reference);

/// Longest-common-subsequence F1.
double rouge_l(std::span<const std::string> hypothesis, std::span<const std::string> reference);
double rouge_l(std::string_view hypothesis, std::string_view reference);

}  // namespace rrg::rewards
