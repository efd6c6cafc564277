#include "rrg/rewards/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rrg/model/tokenizer.hpp"

namespace rrg::rewards {

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> ngram_counts(std::span<const std::string> t, std::size_t n) {
  std::map<Gram, std::size_t> counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Gram(t.begin() + i, t.begin() + i + n)];
  return counts;
}

}  // namespace

double arn(std::span<const std::string> tokens) {
  double worst = 0.0;
  for (std::size_t n = 2; n <= 4; ++n) {
    if (tokens.size() < n) continue;
    const std::size_t total = tokens.size() - n + 1;
    const std::size_t distinct = ngram_counts(tokens, n).size();
    worst = std::max(worst, 1.0 - static_cast<double>(distinct) / static_cast<double>(total));
  }
  return 1.0 - worst;
}

double arn(std::string_view text) { return arn(model::split_words(text)); }

double bleu4(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    std::size_t matched = 0;
    for (const auto& [gram, count] : h) {
      const auto it = r.find(gram);
      if (it != r.end()) matched += std::min(count, it->second);
    }
    const std::size_t total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double h = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  const double bp = std::exp(std::min(0.0, 1.0 - r / h));
  return bp * std::exp(log_sum / 4.0);
}

double bleu4(std::string_view hypothesis, std::string_view reference) {
  return bleu4(model::split_words(hypothesis), model::split_words(reference));
}

double rouge_l(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[ref.size()]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
  return rouge_l(model::split_words(hypothesis), model::split_words(reference));
}

}  // namespace rrg::rewards
